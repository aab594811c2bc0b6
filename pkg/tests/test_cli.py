import shutil

import pytest

from conftest import DATA
from indprover import corpus_path
from indprover.cli import BAD_INPUT, FAILED, OK, main

CORPUS = corpus_path()
FIX = corpus_path("evenodd.fix")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_prove_corpus(tmp_path, capsys):
    code, out, _ = run(capsys, "prove", CORPUS, "--out-dir", tmp_path)
    assert code == OK
    assert sorted(p.name for p in tmp_path.iterdir()) == ["addS1.cert", "addx0.cert", "even_xx.cert"]
    lines = out.splitlines()
    assert [l.split(":")[0] for l in lines] == ["addx0", "addS1", "even_xx"]
    assert all("proved in" in l for l in lines)


def test_prove_budget(tmp_path, capsys):
    code, out, _ = run(capsys, "prove", CORPUS, "--out-dir", tmp_path, "--max-steps", 1)
    assert code == FAILED
    assert "budget" in out


def test_prove_cyclic_precedence(tmp_path, capsys):
    text = CORPUS.read_text().replace("[add, S, 0]", "[add, S, 0], [0, add]")
    bad = tmp_path / "cyclic.spk"
    bad.write_text(text)
    code, _, err = run(capsys, "prove", bad, "--out-dir", tmp_path / "out")
    assert code == BAD_INPUT
    assert "CycleError" in err


def test_prove_without_lemmas_fails(tmp_path, capsys):
    code, out, _ = run(capsys, "prove", CORPUS, "--out-dir", tmp_path, "--no-lemmas", "--depth", 1)
    assert code == FAILED
    assert "even_xx: FAILED" in out


def test_prove_emits_report(tmp_path, capsys):
    code, out, _ = run(capsys, "prove", CORPUS, "--out-dir", tmp_path, "--emit-report")
    assert code == OK
    assert (tmp_path / "even_xx.report").read_text() in out


def test_prove_priorities(tmp_path, capsys):
    code, _, _ = run(capsys, "prove", CORPUS, "--out-dir", tmp_path, "--priorities", "even,add")
    assert code == OK


@pytest.fixture(scope="module")
def cert_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("certs")
    assert main(["prove", str(CORPUS), "--out-dir", str(d)]) == OK
    return d


def test_check_fresh(cert_dir, capsys):
    for name in ("addx0", "addS1", "even_xx"):
        code, out, _ = run(capsys, "check", CORPUS, cert_dir / f"{name}.cert")
        assert (code, out) == (OK, "Accepted\n")


def test_check_edited_spec(cert_dir, tmp_path, capsys):
    edited = tmp_path / "edited.spk"
    edited.write_text(CORPUS.read_text().replace("add(x, 0) = x;", "add(x, 0) = x;\n  extra: add(0, 0) = 0;", 1))
    code, out, _ = run(capsys, "check", edited, cert_dir / "addx0.cert")
    assert code == FAILED
    assert "HashMismatch" in out


def test_check_tampered_obligation(cert_dir, tmp_path, capsys):
    lines = (cert_dir / "even_xx.cert").read_text().splitlines(keepends=True)
    i = next(i for i, l in enumerate(lines) if l.startswith("OBL\t"))
    lines[i] = lines[i].replace("\tLess\n", "\tGreater\n")
    bad = tmp_path / "bad.cert"
    bad.write_text("".join(lines))
    code, out, _ = run(capsys, "check", CORPUS, bad)
    assert code == FAILED
    assert out.startswith("Rejected at step 1: OrderingViolation")


def test_check_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.cert"
    bad.write_text("not a certificate\n")
    code, out, _ = run(capsys, "check", CORPUS, bad)
    assert code == FAILED and "Rejected" in out


def test_check_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "check", CORPUS, tmp_path / "nope.cert")
    assert code == BAD_INPUT and err


def test_translate_evenodd(capsys):
    code, out, _ = run(capsys, "translate", FIX)
    assert code == OK
    block = out.split("axioms:\n", 1)[1].split("-- obligations:", 1)[0]
    labels = [l.split(":")[0].strip() for l in block.splitlines() if l.strip()]
    expected = ["add1", "add2", "even1", "even2", "even3", "oeven1", "oeven2", "oeven3", "oeven4",
                "odd1", "odd2", "odd3", "eodd1", "eodd2", "eodd3", "eodd4"]
    assert labels == expected
    assert out.count("_soundness:") == 16


def test_translate_add(capsys):
    code, out, _ = run(capsys, "translate", DATA / "add.fix")
    assert code == OK
    assert "add1: add(0, y) = y;" in out
    assert "add2: add(S(u), y) = S(add(u, y));" in out


def test_translate_empty(tmp_path, capsys):
    empty = tmp_path / "empty.fix"
    empty.write_text("")
    code, _, err = run(capsys, "translate", empty)
    assert code == BAD_INPUT and "ParseError" in err


def test_translate_overlap(tmp_path, capsys):
    bad = tmp_path / "overlap.fix"
    bad.write_text(
        "sorts: nat;\nconstructors: 0: -> nat; S_: nat -> nat;\n"
        "fixpoint f(x: nat): nat := match x with | 0 => 0 | S(n) => n | S(S(m)) => m end;\n"
    )
    code, _, err = run(capsys, "translate", bad)
    assert code == BAD_INPUT and "overlap" in err


def test_pipeline(tmp_path, capsys):
    code, out, _ = run(capsys, "translate", FIX, "--goals", CORPUS)
    assert code == OK
    spec = tmp_path / "translated.spk"
    spec.write_text(out)
    code, _, _ = run(capsys, "prove", spec, "--out-dir", tmp_path / "certs")
    assert code == OK
    for cert in sorted((tmp_path / "certs").iterdir()):
        assert run(capsys, "check", spec, cert)[0] == OK


@pytest.mark.parametrize(
    "t1, t2, expected",
    [
        ("add(S(x),y)", "S(add(x,y))", "Greater"),
        ("S(add(x,y))", "add(S(x),y)", "Less"),
        ("x", "x", "Equivalent"),
        ("even(x)", "odd(x)", "Equivalent"),
        ("x", "y", "Incomparable"),
    ],
)
def test_order(capsys, t1, t2, expected):
    code, out, _ = run(capsys, "order", CORPUS, "--compare", t1, t2)
    assert (code, out) == (OK, expected + "\n")


def test_order_measure(capsys):
    code, out, _ = run(capsys, "order", CORPUS, "--compare", "add(S(x),y)", "S(add(x,y))", "--measure")
    assert code == OK and out.splitlines() == ["Greater", "measure: Greater"]


@pytest.mark.parametrize("t1, t2", [("true", "0"), ("add(x", "0"), ("nosuch(0)", "0")])
def test_order_bad_terms(capsys, t1, t2):
    assert run(capsys, "order", CORPUS, "--compare", t1, t2)[0] == BAD_INPUT


def test_oracle_corpus(capsys):
    code, out, _ = run(capsys, "oracle", CORPUS, "--depth", 6, "--fix", FIX)
    assert code == OK
    assert out == "no counterexample up to depth 6\n"


def test_oracle_false_conjecture(tmp_path, capsys):
    spec = tmp_path / "false.spk"
    spec.write_text(CORPUS.read_text().replace("even(add(x, x)) = true", "even(S(0)) = true"))
    code, out, _ = run(capsys, "oracle", spec, "--depth", 3, "--fix", FIX)
    assert code == FAILED
    assert out == "even_xx: counterexample (ground): false /= true\n"


def test_oracle_finds_witness(tmp_path, capsys):
    spec = tmp_path / "false.spk"
    spec.write_text(CORPUS.read_text().replace("even(add(x, x)) = true", "even(add(x, S(0))) = true"))
    code, out, _ = run(capsys, "oracle", spec, "--depth", 3, "--fix", FIX)
    assert code == FAILED
    assert out.startswith("even_xx: counterexample x=0:")


def test_oracle_default_fix_discovery(tmp_path, capsys):
    shutil.copy(CORPUS, tmp_path / "corpus.spk")
    shutil.copy(FIX, tmp_path / "evenodd.fix")
    assert run(capsys, "oracle", tmp_path / "corpus.spk", "--depth", 4)[0] == OK


def test_oracle_missing_definitions(tmp_path, capsys):
    shutil.copy(CORPUS, tmp_path / "corpus.spk")
    code, _, err = run(capsys, "oracle", tmp_path / "corpus.spk", "--depth", 2, "--fix", DATA / "add.fix")
    assert code == BAD_INPUT and "even" in err
