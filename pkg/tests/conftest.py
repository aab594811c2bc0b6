import itertools
from pathlib import Path

import pytest

from indprover import corpus_path
from indprover.fixpoint import load_fix
from indprover.syntax import load_spec, parse_clause, parse_spec
from indprover.terms import App

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def spec():
    return load_spec(corpus_path())


@pytest.fixture(scope="session")
def sig(spec):
    return spec.signature


@pytest.fixture(scope="session")
def prec(spec):
    return spec.precedence


@pytest.fixture(scope="session")
def fixdefs():
    return load_fix(corpus_path("evenodd.fix"))[1]


@pytest.fixture(scope="session")
def T(sig):
    """Parse a term over the corpus signature; untyped variables default to nat."""

    return lambda text: _nat_default(sig, text)


def _nat_default(sig, text):
    from indprover.syntax import _single_raw, _Typer

    raw = _single_raw(text)
    typer = _Typer(sig)
    typer.collect(raw, None)
    # variables whose sort is not fixed by context are taken as nat
    for name in _names(raw, sig):
        typer.vars.setdefault(name, sig.sorts["nat"])
    return typer.build(raw)


def _names(raw, sig):
    if raw.args is None and raw.name not in sig.symbols:
        yield raw.name
    for a in raw.args or []:
        yield from _names(a, sig)


@pytest.fixture(scope="session")
def C(sig):
    return lambda text, label="": parse_clause(sig, text, label)


def ground_terms(sig, max_depth):
    """Every ground term (defined symbols included) up to ``max_depth``, by sort."""
    out = {s: [] for s in sig.sorts.values()}
    for f in sig.symbols.values():
        if f.arity == 0:
            out[f.sort].append(App(f))
    for _ in range(max_depth - 1):
        nxt = {s: [] for s in sig.sorts.values()}
        for f in sig.symbols.values():
            if f.arity == 0:
                nxt[f.sort].append(App(f))
            else:
                for args in itertools.product(*[out[s] for s in f.arg_sorts]):
                    nxt[f.sort].append(App(f, tuple(args)))
        out = nxt
    return out


def spec_with(extra_conjectures: str, lemmas: bool = True):
    """The corpus with its conjectures replaced."""
    text = corpus_path().read_text()
    head, _, tail = text.partition("conjectures:")
    order = tail[tail.index("order:"):]
    if not lemmas:
        h, _, rest = head.partition("lemmas:")
        head = h
    return parse_spec(head + "conjectures:\n" + extra_conjectures + "\n" + order)
