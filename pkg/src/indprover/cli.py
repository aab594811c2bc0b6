"""Command-line entry point.

Exit codes: 0 success, 1 proof failure / rejected certificate / counterexample,
2 unreadable or invalid input.
"""
from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

from .certificate import (
    CertificateFormatError,
    Reason,
    Rejected,
    check,
    emit,
    format_report,
    parse_certificate,
    wellfoundedness_report,
)
from .clauses import ConditionalEquation, instantiate
from .engine import Failure, Strategy, prove
from .fixpoint import EvaluationBudget, FixpointError, Interpreter, load_fix, soundness_obligations, translate_fixpoint
from .ordering import CycleError, measure_compare, rpo_compare
from .syntax import ParseError, Specification, load_spec, parse_spec, parse_term_pair, print_spec, show_clause, show_term
from .terms import SortError, enumerate_ground, show

OK, FAILED, BAD_INPUT = 0, 1, 2


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load(path: str) -> Specification:
    return load_spec(path)


def cmd_prove(args) -> int:
    spec = _load(args.spec)
    if args.no_lemmas:
        spec = spec.without_lemmas()
    st = Strategy(
        max_steps=args.max_steps,
        induction_priorities=[p for p in args.priorities.split(",") if p] if args.priorities else None,
        test_set_depth=args.depth,
    )
    goals = [l.label for l in spec.lemmas] + [c.label for c in spec.conjectures]
    if not goals:
        _err("nothing to prove")
        return BAD_INPUT
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    status = OK
    for label in goals:
        result = prove(spec, st, [label])
        if isinstance(result, Failure):
            status = FAILED
            print(f"{label}: FAILED after {result.steps} steps ({result})")
            if result.counterexample:
                binding = ", ".join(f"{v.name}={show(t)}" for v, t in result.counterexample.items())
                print(f"  counterexample: {binding}")
            continue
        path = out / f"{label}.cert"
        emit(result, path)
        print(f"{label}: proved in {len(result.steps)} steps -> {path}")
        if args.emit_report:
            report = format_report(wellfoundedness_report(result))
            (out / f"{label}.report").write_text(report, encoding="utf-8")
            sys.stdout.write(report)
    return status


def cmd_check(args) -> int:
    spec = _load(args.spec)
    text = Path(args.cert).read_text(encoding="utf-8")
    header = text.split("\n", 1)[0].split()
    if len(header) == 3 and header[:2] == ["CERT", "v1"] and header[2] != spec.digest():
        verdict = Rejected(None, Reason.HASH_MISMATCH, "certificate was made for another specification")
    else:
        try:
            verdict = check(spec, parse_certificate(text, spec))
        except CertificateFormatError as e:
            verdict = Rejected(None, Reason.BAD_MATCH, f"malformed certificate: {e}")
    if verdict:
        print("Accepted")
        return OK
    print(verdict)
    return FAILED


def cmd_translate(args) -> int:
    sig, defs = load_fix(args.fix)
    axioms: list[ConditionalEquation] = []
    obligations: list[ConditionalEquation] = []
    for d in defs:
        eqs = translate_fixpoint(d)
        axioms += eqs
        obligations += soundness_obligations(d, eqs)
    spec = Specification(sig, axioms)
    if args.goals:
        extra = _load(args.goals)
        spec = Specification(sig, axioms, extra.lemmas, extra.conjectures, extra.precedence)
        # reparse to type the goals against the translated signature
        spec = _reparse(spec)
    sys.stdout.write(print_spec(spec))
    print("-- obligations:")
    for ob in obligations:
        print(f"--   {ob.label}: {show_clause(ob)};")
    return OK


def _reparse(spec: Specification) -> Specification:
    return parse_spec(print_spec(spec))


def cmd_order(args) -> int:
    spec = _load(args.spec)
    s, t = parse_term_pair(spec.signature, args.compare[0], args.compare[1])
    print(rpo_compare(spec.precedence, s, t))
    if args.measure:
        print(f"measure: {measure_compare(spec.precedence, (s,), (t,))}")
    return OK


def cmd_oracle(args) -> int:
    spec = _load(args.spec)
    fix_paths = args.fix or sorted(str(p) for p in Path(args.spec).resolve().parent.glob("*.fix"))
    defs = []
    for p in fix_paths:
        defs += load_fix(p)[1]
    have = {d.name for d in defs}
    missing = [f.name for f in spec.signature.defined() if f.name not in have]
    if missing:
        _err(f"no fixpoint definition for: {', '.join(missing)}")
        return BAD_INPUT
    interp = Interpreter(defs, budget=args.budget)
    for eq in spec.axioms + spec.lemmas + spec.conjectures:
        witness = falsify(spec, eq, interp, args.depth)
        if witness is not None:
            binding, lhs, rhs = witness
            shown = ", ".join(f"{v.name}={show(t)}" for v, t in binding.items()) or "(ground)"
            print(f"{eq.label}: counterexample {shown}: {show_term(lhs)} /= {show_term(rhs)}")
            return FAILED
    print(f"no counterexample up to depth {args.depth}")
    return OK


def falsify(spec: Specification, eq: ConditionalEquation, interp: Interpreter, depth: int):
    """First ground instance (depth-bounded) whose conditions hold and whose sides differ."""
    vs = eq.variables()
    pools = [enumerate_ground(spec.signature, v.sort, depth) for v in vs]
    for combo in itertools.product(*pools):
        s = dict(zip(vs, combo))
        inst = instantiate(eq, s)
        try:
            if any(interp.evaluate(l) != interp.evaluate(r) for l, r in inst.conditions):
                continue
            lhs, rhs = interp.evaluate(inst.lhs), interp.evaluate(inst.rhs)
        except EvaluationBudget:
            continue
        if lhs != rhs:
            return s, lhs, rhs
    return None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="indprover", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prove", help="prove lemmas then conjectures, writing one certificate per goal")
    p.add_argument("spec")
    p.add_argument("--out-dir", default="certificates")
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--priorities", help="comma-separated induction priorities, highest first")
    p.add_argument("--emit-report", action="store_true", help="also write the descent report of each certificate")
    p.add_argument("--depth", type=int, help="override the test-set depth")
    p.add_argument("--no-lemmas", action="store_true", help="drop the lemmas block before proving")
    p.set_defaults(run=cmd_prove)

    p = sub.add_parser("check", help="replay a certificate against a specification")
    p.add_argument("spec")
    p.add_argument("cert")
    p.set_defaults(run=cmd_check)

    p = sub.add_parser("translate", help="turn fixpoint definitions into conditional axioms")
    p.add_argument("fix")
    p.add_argument("--goals", help="take lemmas, conjectures and order from this specification")
    p.set_defaults(run=cmd_translate)

    p = sub.add_parser("order", help="compare two terms in the specification's ordering")
    p.add_argument("spec")
    p.add_argument("--compare", nargs=2, metavar=("T1", "T2"), required=True)
    p.add_argument("--measure", action="store_true", help="also compare the singleton measures")
    p.set_defaults(run=cmd_order)

    p = sub.add_parser("oracle", help="evaluate every equation on ground instances")
    p.add_argument("spec")
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--fix", action="append", help="fixpoint file (default: all .fix files next to the specification)")
    p.add_argument("--budget", type=int, default=100_000, help="evaluation steps per term")
    p.set_defaults(run=cmd_oracle)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except (ParseError, CycleError, FixpointError, SortError) as e:
        _err(f"error: {type(e).__name__}: {e}")
        return BAD_INPUT
    except OSError as e:
        _err(f"error: {e}")
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
