"""Pattern-matching function definitions (``.fix`` files).

A ``.fix`` file reuses the ``sorts:`` and ``constructors:`` blocks of the
specification syntax, followed by definitions::

    fixpoint oeven(x: nat): bool :=
      match x with
      | 0 => true
      | S(0) => false
      | S(S(n)) => if odd(n) then false else even(n)
      end;

Definitions may refer to each other in any order. A mutually recursive
group chains its members with ``with`` and ends with a single ``;``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from .clauses import ConditionalEquation
from .syntax import (
    ParseError,
    RawTerm,
    Stream,
    _Typer,
    _at_block,
    _parse_decl,
    parse_raw_term,
    tokenize,
)
from .terms import (
    App,
    Signature,
    Sort,
    SortError,
    Symbol,
    Term,
    Var,
    apply,
    cover_patterns,
    depth,
    fresh_names,
    is_constructor_term,
    is_linear,
    match_at,
    unifiable_linear,
)

KEYWORDS = {"fixpoint", "with", "match", "end", "if", "then", "else"}


class FixpointError(ValueError):
    pass


class OverlapError(FixpointError):
    pass


class EvaluationBudget(RuntimeError):
    pass


@dataclass(frozen=True)
class IfThenElse:
    cond: Term
    then: "Body"
    other: "Body"
    yes: Term  # the boolean sort's two constants, in declaration order
    no: Term


Body = Union[Term, IfThenElse]


@dataclass
class FixpointDefinition:
    symbol: Symbol
    params: tuple[Var, ...]
    scrutinee: int | None
    branches: list[tuple[Term, Body]] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.symbol.name


def check_definition(d: FixpointDefinition) -> None:
    """Patterns are linear constructor terms and pairwise non-overlapping."""
    pats = [p for p, _ in d.branches]
    for p in pats:
        if not is_constructor_term(p):
            raise FixpointError(f"{d.name}: pattern {p} is not a constructor pattern")
        if not is_linear(p):
            raise FixpointError(f"{d.name}: pattern {p} repeats a variable")
    for i, p in enumerate(pats):
        for q in pats[i + 1:]:
            if unifiable_linear(p, q):
                raise OverlapError(f"{d.name}: patterns {p} and {q} overlap")


def _lhs(d: FixpointDefinition, pattern: Term) -> tuple[Term, dict]:
    if d.scrutinee is None:
        return App(d.symbol, d.params), {}
    x = d.params[d.scrutinee]
    args = list(d.params)
    args[d.scrutinee] = pattern
    return App(d.symbol, tuple(args)), {x: pattern}


def translate_fixpoint(d: FixpointDefinition) -> list[ConditionalEquation]:
    """One equation per plain branch; each if-then-else splits into a
    ``cond = true`` and a ``cond = false`` equation. Labels are the function
    name followed by a running index."""
    check_definition(d)
    out: list[ConditionalEquation] = []

    def emit(lhs: Term, body: Body, conds: tuple, s: dict) -> None:
        if isinstance(body, IfThenElse):
            c = apply(s, body.cond)
            emit(lhs, body.then, conds + ((c, body.yes),), s)
            emit(lhs, body.other, conds + ((c, body.no),), s)
        else:
            out.append(ConditionalEquation(f"{d.name}{len(out) + 1}", conds, lhs, apply(s, body)))

    for pattern, body in d.branches:
        lhs, s = _lhs(d, pattern)
        emit(lhs, body, (), s)
    return out


def soundness_obligations(d: FixpointDefinition, axioms: Iterable[ConditionalEquation]) -> list[ConditionalEquation]:
    """Each translated axiom restated as a theorem about ``d``."""
    return [ConditionalEquation(f"{a.label}_soundness", a.conditions, a.lhs, a.rhs) for a in axioms]


def pattern_completeness(d: FixpointDefinition, sig: Signature) -> list[Term]:
    """Uncovered representative patterns; an empty list means the match is exhaustive."""
    if d.scrutinee is None:
        return []
    pats = [p for p, _ in d.branches]
    k = max((depth(p) for p in pats), default=0)
    sort = d.params[d.scrutinee].sort
    reps = cover_patterns(sig, sort, k, fresh_names("n"))
    return [r for r in reps if not any(match_at(p, r) is not None for p in pats)]


# --- evaluation --------------------------------------------------------------------


class Interpreter:
    """Call-by-value evaluation of ground terms with a step budget per call."""

    def __init__(self, defs: Iterable[FixpointDefinition], budget: int = 100_000):
        self.defs = {d.name: d for d in defs}
        self.budget = budget
        self._steps = 0

    def evaluate(self, t: Term) -> Term:
        self._steps = 0
        return self._eval(t)

    def _tick(self) -> None:
        self._steps += 1
        if self._steps > self.budget:
            raise EvaluationBudget(f"evaluation exceeded {self.budget} steps")

    def _eval(self, t: Term) -> Term:
        if isinstance(t, Var):
            raise ValueError(f"cannot evaluate open term containing {t.name}")
        args = tuple(self._eval(a) for a in t.args)
        if t.head.constructor:
            return App(t.head, args)
        d = self.defs.get(t.head.name)
        if d is None:
            raise KeyError(f"no definition for {t.head.name}")
        self._tick()
        env = dict(zip(d.params, args))
        if d.scrutinee is None:
            return self._body(d.branches[0][1], env)
        value = args[d.scrutinee]
        for pattern, body in d.branches:
            s = match_at(pattern, value)
            if s is not None:
                env.update(s)
                env[d.params[d.scrutinee]] = value
                return self._body(body, env)
        raise ValueError(f"{d.name}: no branch matches {value}")

    def _body(self, body: Body, env: Mapping[Var, Term]) -> Term:
        while isinstance(body, IfThenElse):
            c = self._eval(apply(env, body.cond))
            body = body.then if c == body.yes else body.other
        return self._eval(apply(env, body))


# --- parsing --------------------------------------------------------------------------


@dataclass
class _RawDef:
    name_tok: object
    params: list[tuple[str, str]]
    result: str
    scrutinee: str | None
    branches: list


def _raw_body(ts: Stream):
    if ts.at("if"):
        ts.next()
        cond = parse_raw_term(ts)
        ts.expect("then")
        then = _raw_body(ts)
        ts.expect("else")
        return ("if", cond, then, _raw_body(ts))
    if ts.peek.kind == "id" and ts.peek.text in KEYWORDS:
        t = ts.peek
        raise ParseError(f"unexpected keyword {t.text!r}", t.line, t.col, ("term", "if"))
    return parse_raw_term(ts)


def _raw_def(ts: Stream) -> _RawDef:
    ts.expect("fixpoint", "with")
    name = ts.ident("function name")
    ts.expect("(")
    params = []
    while True:
        p = ts.ident("parameter")
        ts.expect(":")
        params.append((p.text, ts.ident("sort").text))
        if ts.at(")"):
            break
        ts.expect(",")
    ts.next()
    ts.expect(":")
    result = ts.ident("result sort").text
    ts.expect(":=")
    if ts.at("match"):
        ts.next()
        scrut = ts.ident("parameter").text
        ts.expect("with")
        branches = []
        while ts.at("|"):
            ts.next()
            pat = parse_raw_term(ts)
            ts.expect("=>")
            branches.append((pat, _raw_body(ts)))
        if not branches:
            raise ParseError("match without branches", ts.peek.line, ts.peek.col, ("|",))
        ts.expect("end")
    else:
        scrut = None
        branches = [(None, _raw_body(ts))]
    if not ts.at("with"):
        ts.expect(";", "with")
    return _RawDef(name, params, result, scrut, branches)


def parse_fix(text: str) -> tuple[Signature, list[FixpointDefinition]]:
    ts = Stream(tokenize(text))
    sig = Signature()
    raws: list[_RawDef] = []
    while ts.peek.kind != "eof":
        t = ts.peek
        if t.text in ("fixpoint", "with"):
            raws.append(_raw_def(ts))
            continue
        if t.text not in ("sorts", "constructors") or ts.ahead(1).text != ":":
            raise ParseError(f"unexpected {t.text!r}", t.line, t.col, ("sorts:", "constructors:", "fixpoint"))
        ts.next()
        ts.next()
        if t.text == "sorts":
            names = []
            while ts.peek.kind == "id":
                names.append(ts.next())
            if not names:
                raise ParseError("empty sort list", ts.peek.line, ts.peek.col, ("sort name",))
            ts.expect(";")
            for n in names:
                sig.add_sort(Sort(n.text))
        else:
            while not _at_block(ts) and ts.peek.text not in ("fixpoint", "with"):
                _parse_decl(ts, sig, True)
    if not raws:
        raise ParseError("no fixpoint definitions", ts.peek.line, ts.peek.col, ("fixpoint",))
    for r in raws:
        sorts = []
        for _, sname in r.params + [("", r.result)]:
            s = sig.sorts.get(sname)
            if s is None:
                raise ParseError(f"unknown sort {sname}", r.name_tok.line, r.name_tok.col)
            sorts.append(s)
        try:
            sig.add_symbol(Symbol(r.name_tok.text, tuple(sorts[:-1]), sorts[-1], False))
        except SortError as e:
            raise ParseError(str(e), r.name_tok.line, r.name_tok.col) from None
    return sig, [_type_def(sig, r) for r in raws]


def _type_def(sig: Signature, r: _RawDef) -> FixpointDefinition:
    f = sig.symbols[r.name_tok.text]
    params = tuple(Var(n, sig.sorts[s]) for n, s in r.params)
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise ParseError(f"{f.name}: repeated parameter", r.name_tok.line, r.name_tok.col)
    scrut = None
    if r.scrutinee is not None:
        if r.scrutinee not in names:
            raise ParseError(f"{f.name}: match on unknown parameter {r.scrutinee}", r.name_tok.line, r.name_tok.col)
        scrut = names.index(r.scrutinee)
    d = FixpointDefinition(f, params, scrut)
    for pat_raw, body_raw in r.branches:
        typer = _Typer(sig)
        for p in params:
            typer.vars[p.name] = p.sort
        if pat_raw is None:
            pattern: Term = params[0] if params else App(f)
        else:
            scrut_var = params[scrut]
            # pattern variables shadow nothing: they must be fresh names
            for v in _raw_vars(pat_raw, sig):
                if v.name in names:
                    raise ParseError(f"{f.name}: pattern variable {v.name} shadows a parameter", v.line, v.col)
            typer.collect(pat_raw, scrut_var.sort)
            pattern = typer.build(pat_raw)
        body = _type_body(typer, body_raw, f.sort, sig)
        d.branches.append((pattern, body))
    try:
        check_definition(d)
    except FixpointError as e:
        raise ParseError(str(e), r.name_tok.line, r.name_tok.col) from None
    return d


def _raw_vars(raw: RawTerm, sig: Signature) -> list[RawTerm]:
    if raw.args is None and raw.name not in sig.symbols:
        return [raw]
    return [v for a in raw.args or [] for v in _raw_vars(a, sig)]


def _type_body(typer: _Typer, raw, expected: Sort, sig: Signature) -> Body:
    if isinstance(raw, tuple):
        _, cond, then, other = raw
        typer.collect(cond, None)
        c = typer.build(cond)
        if not sig.is_boolean(c.sort):
            raise ParseError(f"if-condition must be boolean, got {c.sort}", cond.line, cond.col)
        yes, no = (App(k) for k in sig.constructors(c.sort))
        return IfThenElse(
            c, _type_body(typer, then, expected, sig), _type_body(typer, other, expected, sig), yes, no
        )
    typer.collect(raw, expected)
    t = typer.build(raw)
    if t.sort != expected:
        raise ParseError(f"sort error: branch has sort {t.sort}, expected {expected}", raw.line, raw.col)
    return t


def load_fix(path) -> tuple[Signature, list[FixpointDefinition]]:
    with open(path, encoding="utf-8") as fh:
        return parse_fix(fh.read())
