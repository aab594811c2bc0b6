"""Lexer, parser and printer for ``.spk`` specification files.

Layout::

    sorts: bool nat;
    constructors:
      true : -> bool;
      S_ : nat -> nat;            -- trailing underscores mark argument slots
    defined functions:
      add__ : nat nat -> nat;
    axioms:
      add1: add(0, x) = x;
      oeven3: odd(x) = true => oeven(S(S(x))) = false;
    lemmas: ...
    conjectures: ...
    order: equiv [[even, oeven]] greater [[add, S, 0]];

Variables are identifiers that are not declared symbols; their sorts are
inferred per clause, or given explicitly as ``x:nat``.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Iterator

from .clauses import ConditionalEquation
from .ordering import CycleError, Precedence, PrecedenceSyntaxError, parse_precedence, validate_precedence
from .terms import App, Signature, Sort, SortError, Symbol, Term, Var, is_constructor_term, show, variables

BLOCKS = ("sorts", "constructors", "defined", "axioms", "lemmas", "conjectures", "order")
ANY = Sort("_")


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0, expected: tuple[str, ...] = ()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected
        where = f"{line}:{col}: " if line else ""
        exp = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"{where}{message}{exp}")


@dataclass
class Token:
    kind: str  # "id", "sym" or "eof"
    text: str
    line: int
    col: int


_TOKEN = re.compile(r"\s+|--[^\n]*|(?P<sym>=>|->|:=|[()\[\],;:=|])|(?P<id>[A-Za-z0-9_']+)")


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        if m.lastgroup:
            out.append(Token(m.lastgroup, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class Stream:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    @property
    def peek(self) -> Token:
        return self.toks[self.i]

    def ahead(self, k: int) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.peek.text == text and self.peek.kind != "eof"

    def expect(self, *texts: str) -> Token:
        t = self.peek
        if t.kind == "eof" or t.text not in texts:
            raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.line, t.col, texts)
        return self.next()

    def ident(self, what: str = "identifier") -> Token:
        t = self.peek
        if t.kind != "id":
            raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.line, t.col, (what,))
        return self.next()


# --- raw terms and typing -------------------------------------------------------


@dataclass
class RawTerm:
    name: str
    args: list["RawTerm"] | None  # None: no parentheses
    annot: str | None
    line: int
    col: int


def parse_raw_term(ts: Stream) -> RawTerm:
    tok = ts.ident("term")
    if ts.at("("):
        ts.next()
        args = [parse_raw_term(ts)]
        while ts.at(","):
            ts.next()
            args.append(parse_raw_term(ts))
        ts.expect(")")
        return RawTerm(tok.text, args, None, tok.line, tok.col)
    annot = None
    if ts.at(":") and ts.ahead(1).kind == "id" and ts.ahead(2).text not in (":",) and not _is_block_start(ts, 1):
        ts.next()
        annot = ts.ident("sort").text
    return RawTerm(tok.text, None, annot, tok.line, tok.col)


def _is_block_start(ts: Stream, k: int) -> bool:
    t = ts.ahead(k)
    return t.kind == "id" and t.text in BLOCKS and ts.ahead(k + 1).text in (":", "functions")


class _Typer:
    """Infers variable sorts for one clause and builds typed terms."""

    def __init__(self, sig: Signature, allow_untyped: bool = False):
        self.sig = sig
        self.vars: dict[str, Sort] = {}
        self.allow_untyped = allow_untyped

    def _record(self, raw: RawTerm, sort: Sort) -> bool:
        have = self.vars.get(raw.name)
        if have is None:
            self.vars[raw.name] = sort
            return True
        if have != sort:
            raise ParseError(f"sort error: variable {raw.name} used as {have} and {sort}", raw.line, raw.col)
        return False

    def _symbol(self, raw: RawTerm) -> Symbol | None:
        f = self.sig.symbols.get(raw.name)
        if f is None:
            if raw.args is not None:
                raise ParseError(f"unknown function symbol {raw.name}", raw.line, raw.col)
            return None
        n = len(raw.args or [])
        if n != f.arity:
            raise ParseError(f"{raw.name} expects {f.arity} arguments, got {n}", raw.line, raw.col)
        if raw.annot:
            raise ParseError(f"{raw.name} is a symbol, not a variable", raw.line, raw.col)
        return f

    def collect(self, raw: RawTerm, expected: Sort | None) -> bool:
        changed = False
        f = self._symbol(raw)
        if f is None:
            if raw.annot:
                s = self.sig.sorts.get(raw.annot)
                if s is None:
                    raise ParseError(f"unknown sort {raw.annot}", raw.line, raw.col)
                changed |= self._record(raw, s)
            if expected is not None:
                changed |= self._record(raw, expected)
            return changed
        if expected is not None and f.sort != expected:
            raise ParseError(f"sort error: {raw.name}(...) has sort {f.sort}, expected {expected}", raw.line, raw.col)
        for a, s in zip(raw.args or [], f.arg_sorts):
            changed |= self.collect(a, s)
        return changed

    def sort_of(self, raw: RawTerm) -> Sort | None:
        f = self._symbol(raw)
        return f.sort if f is not None else self.vars.get(raw.name)

    def infer(self, pairs: list[tuple[RawTerm, RawTerm]]) -> None:
        for l, r in pairs:
            self.collect(l, None)
            self.collect(r, None)
        changed = True
        while changed:
            changed = False
            for l, r in pairs:
                sl, sr = self.sort_of(l), self.sort_of(r)
                if sl is not None and sr is not None and sl != sr:
                    raise ParseError(f"sort error: {sl} = {sr}", r.line, r.col)
                if sl is not None and sr is None:
                    changed |= self.collect(r, sl)
                elif sr is not None and sl is None:
                    changed |= self.collect(l, sr)

    def build(self, raw: RawTerm) -> Term:
        f = self._symbol(raw)
        if f is None:
            s = self.vars.get(raw.name)
            if s is None:
                if not self.allow_untyped:
                    raise ParseError(f"cannot infer the sort of variable {raw.name}", raw.line, raw.col)
                s = ANY
            return Var(raw.name, s)
        return App(f, tuple(self.build(a) for a in raw.args or []))


def parse_raw_clause(ts: Stream) -> tuple[list[tuple[RawTerm, RawTerm]], tuple[RawTerm, RawTerm]]:
    eqs = [_raw_eq(ts)]
    while ts.at(","):
        ts.next()
        eqs.append(_raw_eq(ts))
    if ts.at("=>"):
        ts.next()
        return eqs, _raw_eq(ts)
    if len(eqs) > 1:
        t = ts.peek
        raise ParseError("several equations without '=>'", t.line, t.col, ("=>",))
    return [], eqs[0]


def _raw_eq(ts: Stream) -> tuple[RawTerm, RawTerm]:
    l = parse_raw_term(ts)
    ts.expect("=")
    return l, parse_raw_term(ts)


def type_clause(sig: Signature, label: str, conds, concl, allow_untyped: bool = False) -> ConditionalEquation:
    typer = _Typer(sig, allow_untyped)
    typer.infer(list(conds) + [concl])
    return ConditionalEquation(
        label,
        tuple((typer.build(l), typer.build(r)) for l, r in conds),
        typer.build(concl[0]),
        typer.build(concl[1]),
    )


def parse_term(sig: Signature, text: str, var_sorts: dict[str, Sort] | None = None, allow_untyped: bool = False) -> Term:
    ts = Stream(tokenize(text))
    raw = parse_raw_term(ts)
    if ts.peek.kind != "eof":
        raise ParseError(f"trailing input {ts.peek.text!r}", ts.peek.line, ts.peek.col)
    typer = _Typer(sig, allow_untyped)
    if var_sorts:
        typer.vars.update(var_sorts)
    typer.collect(raw, None)
    return typer.build(raw)


def parse_term_pair(sig: Signature, a: str, b: str) -> tuple[Term, Term]:
    """Two terms typed jointly as the sides of one equation (sorts must agree)."""
    ra = _single_raw(a)
    rb = _single_raw(b)
    typer = _Typer(sig, allow_untyped=True)
    typer.infer([(ra, rb)])
    return typer.build(ra), typer.build(rb)


def _single_raw(text: str) -> RawTerm:
    ts = Stream(tokenize(text))
    raw = parse_raw_term(ts)
    if ts.peek.kind != "eof":
        raise ParseError(f"trailing input {ts.peek.text!r}", ts.peek.line, ts.peek.col)
    return raw


def parse_clause(sig: Signature, text: str, label: str = "") -> ConditionalEquation:
    ts = Stream(tokenize(text))
    conds, concl = parse_raw_clause(ts)
    if ts.peek.kind != "eof":
        raise ParseError(f"trailing input {ts.peek.text!r}", ts.peek.line, ts.peek.col)
    return type_clause(sig, label, conds, concl)


# --- specifications ----------------------------------------------------------------


@dataclass
class Specification:
    signature: Signature
    axioms: list[ConditionalEquation] = field(default_factory=list)
    lemmas: list[ConditionalEquation] = field(default_factory=list)
    conjectures: list[ConditionalEquation] = field(default_factory=list)
    precedence: Precedence = field(default_factory=Precedence)

    @property
    def sorts(self) -> list[Sort]:
        return list(self.signature.sorts.values())

    @property
    def symbols(self) -> list[Symbol]:
        return list(self.signature.symbols.values())

    def equation(self, label: str) -> ConditionalEquation:
        for c in self.axioms + self.lemmas + self.conjectures:
            if c.label == label:
                return c
        raise KeyError(label)

    def axiom(self, label: str) -> ConditionalEquation | None:
        return next((a for a in self.axioms if a.label == label), None)

    def lemma(self, label: str) -> ConditionalEquation | None:
        return next((a for a in self.lemmas if a.label == label), None)

    def goal(self, label: str) -> ConditionalEquation | None:
        return next((a for a in self.lemmas + self.conjectures if a.label == label), None)

    def without_lemmas(self) -> "Specification":
        return Specification(self.signature, list(self.axioms), [], list(self.conjectures), self.precedence)

    def digest(self) -> str:
        return hashlib.sha256(print_spec(self).encode("utf-8")).hexdigest()


def _declared_name(tok: Token, arity: int) -> str:
    name = tok.text
    stripped = name.rstrip("_")
    under = len(name) - len(stripped)
    if under and stripped:
        if under != arity:
            raise ParseError(
                f"{name}: {under} argument slot(s) marked but {arity} argument sort(s) declared", tok.line, tok.col
            )
        return stripped
    return name


def _parse_decl(ts: Stream, sig: Signature, constructor: bool) -> None:
    name_tok = ts.ident("symbol name")
    ts.expect(":")
    arg_toks = []
    while ts.peek.kind == "id":
        arg_toks.append(ts.next())
    ts.expect("->")
    res_tok = ts.ident("result sort")
    ts.expect(";")
    sorts = []
    for t in arg_toks + [res_tok]:
        s = sig.sorts.get(t.text)
        if s is None:
            raise ParseError(f"unknown sort {t.text}", t.line, t.col)
        sorts.append(s)
    name = _declared_name(name_tok, len(arg_toks))
    try:
        sig.add_symbol(Symbol(name, tuple(sorts[:-1]), sorts[-1], constructor))
    except SortError as e:
        raise ParseError(str(e), name_tok.line, name_tok.col) from None


def _at_block(ts: Stream) -> bool:
    t = ts.peek
    if t.kind == "eof":
        return True
    return t.kind == "id" and t.text in BLOCKS and ts.ahead(1).text in (":", "functions")


def _parse_labelled(ts: Stream, sig: Signature, out: list[ConditionalEquation], labels: dict) -> None:
    while not _at_block(ts):
        lt = ts.ident("label")
        ts.expect(":")
        if lt.text in labels:
            raise ParseError(f"duplicate label {lt.text}", lt.line, lt.col)
        conds, concl = parse_raw_clause(ts)
        ts.expect(";")
        eq = type_clause(sig, lt.text, conds, concl)
        labels[lt.text] = (lt.line, lt.col)
        out.append(eq)


def parse_spec(text: str) -> Specification:
    """Parse and validate a specification; raises ParseError or CycleError."""
    ts = Stream(tokenize(text))
    sig = Signature()
    spec = Specification(sig)
    labels: dict[str, tuple[int, int]] = {}
    seen: set[str] = set()
    while ts.peek.kind != "eof":
        t = ts.peek
        if not _at_block(ts):
            raise ParseError(f"unexpected {t.text!r}", t.line, t.col, tuple(b + ":" for b in BLOCKS))
        kw = ts.next().text
        if kw == "defined":
            ts.expect("functions")
        ts.expect(":")
        if kw in seen:
            raise ParseError(f"duplicate block {kw}", t.line, t.col)
        seen.add(kw)
        if kw == "sorts":
            names = []
            while ts.peek.kind == "id":
                names.append(ts.next())
            if not names:
                raise ParseError("empty sort list", ts.peek.line, ts.peek.col, ("sort name",))
            ts.expect(";")
            for n in names:
                try:
                    sig.add_sort(Sort(n.text))
                except SortError as e:
                    raise ParseError(str(e), n.line, n.col) from None
        elif kw in ("constructors", "defined"):
            while not _at_block(ts):
                _parse_decl(ts, sig, kw == "constructors")
        elif kw == "order":
            start = ts.peek
            chunk = []
            while not ts.at(";"):
                if ts.peek.kind == "eof":
                    raise ParseError("unterminated order block", start.line, start.col, (";",))
                chunk.append(ts.next().text)
            ts.next()
            try:
                spec.precedence = parse_precedence(" ".join(chunk))
            except PrecedenceSyntaxError as e:
                raise ParseError(str(e), start.line, start.col) from None
        else:
            _parse_labelled(ts, sig, getattr(spec, kw), labels)
    _validate(spec, labels)
    return spec


def _validate(spec: Specification, labels: dict) -> None:
    sig = spec.signature
    for ax in spec.axioms:
        line, col = labels.get(ax.label, (0, 0))
        lhs = ax.lhs
        if not isinstance(lhs, App) or lhs.head.constructor:
            raise ParseError(f"axiom {ax.label}: left-hand side must be rooted at a defined function", line, col)
        if not all(is_constructor_term(a) for a in lhs.args):
            raise ParseError(f"axiom {ax.label}: arguments must be constructor patterns", line, col)
        allowed = set(variables(lhs))
        for l, _ in ax.conditions:
            allowed |= set(variables(l))
        used = set(variables(ax.rhs))
        for l, r in ax.conditions:
            used |= set(variables(r))
        if not used <= allowed:
            extra = sorted(v.name for v in used - allowed)
            raise ParseError(f"axiom {ax.label}: variables {extra} not bound by the left-hand side", line, col)
    for eq in spec.axioms + spec.lemmas + spec.conjectures:
        for _, r in eq.conditions:
            if not is_constructor_term(r):
                line, col = labels.get(eq.label, (0, 0))
                raise ParseError(f"{eq.label}: condition right-hand sides must be constructor terms", line, col)
    heads = {a.lhs.head.name for a in spec.axioms}
    for f in sig.defined():
        if f.name not in heads:
            raise ParseError(f"defined function {f.name} has no axiom")
    for group in spec.precedence.equiv + spec.precedence.greater:
        for name in group:
            if name not in sig.symbols:
                raise ParseError(f"order mentions undeclared symbol {name}")
    validate_precedence(spec.precedence)


# --- printing --------------------------------------------------------------------------


def _needs_annotation(eq: ConditionalEquation) -> set[Var]:
    """Variables that never sit in an argument slot, so their sort cannot be inferred from context."""
    placed: set[Var] = set()

    def walk(t: Term) -> None:
        if isinstance(t, App):
            for a in t.args:
                if isinstance(a, Var):
                    placed.add(a)
                walk(a)

    pairs = list(eq.conditions) + [(eq.lhs, eq.rhs)]
    for l, r in pairs:
        walk(l)
        walk(r)
    # a variable opposite a symbol-rooted side gets its sort from the equation
    for l, r in pairs:
        if isinstance(l, Var) and isinstance(r, App):
            placed.add(l)
        if isinstance(r, Var) and isinstance(l, App):
            placed.add(r)
    return set(eq.variables()) - placed


def show_term(t: Term, annotate: set[Var] = frozenset()) -> str:
    if isinstance(t, Var):
        return f"{t.name}:{t.sort.name}" if t in annotate else t.name
    if not t.args:
        return t.head.name
    return f"{t.head.name}({', '.join(show_term(a, annotate) for a in t.args)})"


def show_clause(eq: ConditionalEquation) -> str:
    ann = _needs_annotation(eq)
    concl = f"{show_term(eq.lhs, ann)} = {show_term(eq.rhs, ann)}"
    if not eq.conditions:
        return concl
    conds = ", ".join(f"{show_term(l, ann)} = {show_term(r, ann)}" for l, r in eq.conditions)
    return f"{conds} => {concl}"


def _decl(f: Symbol) -> str:
    args = " ".join(s.name for s in f.arg_sorts)
    return f"  {f.name} : {args + ' ' if args else ''}-> {f.sort.name};"


def print_spec(spec: Specification) -> str:
    sig = spec.signature
    lines = ["sorts: " + " ".join(s.name for s in sig.sorts.values()) + ";", "constructors:"]
    lines += [_decl(f) for f in sig.symbols.values() if f.constructor]
    lines.append("defined functions:")
    lines += [_decl(f) for f in sig.symbols.values() if not f.constructor]
    for name in ("axioms", "lemmas", "conjectures"):
        eqs = getattr(spec, name)
        if eqs:
            lines.append(f"{name}:")
            lines += [f"  {e.label}: {show_clause(e)};" for e in eqs]
    if spec.precedence.equiv or spec.precedence.greater:
        lines.append(f"order: {spec.precedence};")
    return "\n".join(lines) + "\n"


def load_spec(path) -> Specification:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())
