"""Symbol precedence, multiset path ordering and its extension to clause measures."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .terms import App, Term, Var, occurs


class Comparison(enum.Enum):
    GREATER = "Greater"
    EQUIVALENT = "Equivalent"
    LESS = "Less"
    INCOMPARABLE = "Incomparable"

    def flip(self) -> "Comparison":
        return _FLIP[self]

    def __str__(self) -> str:
        return self.value


_FLIP = {
    Comparison.GREATER: Comparison.LESS,
    Comparison.LESS: Comparison.GREATER,
    Comparison.EQUIVALENT: Comparison.EQUIVALENT,
    Comparison.INCOMPARABLE: Comparison.INCOMPARABLE,
}

GT, EQ, LT, INC = Comparison.GREATER, Comparison.EQUIVALENT, Comparison.LESS, Comparison.INCOMPARABLE


class CycleError(ValueError):
    def __init__(self, cycle: list[tuple[str, ...]]):
        self.cycle = cycle
        shown = " > ".join("{" + ", ".join(c) + "}" for c in cycle)
        super().__init__(f"precedence cycle: {shown}")


class PrecedenceSyntaxError(ValueError):
    pass


@dataclass
class Precedence:
    """Equivalence classes of symbol names plus strict edges between them.

    ``equiv`` groups merge symbols; each ``greater`` group ``[f, g1, ..., gn]``
    states f > gi. Symbols never mentioned are singleton classes.
    """

    equiv: list[list[str]] = field(default_factory=list)
    greater: list[list[str]] = field(default_factory=list)

    def __post_init__(self):
        self._rep: dict[str, str] = {}
        for group in self.equiv:
            for name in group:
                self._union(name, group[0])
        self._edges: dict[str, set[str]] = {}
        for group in self.greater:
            if not group:
                continue
            top = self.rep(group[0])
            for name in group[1:]:
                self._edges.setdefault(top, set()).add(self.rep(name))
        self._closure: dict[str, frozenset[str]] = {}

    def _find(self, x: str) -> str:
        while self._rep.get(x, x) != x:
            x = self._rep[x]
        return x

    def _union(self, a: str, b: str) -> None:
        ra, rb = self._find(a), self._find(b)
        if ra != rb:
            # keep the lexicographically smaller representative for stability
            lo, hi = sorted((ra, rb))
            self._rep[hi] = lo

    def rep(self, name: str) -> str:
        return self._find(name)

    def classes(self) -> list[tuple[str, ...]]:
        names: dict[str, None] = {}
        for group in self.equiv + self.greater:
            for n in group:
                names.setdefault(n, None)
        by_rep: dict[str, list[str]] = {}
        for n in names:
            by_rep.setdefault(self.rep(n), []).append(n)
        return [tuple(v) for v in by_rep.values()]

    def _above(self, r: str) -> frozenset[str]:
        """Class representatives strictly below ``r``."""
        hit = self._closure.get(r)
        if hit is not None:
            return hit
        seen: set[str] = set()
        stack = list(self._edges.get(r, ()))
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            stack.extend(self._edges.get(x, ()))
        out = frozenset(seen)
        self._closure[r] = out
        return out

    def compare(self, f: str, g: str) -> Comparison:
        rf, rg = self.rep(f), self.rep(g)
        if rf == rg:
            return EQ
        if rg in self._above(rf):
            return GT
        if rf in self._above(rg):
            return LT
        return INC

    def __str__(self) -> str:
        parts = []
        if self.equiv:
            parts.append("equiv [" + ", ".join("[" + ", ".join(g) + "]" for g in self.equiv) + "]")
        if self.greater:
            parts.append("greater [" + ", ".join("[" + ", ".join(g) + "]" for g in self.greater) + "]")
        return " ".join(parts)

    def __eq__(self, other) -> bool:
        return isinstance(other, Precedence) and (self.equiv, self.greater) == (other.equiv, other.greater)


def prec_compare(p: Precedence, f, g) -> Comparison:
    return p.compare(getattr(f, "name", f), getattr(g, "name", g))


def validate_precedence(p: Precedence) -> None:
    """Raise CycleError when the strict edges between classes contain a cycle."""
    nodes = sorted(set(p._edges) | {x for v in p._edges.values() for x in v})
    state: dict[str, int] = {}
    path: list[str] = []

    def members(r: str) -> tuple[str, ...]:
        for c in p.classes():
            if p.rep(c[0]) == r:
                return c
        return (r,)

    def visit(n: str) -> None:
        state[n] = 1
        path.append(n)
        for m in sorted(p._edges.get(n, ())):
            if state.get(m) == 1:
                cyc = path[path.index(m):] + [m]
                raise CycleError([members(x) for x in cyc])
            if m not in state:
                visit(m)
        path.pop()
        state[n] = 2

    for n in nodes:
        if n not in state:
            visit(n)


_GROUPS = re.compile(r"\[\s*((?:\[[^\[\]]*\]\s*,?\s*)*)\]")


def parse_precedence(text: str) -> Precedence:
    """Parse ``equiv [[a, b], ...] greater [[c, d, ...], ...]`` (either part optional)."""
    rest = text.strip().rstrip(";").strip()
    equiv: list[list[str]] = []
    greater: list[list[str]] = []
    seen = set()
    while rest:
        m = re.match(r"(equiv|greater)\s*", rest)
        if not m:
            raise PrecedenceSyntaxError(f"expected 'equiv' or 'greater' at: {rest[:30]!r}")
        kw = m.group(1)
        if kw in seen:
            raise PrecedenceSyntaxError(f"duplicate '{kw}' section")
        seen.add(kw)
        rest = rest[m.end():]
        g = _GROUPS.match(rest)
        if not g:
            raise PrecedenceSyntaxError(f"expected [[...]] after '{kw}'")
        groups = [
            [s.strip() for s in inner.split(",") if s.strip()]
            for inner in re.findall(r"\[([^\[\]]*)\]", g.group(1))
        ]
        (equiv if kw == "equiv" else greater).extend(groups)
        rest = rest[g.end():].strip()
    return Precedence(equiv, greater)


# --- multiset path ordering --------------------------------------------------


def equivalent(p: Precedence, s: Term, t: Term) -> bool:
    """Equal up to replacing symbols by precedence-equivalent ones of equal arity."""
    if isinstance(s, Var) or isinstance(t, Var):
        return s == t
    if len(s.args) != len(t.args) or p.compare(s.head.name, t.head.name) is not EQ:
        return False
    return all(equivalent(p, a, b) for a, b in zip(s.args, t.args))


def greater(p: Precedence, s: Term, t: Term) -> bool:
    if isinstance(s, Var):
        return False
    if isinstance(t, Var):
        return occurs(t, s)
    for a in s.args:
        if equivalent(p, a, t) or greater(p, a, t):
            return True
    c = p.compare(s.head.name, t.head.name)
    if c is GT:
        return all(greater(p, s, b) for b in t.args)
    if c is EQ and len(s.args) == len(t.args):
        return _multiset_greater(p, s.args, t.args)
    return False


def _strip_equivalent(p: Precedence, a: Sequence[Term], b: Sequence[Term]) -> tuple[list[Term], list[Term]]:
    left = list(a)
    right = []
    for y in b:
        for i, x in enumerate(left):
            if equivalent(p, x, y):
                del left[i]
                break
        else:
            right.append(y)
    return left, right


def _multiset_greater(p: Precedence, a: Sequence[Term], b: Sequence[Term]) -> bool:
    left, right = _strip_equivalent(p, a, b)
    if not left:
        return False
    return all(any(greater(p, x, y) for x in left) for y in right)


def rpo_compare(p: Precedence, s: Term, t: Term) -> Comparison:
    if equivalent(p, s, t):
        return EQ
    if greater(p, s, t):
        return GT
    if greater(p, t, s):
        return LT
    return INC


# --- measures ----------------------------------------------------------------


Measure = tuple  # multiset of terms, stored in clause order


def measure_of(clause) -> Measure:
    """Both sides of every condition, then both sides of the conclusion."""
    out: list[Term] = []
    for l, r in clause.conditions:
        out.extend((l, r))
    out.extend((clause.lhs, clause.rhs))
    return tuple(out)


def measure_compare(p: Precedence, a: Iterable[Term], b: Iterable[Term]) -> Comparison:
    a, b = list(a), list(b)
    left, right = _strip_equivalent(p, a, b)
    if not left and not right:
        return EQ
    if left and all(any(greater(p, x, y) for x in left) for y in right):
        return GT
    if right and all(any(greater(p, y, x) for y in right) for x in left):
        return LT
    return INC
