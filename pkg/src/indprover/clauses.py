"""Conditional equations and the clause-level rewrite primitives.

Both the prover and the certificate checker replay rewrites through the
functions here; nothing in this module searches.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .terms import (
    App,
    Position,
    Term,
    Var,
    apply,
    match_at,
    positions,
    replace_at,
    show,
    subterm_at,
    variables,
)


class Inapplicable(Exception):
    """A rewrite, split or deletion does not apply to the given clause."""


class NormalizationBudget(RuntimeError):
    pass


@dataclass(frozen=True)
class ConditionalEquation:
    label: str
    conditions: tuple[tuple[Term, Term], ...]
    lhs: Term
    rhs: Term

    def variables(self) -> list[Var]:
        seen: dict[Var, None] = {}
        for l, r in self.conditions:
            for v in variables(l) + variables(r):
                seen.setdefault(v, None)
        for v in variables(self.lhs) + variables(self.rhs):
            seen.setdefault(v, None)
        return list(seen)

    def sides(self) -> list[tuple[str, Term]]:
        out = []
        for i, (l, r) in enumerate(self.conditions):
            out.append((f"C{i}l", l))
            out.append((f"C{i}r", r))
        out.append(("L", self.lhs))
        out.append(("R", self.rhs))
        return out

    def key(self) -> tuple:
        return (self.conditions, self.lhs, self.rhs)

    def show(self, typed: bool = False) -> str:
        concl = f"{show(self.lhs, typed)} = {show(self.rhs, typed)}"
        if not self.conditions:
            return concl
        conds = ", ".join(f"{show(l, typed)} = {show(r, typed)}" for l, r in self.conditions)
        return f"{conds} => {concl}"

    def __str__(self) -> str:
        return self.show()


def equation(label: str, lhs: Term, rhs: Term, conditions: Iterable[tuple[Term, Term]] = ()) -> ConditionalEquation:
    return ConditionalEquation(label, tuple(tuple(c) for c in conditions), lhs, rhs)


def instantiate(c: ConditionalEquation, s: Mapping[Var, Term]) -> ConditionalEquation:
    return ConditionalEquation(
        c.label,
        tuple((apply(s, l), apply(s, r)) for l, r in c.conditions),
        apply(s, c.lhs),
        apply(s, c.rhs),
    )


# --- locations ----------------------------------------------------------------
# "L"/"R" name the conclusion sides, "C<i>l"/"C<i>r" the sides of condition i.


def side(c: ConditionalEquation, loc: str) -> Term:
    if loc == "L":
        return c.lhs
    if loc == "R":
        return c.rhs
    i, which = _cond_loc(c, loc)
    return c.conditions[i][0 if which == "l" else 1]


def with_side(c: ConditionalEquation, loc: str, t: Term) -> ConditionalEquation:
    if loc == "L":
        return replace(c, lhs=t)
    if loc == "R":
        return replace(c, rhs=t)
    i, which = _cond_loc(c, loc)
    conds = list(c.conditions)
    l, r = conds[i]
    conds[i] = (t, r) if which == "l" else (l, t)
    return replace(c, conditions=tuple(conds))


def _cond_loc(c: ConditionalEquation, loc: str) -> tuple[int, str]:
    if len(loc) < 3 or loc[0] != "C" or loc[-1] not in "lr" or not loc[1:-1].isdigit():
        raise Inapplicable(f"bad location {loc!r}")
    i = int(loc[1:-1])
    if i >= len(c.conditions):
        raise Inapplicable(f"no condition {i}")
    return i, loc[-1]


def condition_locations(c: ConditionalEquation) -> list[str]:
    return [loc for i in range(len(c.conditions)) for loc in (f"C{i}l", f"C{i}r")]


def drop_trivial_conditions(c: ConditionalEquation) -> ConditionalEquation:
    kept = tuple((l, r) for l, r in c.conditions if l != r)
    if len(kept) == len(c.conditions):
        return c
    return replace(c, conditions=kept)


def add_condition(c: ConditionalEquation, l: Term, r: Term) -> ConditionalEquation:
    return replace(c, conditions=c.conditions + ((l, r),))


# --- rules ---------------------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    """An equation used as a rewrite rule in one direction.

    ``source`` is ``axiom:<label>``, ``lemma:<label>`` or ``ih:<conjecture id>``.
    """

    source: str
    eq: ConditionalEquation
    reverse: bool = False

    @property
    def lhs(self) -> Term:
        return self.eq.rhs if self.reverse else self.eq.lhs

    @property
    def rhs(self) -> Term:
        return self.eq.lhs if self.reverse else self.eq.rhs

    @property
    def direction(self) -> str:
        return "rl" if self.reverse else "lr"


def unconditional(rules: Sequence[Rule]) -> list[Rule]:
    return [r for r in rules if not r.eq.conditions]


def normalize(t: Term, rules: Sequence[Rule], budget: int = 10_000) -> Term:
    """Innermost normal form under unconditional rules, applied left to right."""
    steps = [0]
    by_head: dict[str, list[Rule]] = {}
    for r in rules:
        if isinstance(r.lhs, App) and not r.eq.conditions:
            by_head.setdefault(r.lhs.head.name, []).append(r)

    def norm(u: Term) -> Term:
        while True:
            if isinstance(u, Var):
                return u
            if u.args:
                u = App(u.head, tuple(norm(a) for a in u.args))
            for r in by_head.get(u.head.name, ()):
                s = match_at(r.lhs, u)
                if s is not None:
                    steps[0] += 1
                    if steps[0] > budget:
                        raise NormalizationBudget(f"normalization exceeded {budget} steps")
                    u = apply(s, r.rhs)
                    break
            else:
                return u

    return norm(t)


def discharged(cond: tuple[Term, Term], clause: ConditionalEquation, rules: Sequence[Rule]) -> bool:
    """A rule condition holds in the context of ``clause``.

    True when both sides share a normal form under ``rules``, or when the
    normalized condition occurs among the clause's normalized conditions.
    """
    a, b = normalize(cond[0], rules), normalize(cond[1], rules)
    if a == b:
        return True
    for l, r in clause.conditions:
        nl, nr = normalize(l, rules), normalize(r, rules)
        if (nl, nr) == (a, b) or (nl, nr) == (b, a):
            return True
    return False


def rewrite_at(
    clause: ConditionalEquation,
    rule: Rule,
    loc: str,
    pos: Position,
    subst: Mapping[Var, Term] | None,
    discharge_rules: Sequence[Rule],
    context: ConditionalEquation | None = None,
) -> tuple[ConditionalEquation, dict]:
    """Replace the instance of ``rule.lhs`` at (loc, pos) by the rule's rhs.

    With ``subst`` given the instance must be exact, otherwise it is found by
    matching. Rule conditions must be discharged against ``context`` (the
    clause itself by default). Trivial conditions are dropped afterwards.
    """
    try:
        target = subterm_at(side(clause, loc), pos)
    except (ValueError, IndexError) as e:
        raise Inapplicable(str(e)) from None
    s = match_at(rule.lhs, target, subst) if subst is None else dict(subst)
    if s is None:
        raise Inapplicable(f"{show(rule.lhs)} does not match {show(target)}")
    if subst is not None:
        needed = set(variables(rule.lhs))
        if set(s) != needed or apply(s, rule.lhs) != target:
            raise Inapplicable(f"substitution does not map {show(rule.lhs)} to {show(target)}")
    free = set(rule.eq.variables()) - set(s)
    if free:
        raise Inapplicable(f"rule {rule.source} has unbound variables {sorted(v.name for v in free)}")
    ctx = clause if context is None else context
    for cl, cr in rule.eq.conditions:
        if not discharged((apply(s, cl), apply(s, cr)), ctx, discharge_rules):
            raise Inapplicable(f"condition {show(apply(s, cl))} = {show(apply(s, cr))} not discharged")
    new = with_side(clause, loc, replace_at(side(clause, loc), pos, apply(s, rule.rhs)))
    return drop_trivial_conditions(new), s


# --- deletion criteria -----------------------------------------------------------


def constructor_clash(a: Term, b: Term) -> bool:
    """Distinct constructor symbols at some common position (never equal under free constructors)."""
    if isinstance(a, Var) or isinstance(b, Var):
        return False
    if not (a.head.constructor and b.head.constructor):
        return False
    if a.head.name != b.head.name:
        return True
    return any(constructor_clash(x, y) for x, y in zip(a.args, b.args))


def is_tautology(c: ConditionalEquation) -> bool:
    if c.lhs == c.rhs:
        return True
    for l, r in c.conditions:
        if constructor_clash(l, r):
            return True
    for i, (l1, r1) in enumerate(c.conditions):
        for l2, r2 in c.conditions[i + 1:]:
            if l1 == l2 and constructor_clash(r1, r2):
                return True
    return False


def subsumes(general: ConditionalEquation, c: ConditionalEquation, s: Mapping[Var, Term]) -> bool:
    """apply(s, general) equals c up to extra conditions in c and orientation of equations."""
    inst = instantiate(general, s)
    if (inst.lhs, inst.rhs) not in ((c.lhs, c.rhs), (c.rhs, c.lhs)):
        return False
    have = set(c.conditions) | {(r, l) for l, r in c.conditions}
    return all(cond in have for cond in inst.conditions)


def find_subsumption(general: ConditionalEquation, c: ConditionalEquation) -> dict | None:
    """Search a substitution making ``general`` subsume ``c``."""
    for gl, gr in ((general.lhs, general.rhs), (general.rhs, general.lhs)):
        s = match_at(gl, c.lhs)
        if s is not None:
            s = match_at(gr, c.rhs, s)
        if s is None:
            continue
        found = _match_conditions(list(general.conditions), c, s)
        if found is not None:
            return found
    return None


def _match_conditions(conds, c: ConditionalEquation, s: dict) -> dict | None:
    if not conds:
        return s
    (l, r), rest = conds[0], conds[1:]
    for cl, cr in c.conditions:
        for a, b in ((cl, cr), (cr, cl)):
            s2 = match_at(l, a, s)
            if s2 is not None:
                s2 = match_at(r, b, s2)
            if s2 is not None:
                out = _match_conditions(rest, c, s2)
                if out is not None:
                    return out
    return None


def locations(c: ConditionalEquation, include_conditions: bool = True, include_goal: bool = True) -> list[str]:
    out = condition_locations(c) if include_conditions else []
    if include_goal:
        out += ["L", "R"]
    return out


def redex_positions(c: ConditionalEquation, loc: str) -> list[Position]:
    return positions(side(c, loc))


def rename_apart(c: ConditionalEquation, taken: Iterable[str], prefix: str = "v") -> ConditionalEquation:
    """Rename the clause's variables so none collide with ``taken``."""
    taken = set(taken)
    s = {}
    k = 1
    for v in c.variables():
        if v.name in taken:
            while f"{prefix}{k}" in taken:
                k += 1
            s[v] = Var(f"{prefix}{k}", v.sort)
            taken.add(f"{prefix}{k}")
    return instantiate(c, s) if s else c
