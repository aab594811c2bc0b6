"""The implicit-induction proof loop.

Open conjectures are processed first-in first-out. Each one is closed by
the first rule that applies, tried in this order:

1. tautology deletion
2. subsumption by an axiom, a lemma or a smaller conjecture instance
3. rewriting a condition (axioms, lemmas, then conjectures)
4. rewriting the conclusion (axioms, lemmas, then conjectures)
5. case split on the undecided condition of a conditional axiom
6. generate: instantiate an induction variable with a test set and simplify

Within one rule, candidates are ordered by rule declaration order, then
location (conditions before the conclusion), then leftmost-innermost
position. Every conjecture ever created may serve as an induction
hypothesis, provided its instance is strictly smaller than the clause it
is applied to.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .certificate import (
    CertStep,
    Certificate,
    ConjectureRecord,
    Obligation,
    RewriteRecord,
    usable_lemmas,
)
from .clauses import (
    ConditionalEquation,
    Inapplicable,
    NormalizationBudget,
    Rule,
    add_condition,
    discharged,
    find_subsumption,
    instantiate,
    is_tautology,
    locations,
    normalize,
    rewrite_at,
    side,
    subsumes,
    unconditional,
)
from .ordering import LT, greater, measure_compare, measure_of
from .syntax import Specification
from .terms import (
    App,
    Position,
    Sort,
    Term,
    Var,
    apply,
    cover_patterns,
    depth,
    enumerate_ground,
    match_at,
    positions,
    subterm_at,
    variables,
)


@dataclass
class Strategy:
    max_steps: int = 10_000
    induction_priorities: Sequence[str] | None = None
    test_set_depth: int | None = None  # overrides the depth read off the axioms
    max_generate_depth: int = 4  # nested Generate steps along one branch
    counterexample_depth: int = 3
    simplify_budget: int = 1_000

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass
class Conjecture:
    id: int
    clause: ConditionalEquation
    parent: tuple[int, str] | None = None
    generation: int = 0

    def record(self) -> ConjectureRecord:
        return ConjectureRecord(self.id, self.clause, measure_of(self.clause))


@dataclass
class TestSet:
    __test__ = False  # not a pytest class

    sort: Sort
    instances: list[Term]


@dataclass
class Failure:
    reason: str  # "budget", "stuck" or "counterexample"
    message: str
    goals: list[str]
    steps: int
    conjecture: Conjecture | None = None
    counterexample: dict | None = None

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        return f"{self.reason}: {self.message}"


class CaseSplitError(TypeError):
    pass


# --- test sets and induction variables -------------------------------------------------


def pattern_depth(spec: Specification, sort: Sort) -> int:
    """Deepest constructor pattern of this sort among axiom arguments (at least 1)."""
    d = 1
    for ax in spec.axioms:
        for a in ax.lhs.args:
            if a.sort == sort:
                d = max(d, depth(a))
    return d


def compute_test_set(spec: Specification, sort: Sort, depth_: int | None = None, fresh: Iterator[str] | None = None) -> TestSet:
    d = pattern_depth(spec, sort) if depth_ is None else depth_
    names = fresh if fresh is not None else (f"n{k}" if k > 1 else "n" for k in itertools.count(1))
    return TestSet(sort, cover_patterns(spec.signature, sort, d, names))


def matched_arguments(spec: Specification) -> dict[str, set[int]]:
    """For each defined symbol, the argument indices some axiom matches on."""
    out: dict[str, set[int]] = {}
    for ax in spec.axioms:
        for i, a in enumerate(ax.lhs.args):
            if isinstance(a, App):
                out.setdefault(ax.lhs.head.name, set()).add(i)
    return out


def select_induction_variables(c: ConditionalEquation, spec: Specification, st: Strategy | None = None) -> list[Var]:
    """Variables below a pattern-matched argument of a defined symbol.

    Ordered by first occurrence (conditions, then conclusion); with
    induction priorities, variables under higher-priority symbols come first.
    """
    matched = matched_arguments(spec)
    found: dict[Var, set[str]] = {}

    def walk(t: Term, above: frozenset[str]) -> None:
        if isinstance(t, Var):
            if above:
                found.setdefault(t, set()).update(above)
            return
        idx = matched.get(t.head.name, ())
        for i, a in enumerate(t.args):
            walk(a, above | {t.head.name} if i in idx else above)

    for _, t in c.sides():
        walk(t, frozenset())
    order = list(found)
    prio = list(st.induction_priorities or []) if st else []
    if prio:

        def rank(v: Var) -> int:
            return min((prio.index(f) for f in found[v] if f in prio), default=len(prio))

        order.sort(key=rank)
    return order


# --- ground evaluation for counterexamples ---------------------------------------------


class GroundEvaluator:
    """Evaluates ground terms with the axioms read as a conditional program."""

    def __init__(self, spec: Specification, budget: int = 20_000):
        self.by_head: dict[str, list[ConditionalEquation]] = {}
        for ax in spec.axioms:
            self.by_head.setdefault(ax.lhs.head.name, []).append(ax)
        self.budget = budget
        self.memo: dict[Term, Term] = {}

    def evaluate(self, t: Term) -> Term:
        self._steps = 0
        return self._eval(t)

    def _eval(self, t: Term) -> Term:
        hit = self.memo.get(t)
        if hit is not None:
            return hit
        if isinstance(t, Var):
            raise ValueError(f"cannot evaluate open term containing {t.name}")
        u = App(t.head, tuple(self._eval(a) for a in t.args))
        if not t.head.constructor:
            self._steps += 1
            if self._steps > self.budget:
                raise NormalizationBudget("ground evaluation budget exceeded")
            u = self._unfold(u)
        self.memo[t] = u
        return u

    def _unfold(self, t: App) -> Term:
        for ax in self.by_head.get(t.head.name, ()):
            s = match_at(ax.lhs, t)
            if s is None:
                continue
            for cl, cr in ax.conditions:
                s = match_at(cr, self._eval(apply(s, cl)), s)
                if s is None:
                    break
            else:
                return self._eval(apply(s, ax.rhs))
        raise ValueError(f"no axiom applies to {t}")

    def holds(self, c: ConditionalEquation) -> bool:
        for l, r in c.conditions:
            if self._eval(l) != self._eval(r):
                return True
        return self._eval(c.lhs) == self._eval(c.rhs)


def find_counterexample(spec: Specification, c: ConditionalEquation, max_depth: int, evaluator: GroundEvaluator | None = None) -> dict | None:
    """A ground substitution (constructor terms up to ``max_depth``) falsifying ``c``."""
    ev = evaluator or GroundEvaluator(spec)
    vs = c.variables()
    pools = [enumerate_ground(spec.signature, v.sort, max_depth) for v in vs]
    for combo in itertools.product(*pools):
        s = dict(zip(vs, combo))
        try:
            ev._steps = 0
            ok = ev.holds(instantiate(c, s))
        except (NormalizationBudget, ValueError):
            continue
        if not ok:
            return s
    return None


# --- single-step operations ------------------------------------------------------------


def _discharge_rules(spec: Specification) -> list[Rule]:
    return unconditional([Rule(f"axiom:{a.label}", a) for a in spec.axioms])


def generate(c: ConditionalEquation, v: Var, ts: TestSet, spec: Specification | None = None) -> list[ConditionalEquation]:
    """The clause instantiated with each test-set instance for ``v``."""
    if v not in c.variables():
        raise Inapplicable(f"{v.name} does not occur in the clause")
    return [instantiate(c, {v: t}) for t in ts.instances]


def _rewrite(spec, clause, rule_eq, loc, pos, subst, ih, reverse):
    rule = Rule("ih:0" if ih else "rule", rule_eq, reverse)
    new, s = rewrite_at(clause, rule, loc, pos, subst, _discharge_rules(spec))
    if ih and measure_compare(spec.precedence, measure_of(instantiate(rule_eq, s)), measure_of(clause)) is not LT:
        raise Inapplicable("induction hypothesis instance is not smaller than the clause")
    return new


def rewrite_goal(
    spec: Specification,
    c: ConditionalEquation,
    rule: ConditionalEquation,
    pos: Position = (),
    subst: dict | None = None,
    side_: str = "L",
    ih: bool = False,
    reverse: bool = False,
) -> ConditionalEquation:
    if side_ not in ("L", "R"):
        raise Inapplicable(f"bad conclusion side {side_!r}")
    return _rewrite(spec, c, rule, side_, tuple(pos), subst, ih, reverse)


def rewrite_condition(
    spec: Specification,
    c: ConditionalEquation,
    index: int,
    rule: ConditionalEquation,
    pos: Position = (),
    subst: dict | None = None,
    side_: str = "l",
    ih: bool = False,
    reverse: bool = False,
) -> ConditionalEquation:
    return _rewrite(spec, c, rule, f"C{index}{side_}", tuple(pos), subst, ih, reverse)


def case_split(spec: Specification, c: ConditionalEquation, scrutinee: Term) -> tuple[ConditionalEquation, ConditionalEquation]:
    sig = spec.signature
    if not isinstance(scrutinee, App) or scrutinee.head.constructor:
        raise CaseSplitError(f"{scrutinee} is not a defined-function term")
    if not sig.is_boolean(scrutinee.sort):
        raise CaseSplitError(f"{scrutinee} has non-boolean sort {scrutinee.sort}")
    yes, no = (App(k) for k in sig.constructors(scrutinee.sort))
    return add_condition(c, scrutinee, yes), add_condition(c, scrutinee, no)


def delete(
    c: ConditionalEquation,
    by: ConditionalEquation | None = None,
    subst: dict | None = None,
    strict_precedence=None,
) -> None:
    """Succeed silently when ``c`` may be removed; raise Inapplicable otherwise.

    Without ``by`` the clause must be a tautology. With ``by`` it must be
    subsumed by that equation; ``strict_precedence`` marks ``by`` as an
    induction hypothesis whose instance must be smaller than ``c``.
    """
    if by is None:
        if not is_tautology(c):
            raise Inapplicable("not a tautology")
        return
    s = subst if subst is not None else find_subsumption(by, c)
    if s is None or not subsumes(by, c, s):
        raise Inapplicable(f"{by.label or 'equation'} does not subsume the clause")
    if strict_precedence is not None:
        if measure_compare(strict_precedence, measure_of(instantiate(by, s)), measure_of(c)) is not LT:
            raise Inapplicable("induction hypothesis instance is not smaller than the clause")


# --- the prover ------------------------------------------------------------------------


def _oriented_rules(source: str, eq: ConditionalEquation, both_ways: bool) -> list[Rule]:
    out = []
    bound = set(variables(eq.lhs))
    if isinstance(eq.lhs, App) and set(eq.variables()) <= bound:
        out.append(Rule(source, eq))
    if both_ways and isinstance(eq.rhs, App) and set(eq.variables()) <= set(variables(eq.rhs)):
        out.append(Rule(source, eq, True))
    return out


class _RuleIndex:
    """Rules in priority order, looked up by the head symbol of their left-hand side."""

    def __init__(self, rules: Sequence[Rule] = ()):
        self.rules: list[Rule] = []
        self.by_head: dict[str, list[tuple[int, Rule]]] = {}
        for r in rules:
            self.add(r)

    def add(self, r: Rule) -> None:
        self.by_head.setdefault(r.lhs.head.name, []).append((len(self.rules), r))
        self.rules.append(r)


@dataclass
class _Found:
    rule: Rule
    loc: str
    pos: Position
    subst: dict
    clause: ConditionalEquation
    ih_measure: tuple | None = None


class Prover:
    def __init__(self, spec: Specification, strategy: Strategy | None = None, goals: Sequence[str] | None = None):
        self.spec = spec
        self.st = strategy or Strategy()
        self.prec = spec.precedence
        self.goal_labels = list(goals) if goals is not None else [c.label for c in spec.conjectures]
        for g in self.goal_labels:
            if spec.goal(g) is None:
                raise KeyError(f"no lemma or conjecture named {g}")
        self.axioms = _RuleIndex(r for a in spec.axioms for r in _oriented_rules(f"axiom:{a.label}", a, False))
        self.lemmas = _RuleIndex(
            r for l in usable_lemmas(spec, self.goal_labels) for r in _oriented_rules(f"lemma:{l.label}", l, True)
        )
        self.lemma_eqs = usable_lemmas(spec, self.goal_labels)
        self.simplifiers = _RuleIndex(self.axioms.rules + self.lemmas.rules)
        self.conditional_axioms = [r for r in self.axioms.rules if r.eq.conditions]
        self.discharge = unconditional(self.axioms.rules)
        self.hyps = _RuleIndex()
        self.conjectures: dict[int, Conjecture] = {}
        self.evaluator = GroundEvaluator(spec)
        self._next_var = 1
        self._next_id = 1
        self._next_step = 1

    # -- bookkeeping

    def _new_conjecture(self, clause: ConditionalEquation, parent=None, generation: int = 0) -> Conjecture:
        c = Conjecture(self._next_id, ConditionalEquation("", clause.conditions, clause.lhs, clause.rhs), parent, generation)
        self._next_id += 1
        self.conjectures[c.id] = c
        for r in _oriented_rules(f"ih:{c.id}", c.clause, True):
            self.hyps.add(r)
        return c

    def _fresh(self, taken: set[str]) -> Iterator[str]:
        while True:
            name = f"u{self._next_var}"
            self._next_var += 1
            if name not in taken:
                yield name

    # -- search primitives

    def _candidates(self, clause: ConditionalEquation, index: _RuleIndex, locs: Sequence[str]):
        cands = []
        for li, loc in enumerate(locs):
            t = side(clause, loc)
            for pi, pos in enumerate(positions(t)):
                sub = subterm_at(t, pos)
                if isinstance(sub, App):
                    for ri, r in index.by_head.get(sub.head.name, ()):
                        cands.append((ri, li, pi, r, loc, pos, sub))
        cands.sort(key=lambda x: x[:3])
        return cands

    def _find_rewrite(self, clause, index: _RuleIndex, locs, ih: bool = False) -> _Found | None:
        cm = measure_of(clause)
        for _, _, _, r, loc, pos, sub in self._candidates(clause, index, locs):
            s = match_at(r.lhs, sub)
            if s is None:
                continue
            if not greater(self.prec, sub, apply(s, r.rhs)):
                continue
            ihm = None
            if ih:
                ihm = measure_of(instantiate(r.eq, s))
                if measure_compare(self.prec, ihm, cm) is not LT:
                    continue
            try:
                new, _ = rewrite_at(clause, r, loc, pos, s, self.discharge)
            except (Inapplicable, NormalizationBudget):
                continue
            if measure_compare(self.prec, measure_of(new), cm) is not LT:
                continue
            return _Found(r, loc, pos, s, new, ihm)
        return None

    def _rewrite_record(self, f: _Found, branch: int = 0) -> RewriteRecord:
        return RewriteRecord(branch, f.rule.source, f.loc, f.pos, f.rule.direction, dict(f.subst))

    # -- rules

    def _try_tautology(self, c: Conjecture) -> CertStep | None:
        if is_tautology(c.clause):
            return CertStep(0, "DeleteTautology", c.id)
        return None

    def _try_subsumption(self, c: Conjecture) -> CertStep | None:
        cm = measure_of(c.clause)
        sources = [(f"axiom:{a.label}", a, False) for a in self.spec.axioms]
        sources += [(f"lemma:{l.label}", l, False) for l in self.lemma_eqs]
        sources += [(f"ih:{k}", h.clause, True) for k, h in sorted(self.conjectures.items())]
        heads = {_head(c.clause.lhs), _head(c.clause.rhs)}
        for src, eq, ih in sources:
            if _head(eq.lhs) not in heads and _head(eq.rhs) not in heads:
                continue
            s = find_subsumption(eq, c.clause)
            if s is None:
                continue
            st = CertStep(0, "DeleteSubsumption", c.id, source=src, subst=s)
            if ih:
                ihm = measure_of(instantiate(eq, s))
                if measure_compare(self.prec, ihm, cm) is not LT:
                    continue
                st.obligations.append(Obligation("ih", ihm, cm))
            return st
        return None

    def _try_rewrite(self, c: Conjecture, conditions: bool) -> CertStep | None:
        locs = locations(c.clause, include_conditions=conditions, include_goal=not conditions)
        if not locs:
            return None
        for index, ih in ((self.axioms, False), (self.lemmas, False), (self.hyps, True)):
            f = self._find_rewrite(c.clause, index, locs, ih)
            if f is None:
                continue
            out = self._new_conjecture(f.clause, (c.id, "rewrite"), c.generation)
            st = CertStep(0, "RewriteCondition" if conditions else "RewriteGoal", c.id)
            st.rewrites.append(self._rewrite_record(f))
            st.outputs.append((0, out.record()))
            if f.ih_measure is not None:
                st.obligations.append(Obligation("ih", f.ih_measure, measure_of(c.clause)))
            st.obligations.append(Obligation("decrease", measure_of(f.clause), measure_of(c.clause)))
            return st
        return None

    def _try_case_split(self, c: Conjecture) -> CertStep | None:
        if not self.conditional_axioms:
            return None
        sig = self.spec.signature
        clause = c.clause
        cm = measure_of(clause)
        index = _RuleIndex(self.conditional_axioms)
        for _, _, _, r, loc, pos, sub in self._candidates(clause, index, locations(clause)):
            s = match_at(r.lhs, sub)
            if s is None or not greater(self.prec, sub, apply(s, r.rhs)):
                continue
            scrut = self._undecided_condition(r, s, clause)
            if scrut is None:
                continue
            branches = []
            for b, k in enumerate(sig.constructors(scrut.sort)):
                split = add_condition(clause, scrut, App(k))
                f = self._rewrite_at(split, loc, pos)
                if f is None or measure_compare(self.prec, measure_of(f.clause), cm) is not LT:
                    break
                branches.append(f)
            else:
                st = CertStep(0, "CaseSplit", c.id, scrutinee=scrut)
                for b, f in enumerate(branches):
                    out = self._new_conjecture(f.clause, (c.id, "case"), c.generation)
                    st.rewrites.append(self._rewrite_record(f, b))
                    st.outputs.append((b, out.record()))
                    st.obligations.append(Obligation("decrease", measure_of(f.clause), cm))
                return st
        return None

    def _undecided_condition(self, r: Rule, s: dict, clause: ConditionalEquation) -> Term | None:
        sig = self.spec.signature
        for cl, cr in r.eq.conditions:
            cond = (apply(s, cl), apply(s, cr))
            try:
                if discharged(cond, clause, self.discharge):
                    continue
                scrut = normalize(cond[0], self.discharge)
            except NormalizationBudget:
                return None
            if isinstance(scrut, App) and not scrut.head.constructor and sig.is_boolean(scrut.sort):
                return scrut
            return None
        return None

    def _rewrite_at(self, clause: ConditionalEquation, loc: str, pos: Position) -> _Found | None:
        sub = subterm_at(side(clause, loc), pos)
        if not isinstance(sub, App):
            return None
        for _, r in self.simplifiers.by_head.get(sub.head.name, ()):
            s = match_at(r.lhs, sub)
            if s is None or not greater(self.prec, sub, apply(s, r.rhs)):
                continue
            try:
                new, _ = rewrite_at(clause, r, loc, pos, s, self.discharge)
            except (Inapplicable, NormalizationBudget):
                continue
            return _Found(r, loc, pos, s, new)
        return None

    def _try_generate(self, c: Conjecture) -> CertStep | None:
        if c.generation >= self.st.max_generate_depth:
            return None
        clause = c.clause
        taken = {v.name for v in clause.variables()}
        for v in select_induction_variables(clause, self.spec, self.st):
            saved = self._next_var
            ts = compute_test_set(self.spec, v.sort, self.st.test_set_depth, self._fresh(taken))
            branches = []
            for t in ts.instances:
                start = instantiate(clause, {v: t})
                cur, found = start, []
                while len(found) < self.st.simplify_budget:
                    f = self._find_rewrite(cur, self.simplifiers, locations(cur))
                    if f is None:
                        break
                    found.append(f)
                    cur = f.clause
                if not found or measure_compare(self.prec, measure_of(cur), measure_of(start)) is not LT:
                    break
                branches.append((start, found, cur))
            else:
                st = CertStep(0, "Generate", c.id, variable=v, instances=list(ts.instances))
                for b, (start, found, cur) in enumerate(branches):
                    out = self._new_conjecture(cur, (c.id, "generate"), c.generation + 1)
                    st.rewrites.extend(self._rewrite_record(f, b) for f in found)
                    st.outputs.append((b, out.record()))
                    st.obligations.append(Obligation("decrease", measure_of(cur), measure_of(start)))
                return st
            self._next_var = saved
        return None

    # -- main loop

    def _step(self, c: Conjecture) -> CertStep | None:
        return (
            self._try_tautology(c)
            or self._try_subsumption(c)
            or self._try_rewrite(c, conditions=True)
            or self._try_rewrite(c, conditions=False)
            or self._try_case_split(c)
            or self._try_generate(c)
        )

    def _refute(self, c: Conjecture) -> dict | None:
        if self.st.counterexample_depth < 0:
            return None
        return find_counterexample(self.spec, c.clause, self.st.counterexample_depth, self.evaluator)

    def run(self) -> Certificate | Failure:
        goals = []
        queue: deque[Conjecture] = deque()
        for label in self.goal_labels:
            c = self._new_conjecture(self.spec.goal(label))
            goals.append((label, c.record()))
            queue.append(c)
        steps: list[CertStep] = []

        def fail(reason, message, conj=None, cex=None):
            return Failure(reason, message, self.goal_labels, len(steps), conj, cex)

        for c in queue:
            cex = self._refute(c)
            if cex is not None:
                return fail("counterexample", f"conjecture {c.id} is false", c, cex)
        while queue:
            if len(steps) >= self.st.max_steps:
                return fail("budget", f"step budget of {self.st.max_steps} exhausted with {len(queue)} open conjectures")
            c = queue.popleft()
            st = self._step(c)
            if st is None:
                why = "no rule applies"
                if c.generation >= self.st.max_generate_depth:
                    why = f"generate depth limit {self.st.max_generate_depth} reached and no other rule applies"
                return fail("stuck", f"{why} to conjecture {c.id}: {c.clause}", c)
            st.step_id = self._next_step
            self._next_step += 1
            steps.append(st)
            for _, rec in st.outputs:
                out = self.conjectures[rec.id]
                cex = self._refute(out)
                if cex is not None:
                    return fail("counterexample", f"conjecture {out.id} is false", out, cex)
                queue.append(out)
        return Certificate(self.spec.digest(), goals, steps)


def _head(t: Term) -> str | None:
    return t.head.name if isinstance(t, App) else None


def prove(spec: Specification, strategy: Strategy | None = None, goals: Sequence[str] | None = None) -> Certificate | Failure:
    """Prove the given lemma or conjecture labels (all conjectures by default)."""
    return Prover(spec, strategy, goals).run()
