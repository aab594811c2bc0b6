"""Proof certificates: records, text format, replay checker, descent report.

File format (UTF-8, one record per line, tab-separated fields)::

    CERT v1 <spec sha256>
    GOAL  <cid> <label> <clause> <measure>
    STEP  <sid> <rule> <target cid> [key=value ...]
    INST  <sid> <branch> <term>                       Generate test-set instances
    RW    <sid> <branch> <source> <loc> <pos> <dir> <subst>
    OUT   <sid> <branch> <cid> <clause> <measure>
    OBL   <sid> <kind> <measure> <measure> <comparison>
    END   <number of steps>

Terms use prefix syntax with every variable written ``name:sort``;
substitutions are ``var=term`` comma lists; positions are dot-separated
child indices (empty at the root); measures are ``{t1; t2; ...}``.

The checker recomputes every clause, measure and comparison from the
specification and never searches.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .clauses import (
    ConditionalEquation,
    Inapplicable,
    NormalizationBudget,
    Rule,
    add_condition,
    instantiate,
    is_tautology,
    rewrite_at,
    subsumes,
    unconditional,
)
from .ordering import Comparison, measure_compare, measure_of
from .syntax import ParseError, Specification, Stream, parse_raw_clause, parse_term, tokenize, type_clause
from .terms import App, Position, Term, Var, cover_patterns, depth, fresh_names, is_constructor_term, is_linear, match_at, show, subterm_at, variables

RULES = ("Generate", "RewriteGoal", "RewriteCondition", "CaseSplit", "DeleteTautology", "DeleteSubsumption")


class Reason(str, enum.Enum):
    BAD_MATCH = "BadMatch"
    BAD_MEASURE = "BadMeasure"
    ORDERING_VIOLATION = "OrderingViolation"
    DANGLING_REF = "DanglingRef"
    NON_EMPTY_FINAL_STATE = "NonEmptyFinalState"
    HASH_MISMATCH = "HashMismatch"

    def __str__(self) -> str:
        return self.value


class CertificateFormatError(ValueError):
    pass


@dataclass
class ConjectureRecord:
    id: int
    clause: ConditionalEquation
    measure: tuple


@dataclass
class RewriteRecord:
    branch: int
    source: str
    loc: str
    pos: Position
    direction: str
    subst: dict


@dataclass
class Obligation:
    kind: str  # "decrease" or "ih"
    smaller: tuple
    larger: tuple
    required: Comparison = Comparison.LESS


@dataclass
class CertStep:
    step_id: int
    rule: str
    target: int
    variable: Var | None = None
    scrutinee: Term | None = None
    source: str | None = None
    subst: dict = field(default_factory=dict)
    instances: list[Term] = field(default_factory=list)
    rewrites: list[RewriteRecord] = field(default_factory=list)
    outputs: list[tuple[int, ConjectureRecord]] = field(default_factory=list)  # (branch, record)
    obligations: list[Obligation] = field(default_factory=list)


@dataclass
class Certificate:
    spec_hash: str
    goals: list[tuple[str, ConjectureRecord]]
    steps: list[CertStep]

    @property
    def goal_labels(self) -> list[str]:
        return [label for label, _ in self.goals]


@dataclass
class Accepted:
    def __bool__(self) -> bool:
        return True


@dataclass
class Rejected:
    step_id: int | None
    reason: Reason
    detail: str = ""

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        where = f"step {self.step_id}" if self.step_id is not None else "certificate"
        return f"Rejected at {where}: {self.reason} ({self.detail})"


def usable_lemmas(spec: Specification, goal_labels: Iterable[str]) -> list[ConditionalEquation]:
    """Lemmas a proof of these goals may cite: when a goal is itself a lemma,
    only lemmas declared before it; never the goals themselves."""
    goals = set(goal_labels)
    names = [l.label for l in spec.lemmas]
    cut = min((names.index(g) for g in goals if g in names), default=len(names))
    return [l for l in spec.lemmas[:cut] if l.label not in goals]


# --- text format -------------------------------------------------------------------


def show_measure(m: Iterable[Term]) -> str:
    return "{" + "; ".join(show(t, typed=True) for t in m) + "}"


def show_subst(s: dict) -> str:
    return ",".join(f"{show(v, typed=True)}={show(t, typed=True)}" for v, t in sorted(s.items(), key=lambda kv: kv[0].name))


def show_pos(p: Position) -> str:
    return ".".join(str(i) for i in p)


def emit(cert: Certificate, path: str | Path | None = None) -> str:
    """Serialize; identical certificates give identical bytes."""
    lines = [f"CERT v1 {cert.spec_hash}"]
    for label, rec in cert.goals:
        lines.append("\t".join(["GOAL", str(rec.id), label, rec.clause.show(typed=True), show_measure(rec.measure)]))
    for st in cert.steps:
        fields = ["STEP", str(st.step_id), st.rule, str(st.target)]
        if st.variable is not None:
            fields.append(f"var={show(st.variable, typed=True)}")
        if st.scrutinee is not None:
            fields.append(f"scrutinee={show(st.scrutinee, typed=True)}")
        if st.source is not None:
            fields.append(f"source={st.source}")
            fields.append(f"subst={show_subst(st.subst)}")
        lines.append("\t".join(fields))
        for i, t in enumerate(st.instances):
            lines.append("\t".join(["INST", str(st.step_id), str(i), show(t, typed=True)]))
        for rw in st.rewrites:
            lines.append(
                "\t".join(
                    ["RW", str(st.step_id), str(rw.branch), rw.source, rw.loc, show_pos(rw.pos), rw.direction, show_subst(rw.subst)]
                )
            )
        for branch, rec in st.outputs:
            lines.append(
                "\t".join(["OUT", str(st.step_id), str(branch), str(rec.id), rec.clause.show(typed=True), show_measure(rec.measure)])
            )
        for ob in st.obligations:
            lines.append(
                "\t".join(["OBL", str(st.step_id), ob.kind, show_measure(ob.smaller), show_measure(ob.larger), ob.required.value])
            )
    lines.append(f"END\t{len(cert.steps)}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _split_top(text: str, sep: str) -> list[str]:
    out, depth_, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth_ += 1
        elif ch == ")":
            depth_ -= 1
        if ch == sep and depth_ == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return out


class _Reader:
    def __init__(self, spec: Specification):
        self.sig = spec.signature

    def term(self, text: str) -> Term:
        return parse_term(self.sig, text)

    def var(self, text: str) -> Var:
        v = self.term(text)
        if not isinstance(v, Var):
            raise CertificateFormatError(f"expected a variable, got {text}")
        return v

    def clause(self, text: str) -> ConditionalEquation:
        ts = Stream(tokenize(text))
        conds, concl = parse_raw_clause(ts)
        if ts.peek.kind != "eof":
            raise CertificateFormatError(f"trailing input in clause {text!r}")
        return type_clause(self.sig, "", conds, concl)

    def measure(self, text: str) -> tuple:
        text = text.strip()
        if not (text.startswith("{") and text.endswith("}")):
            raise CertificateFormatError(f"bad measure {text!r}")
        body = text[1:-1].strip()
        return tuple(self.term(t.strip()) for t in body.split(";")) if body else ()

    def subst(self, text: str) -> dict:
        out = {}
        if not text:
            return out
        for item in _split_top(text, ","):
            lhs, sep, rhs = item.partition("=")
            if not sep:
                raise CertificateFormatError(f"bad binding {item!r}")
            out[self.var(lhs)] = self.term(rhs)
        return out


def _pos(text: str) -> Position:
    return tuple(int(x) for x in text.split(".")) if text else ()


def parse_certificate(text: str, spec: Specification) -> Certificate:
    """Read a certificate; terms are typed against the specification's signature."""
    rd = _Reader(spec)
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or not lines[0].startswith("CERT v1 "):
        raise CertificateFormatError("missing 'CERT v1' header")
    cert = Certificate(lines[0].split()[2] if len(lines[0].split()) > 2 else "", [], [])
    steps: dict[int, CertStep] = {}
    ended = False
    try:
        for n, line in enumerate(lines[1:], 2):
            f = line.split("\t")
            kind = f[0]
            if kind == "GOAL":
                cert.goals.append((f[2], ConjectureRecord(int(f[1]), rd.clause(f[3]), rd.measure(f[4]))))
            elif kind == "STEP":
                st = CertStep(int(f[1]), f[2], int(f[3]))
                for kv in f[4:]:
                    key, _, val = kv.partition("=")
                    if key == "var":
                        st.variable = rd.var(val)
                    elif key == "scrutinee":
                        st.scrutinee = rd.term(val)
                    elif key == "source":
                        st.source = val
                    elif key == "subst":
                        st.subst = rd.subst(val)
                    else:
                        raise CertificateFormatError(f"line {n}: unknown field {key!r}")
                steps[st.step_id] = st
                cert.steps.append(st)
            elif kind in ("INST", "RW", "OUT", "OBL"):
                st = steps.get(int(f[1]))
                if st is None:
                    raise CertificateFormatError(f"line {n}: record for unknown step {f[1]}")
                if kind == "INST":
                    st.instances.append(rd.term(f[3]))
                elif kind == "RW":
                    st.rewrites.append(RewriteRecord(int(f[2]), f[3], f[4], _pos(f[5]), f[6], rd.subst(f[7])))
                elif kind == "OUT":
                    st.outputs.append((int(f[2]), ConjectureRecord(int(f[3]), rd.clause(f[4]), rd.measure(f[5]))))
                else:
                    st.obligations.append(Obligation(f[2], rd.measure(f[3]), rd.measure(f[4]), Comparison(f[5])))
            elif kind == "END":
                ended = True
            else:
                raise CertificateFormatError(f"line {n}: unknown record {kind!r}")
    except (IndexError, ValueError, ParseError) as e:
        if isinstance(e, CertificateFormatError):
            raise
        raise CertificateFormatError(str(e)) from e
    if not ended:
        raise CertificateFormatError("missing END record")
    return cert


def load_certificate(path: str | Path, spec: Specification) -> Certificate:
    return parse_certificate(Path(path).read_text(encoding="utf-8"), spec)


# --- checker ---------------------------------------------------------------------------


class _Reject(Exception):
    def __init__(self, reason: Reason, detail: str):
        self.reason = reason
        self.detail = detail


def _require(ok: bool, reason: Reason, detail: str) -> None:
    if not ok:
        raise _Reject(reason, detail)


class Checker:
    """Replays a certificate against a specification.

    Soundness rests on every conjecture instance being justified by the axioms,
    trusted lemmas and strictly smaller conjecture instances, with all
    comparisons made in a well-founded ordering on measures.
    """

    def __init__(self, spec: Specification):
        self.spec = spec
        self.prec = spec.precedence
        self.discharge_rules = unconditional([Rule(f"axiom:{a.label}", a) for a in spec.axioms])

    def check(self, cert: Certificate):
        step_id = None
        try:
            _require(cert.spec_hash == self.spec.digest(), Reason.HASH_MISMATCH, "certificate was made for another specification")
            self.lemmas = {l.label: l for l in usable_lemmas(self.spec, cert.goal_labels)}
            self.known: dict[int, ConditionalEquation] = {}
            open_ids: dict[int, None] = {}
            for label, rec in cert.goals:
                goal = self.spec.goal(label)
                _require(goal is not None, Reason.DANGLING_REF, f"no lemma or conjecture named {label}")
                _require(rec.id not in self.known, Reason.DANGLING_REF, f"conjecture id {rec.id} reused")
                _require(rec.clause.key() == goal.key(), Reason.BAD_MATCH, f"goal {label} differs from the specification")
                self._check_measure(rec)
                self.known[rec.id] = rec.clause
                open_ids[rec.id] = None
            _require(bool(cert.goals), Reason.NON_EMPTY_FINAL_STATE, "no goals")
            seen_steps = set()
            for st in cert.steps:
                step_id = st.step_id
                _require(st.step_id not in seen_steps, Reason.DANGLING_REF, f"duplicate step id {st.step_id}")
                seen_steps.add(st.step_id)
                _require(st.target in self.known, Reason.DANGLING_REF, f"unknown conjecture {st.target}")
                _require(st.target in open_ids, Reason.DANGLING_REF, f"conjecture {st.target} is not open")
                target = self.known[st.target]
                needed = self._replay(st, target)
                self._check_obligations(st, needed)
                del open_ids[st.target]
                for _, rec in st.outputs:
                    _require(rec.id not in self.known, Reason.DANGLING_REF, f"conjecture id {rec.id} reused")
                    self._check_measure(rec)
                    self.known[rec.id] = rec.clause
                    open_ids[rec.id] = None
            step_id = None
            _require(not open_ids, Reason.NON_EMPTY_FINAL_STATE, f"open conjectures remain: {sorted(open_ids)}")
        except _Reject as r:
            return Rejected(step_id, r.reason, r.detail)
        return Accepted()

    # -- helpers

    def _check_measure(self, rec: ConjectureRecord) -> None:
        _require(tuple(rec.measure) == measure_of(rec.clause), Reason.BAD_MEASURE, f"measure of conjecture {rec.id}")

    def _resolve(self, source: str, allow_ih: bool = True) -> ConditionalEquation:
        kind, _, name = source.partition(":")
        if kind == "axiom":
            eq = self.spec.axiom(name)
        elif kind == "lemma":
            eq = self.lemmas.get(name)
        elif kind == "ih":
            _require(allow_ih, Reason.BAD_MATCH, "induction hypotheses are not allowed here")
            eq = self.known.get(int(name)) if name.isdigit() else None
        else:
            eq = None
        _require(eq is not None, Reason.DANGLING_REF, f"unknown source {source}")
        return eq

    def _rewrite(self, clause, rw: RewriteRecord, context=None, allow_ih=True):
        eq = self._resolve(rw.source, allow_ih)
        _require(rw.direction in ("lr", "rl"), Reason.BAD_MATCH, f"bad direction {rw.direction}")
        _require(rw.direction == "lr" or not rw.source.startswith("axiom:"), Reason.BAD_MATCH, "axioms are used left to right")
        rule = Rule(rw.source, eq, rw.direction == "rl")
        try:
            new, s = rewrite_at(clause, rule, rw.loc, rw.pos, rw.subst, self.discharge_rules, context)
        except (Inapplicable, NormalizationBudget) as e:
            raise _Reject(Reason.BAD_MATCH, f"{rw.source} at {rw.loc}:{show_pos(rw.pos)}: {e}") from None
        ih = None
        if rw.source.startswith("ih:"):
            ih = measure_of(instantiate(eq, s))
        return new, ih

    def _outputs(self, st: CertStep) -> dict[int, ConditionalEquation]:
        out: dict[int, ConditionalEquation] = {}
        for branch, rec in st.outputs:
            _require(branch not in out, Reason.BAD_MATCH, f"two outputs for branch {branch}")
            out[branch] = rec.clause
        return out

    def _same(self, got: ConditionalEquation, claimed: ConditionalEquation | None, what: str) -> None:
        _require(claimed is not None and got.key() == claimed.key(), Reason.BAD_MATCH, f"replayed {what} differs: {got}")

    def _replay(self, st: CertStep, target: ConditionalEquation) -> list[tuple[str, tuple, tuple]]:
        """Recompute the step's outputs; return the obligations it needs."""
        _require(st.rule in RULES, Reason.BAD_MATCH, f"unknown rule {st.rule}")
        outs = self._outputs(st)
        needed: list[tuple[str, tuple, tuple]] = []
        tm = measure_of(target)
        if st.rule == "DeleteTautology":
            _require(not outs and not st.rewrites, Reason.BAD_MATCH, "deletion has no outputs")
            _require(is_tautology(target), Reason.BAD_MATCH, "not a tautology")
        elif st.rule == "DeleteSubsumption":
            _require(not outs and st.source is not None, Reason.BAD_MATCH, "subsumption needs a source and no outputs")
            eq = self._resolve(st.source)
            _require(set(st.subst) == set(eq.variables()), Reason.BAD_MATCH, "substitution domain")
            _require(subsumes(eq, target, st.subst), Reason.BAD_MATCH, f"{st.source} does not subsume the target")
            if st.source.startswith("ih:"):
                needed.append(("ih", measure_of(instantiate(eq, st.subst)), tm))
        elif st.rule in ("RewriteGoal", "RewriteCondition"):
            _require(len(st.rewrites) == 1 and set(outs) == {0}, Reason.BAD_MATCH, "exactly one rewrite and one output")
            rw = st.rewrites[0]
            goal_side = rw.loc in ("L", "R")
            _require(goal_side == (st.rule == "RewriteGoal"), Reason.BAD_MATCH, f"location {rw.loc} for {st.rule}")
            new, ih = self._rewrite(target, rw)
            self._same(new, outs.get(0), "clause")
            if ih is not None:
                needed.append(("ih", ih, tm))
            needed.append(("decrease", measure_of(new), tm))
        elif st.rule == "CaseSplit":
            s = st.scrutinee
            _require(s is not None, Reason.BAD_MATCH, "missing scrutinee")
            sig = self.spec.signature
            _require(
                isinstance(s, App) and not s.head.constructor and sig.is_boolean(s.sort),
                Reason.BAD_MATCH,
                "scrutinee must be a boolean defined-function term",
            )
            values = [App(k) for k in sig.constructors(s.sort)]
            _require(set(outs) == set(range(len(values))), Reason.BAD_MATCH, "one output per branch")
            for b, value in enumerate(values):
                clause = add_condition(target, s, value)
                for rw in (r for r in st.rewrites if r.branch == b):
                    clause, ih = self._rewrite(clause, rw, allow_ih=False)
                self._same(clause, outs[b], f"branch {b}")
                needed.append(("decrease", measure_of(clause), tm))
        elif st.rule == "Generate":
            v = st.variable
            _require(v is not None and v in target.variables(), Reason.BAD_MATCH, "generate variable must occur in the target")
            self._check_test_set(v, st.instances, target)
            _require(set(outs) == set(range(len(st.instances))), Reason.BAD_MATCH, "one output per instance")
            for b, inst in enumerate(st.instances):
                start = instantiate(target, {v: inst})
                clause = start
                for rw in (r for r in st.rewrites if r.branch == b):
                    clause, _ = self._rewrite(clause, rw, allow_ih=False)
                self._same(clause, outs[b], f"instance {b}")
                needed.append(("decrease", measure_of(clause), measure_of(start)))
        return needed

    def _check_test_set(self, v: Var, instances: list[Term], target: ConditionalEquation) -> None:
        taken = {u.name for u in target.variables()}
        for t in instances:
            _require(t.sort == v.sort and is_constructor_term(t) and is_linear(t), Reason.BAD_MATCH, f"bad instance {t}")
            _require(not ({u.name for u in variables(t)} & taken), Reason.BAD_MATCH, f"instance {t} captures a variable")
        k = max((depth(t) for t in instances), default=0)
        reps = cover_patterns(self.spec.signature, v.sort, k, fresh_names("_r"))
        for r in reps:
            hits = sum(1 for t in instances if match_at(t, r) is not None)
            _require(hits == 1, Reason.BAD_MATCH, f"test set covers {show(r)} {hits} times")

    def _check_obligations(self, st: CertStep, needed) -> None:
        for ob in st.obligations:
            _require(ob.required is Comparison.LESS, Reason.ORDERING_VIOLATION, f"obligation requires {ob.required}, not Less")
            _require(
                any((k, a, b) == (ob.kind, tuple(ob.smaller), tuple(ob.larger)) for k, a, b in needed),
                Reason.BAD_MEASURE,
                "obligation measures do not match the replayed step",
            )
        for kind, a, b in needed:
            _require(
                any((ob.kind, tuple(ob.smaller), tuple(ob.larger)) == (kind, a, b) for ob in st.obligations),
                Reason.ORDERING_VIOLATION,
                f"missing {kind} obligation",
            )
            got = measure_compare(self.prec, a, b)
            _require(got is Comparison.LESS, Reason.ORDERING_VIOLATION, f"{kind} obligation: {show_measure(a)} is {got} than {show_measure(b)}")


def check(spec: Specification, cert: Certificate):
    """Accepted() or Rejected(step_id, reason, detail)."""
    return Checker(spec).check(cert)


@dataclass
class DescentRow:
    step_id: int
    source: str
    ih_measure: tuple
    target_measure: tuple
    comparison: Comparison


def wellfoundedness_report(cert: Certificate) -> list[DescentRow]:
    """One row per induction-hypothesis use, with the compared measures."""
    rows = []
    for st in cert.steps:
        sources = [rw.source for rw in st.rewrites if rw.source.startswith("ih:")]
        if st.source and st.source.startswith("ih:"):
            sources.append(st.source)
        ih_obls = [ob for ob in st.obligations if ob.kind == "ih"]
        for src, ob in zip(sources, ih_obls):
            rows.append(DescentRow(st.step_id, src, ob.smaller, ob.larger, ob.required))
    return rows


def format_report(rows: list[DescentRow]) -> str:
    lines = ["step\tsource\tcomparison\tih measure\ttarget measure"]
    for r in rows:
        lines.append(f"{r.step_id}\t{r.source}\t{r.comparison}\t{show_measure(r.ih_measure)}\t{show_measure(r.target_measure)}")
    return "\n".join(lines) + "\n"
