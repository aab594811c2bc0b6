import itertools
import random

import pytest

from conftest import ground_terms
from indprover.ordering import (
    Comparison,
    CycleError,
    Precedence,
    measure_compare,
    measure_of,
    parse_precedence,
    prec_compare,
    rpo_compare,
    validate_precedence,
)
from indprover.terms import App, Var, apply, positions, replace_at, subterm_at

GT, EQ, LT, INC = Comparison.GREATER, Comparison.EQUIVALENT, Comparison.LESS, Comparison.INCOMPARABLE


# --- an independent reference: MPO written straight from the textbook definition --------
# s >mpo t iff
#   (a) some argument s_i equals (up to equivalence) or exceeds t, or
#   (b) head(s) > head(t) and s exceeds every argument of t, or
#   (c) head(s) ~ head(t) and args(s) >>mul args(t)
# with >>mul the Dershowitz-Manna extension, searched exhaustively below.


def ref_equiv(p, s, t):
    if isinstance(s, Var) or isinstance(t, Var):
        return s == t
    return (
        p.compare(s.head.name, t.head.name) is EQ
        and len(s.args) == len(t.args)
        and all(ref_equiv(p, a, b) for a, b in zip(s.args, t.args))
    )


def ref_gt(p, s, t):
    if isinstance(s, Var):
        return False
    if any(ref_equiv(p, a, t) or ref_gt(p, a, t) for a in s.args):
        return True
    if isinstance(t, Var):
        return False
    c = p.compare(s.head.name, t.head.name)
    if c is GT:
        return all(ref_gt(p, s, b) for b in t.args)
    if c is EQ and len(s.args) == len(t.args):
        return dm_greater(p, list(s.args), list(t.args), ref_gt, ref_equiv)
    return False


def _equiv_matching(p, xs, ys, eqv):
    if len(xs) != len(ys):
        return False
    return any(all(eqv(p, a, b) for a, b in zip(xs, perm)) for perm in itertools.permutations(ys))


def dm_greater(p, m, n, gt, eqv):
    """M >mul N iff N = (M - X) + Y for some non-empty X with every y in Y below some x in X."""
    idx_m = range(len(m))
    for k in range(1, len(m) + 1):
        for xi in itertools.combinations(idx_m, k):
            x = [m[i] for i in xi]
            rest = [m[i] for i in idx_m if i not in xi]
            for ki in itertools.combinations(range(len(n)), len(rest)):
                kept = [n[i] for i in ki]
                if not _equiv_matching(p, rest, kept, eqv):
                    continue
                y = [n[i] for i in range(len(n)) if i not in ki]
                if all(any(gt(p, a, b) for a in x) for b in y):
                    return True
    return False


def dm_compare(p, m, n, gt, eqv):
    if _equiv_matching(p, list(m), list(n), eqv):
        return EQ
    if dm_greater(p, list(m), list(n), gt, eqv):
        return GT
    if dm_greater(p, list(n), list(m), gt, eqv):
        return LT
    return INC


def ref_compare(p, s, t):
    if ref_equiv(p, s, t):
        return EQ
    if ref_gt(p, s, t):
        return GT
    if ref_gt(p, t, s):
        return LT
    return INC


# --- examples ------------------------------------------------------------------------------


def test_prec_compare_examples(spec, prec):
    sig = spec.signature
    assert prec_compare(prec, sig["even"], sig["oeven"]) is EQ
    assert prec_compare(prec, sig["add"], sig["S"]) is GT
    assert prec_compare(prec, sig["even"], sig["even"]) is EQ
    assert prec_compare(prec, sig["S"], sig["add"]) is LT
    assert prec_compare(prec, "eodd", "0") is GT  # through the equivalence class of even
    assert prec_compare(Precedence(), "f", "g") is INC


def test_rpo_examples(prec, T):
    assert rpo_compare(prec, T("add(S(x),y)"), T("S(add(x,y))")) is GT
    assert rpo_compare(prec, T("x"), T("x")) is EQ
    assert rpo_compare(prec, T("even(S(S(x)))"), T("oeven(x)")) is GT
    assert rpo_compare(prec, T("S(add(x,y))"), T("add(S(x),y)")) is LT
    assert rpo_compare(prec, T("x"), T("y")) is INC
    assert rpo_compare(prec, T("x"), T("S(x)")) is LT
    assert rpo_compare(prec, T("even(x)"), T("odd(x)")) is EQ


def test_rpo_examples_agree_with_reference(prec, T):
    for a, b in [("add(S(x),y)", "S(add(x,y))"), ("even(S(S(x)))", "oeven(x)"), ("x", "x")]:
        assert rpo_compare(prec, T(a), T(b)) is ref_compare(prec, T(a), T(b))


def test_permuted_arguments_are_incomparable(prec, T):
    # multiset status, yet equivalence is positional; permutations compare as incomparable
    assert rpo_compare(prec, T("add(x,y)"), T("add(y,x)")) is INC


def test_measure_of_examples(C, T):
    assert measure_of(C("even(add(u1,u1)) = true")) == (T("even(add(u1,u1))"), T("true"))
    assert measure_of(C("odd(x) = true => oeven(S(S(x))) = false")) == (
        T("odd(x)"),
        T("true"),
        T("oeven(S(S(x)))"),
        T("false"),
    )
    assert measure_of(C("x:nat = x")) == (T("x"), T("x"))


def test_measure_compare_examples(prec, T):
    assert measure_compare(prec, [T("S(add(x,y))")], [T("add(x,y)")]) is GT
    assert measure_compare(prec, [T("add(x,0)")], [T("add(x,0)")]) is EQ
    a = [T("even(add(0,0))"), T("true")]
    b = [T("oeven(0)"), T("true")]
    assert measure_compare(prec, a, b) is GT
    assert dm_compare(prec, a, b, ref_gt, ref_equiv) is GT


def test_validate_precedence_examples(prec):
    validate_precedence(prec)
    with pytest.raises(CycleError) as e:
        validate_precedence(parse_precedence("greater [[f, g], [g, f]]"))
    assert {c for c in e.value.cycle} >= {("f",), ("g",)}
    with pytest.raises(CycleError):
        validate_precedence(parse_precedence("equiv [[f, g]] greater [[f, g]]"))
    validate_precedence(parse_precedence("greater [[f, g], [g, h], [f, h]]"))


def test_precedence_text_round_trip(prec):
    again = parse_precedence(str(prec))
    assert again == prec
    assert str(prec) == "equiv [[even, oeven, odd, eodd]] greater [[even, true, false, S, 0, add], [add, S, 0]]"


# --- exhaustive properties over ground terms ----------------------------------------------


@pytest.fixture(scope="module")
def pool(sig):
    g = ground_terms(sig, 4)
    return [t for ts in g.values() for t in ts]


@pytest.fixture(scope="module")
def table(prec, pool):
    return {(i, j): rpo_compare(prec, a, b) for i, a in enumerate(pool) for j, b in enumerate(pool)}


def test_pool_is_large(pool):
    assert len(pool) ** 2 > 5000


def test_greater_irreflexive_and_antisymmetric(pool, table):
    for i in range(len(pool)):
        assert table[i, i] is EQ
    for (i, j), c in table.items():
        assert table[j, i] is c.flip()


def test_transitivity_sampled(pool, table):
    rng = random.Random(7)
    n = len(pool)
    above = {}
    for (i, j), c in table.items():
        if c is GT:
            above.setdefault(i, []).append(j)
    checked = 0
    for _ in range(20000):
        i = rng.randrange(n)
        if not above.get(i):
            continue
        j = rng.choice(above[i])
        if not above.get(j):
            continue
        k = rng.choice(above[j])
        assert table[i, k] is GT
        checked += 1
    for _ in range(5000):
        i, j, k = rng.randrange(n), rng.randrange(n), rng.randrange(n)
        if table[i, j] is EQ and table[j, k] is EQ:
            assert table[i, k] is EQ
    assert checked > 1000


def test_agrees_with_reference_depth3(sig, prec):
    g = ground_terms(sig, 3)
    terms = [t for ts in g.values() for t in ts]
    x, y = Var("x", sig.sorts["nat"]), Var("y", sig.sorts["nat"])
    nat3 = g[sig.sorts["nat"]]
    terms += [x, y] + [replace_at(t, p, x) for t in nat3[:20] for p in positions(t)[:2] if subterm_at(t, p).sort == x.sort]
    for a in terms:
        for b in terms:
            assert rpo_compare(prec, a, b) is ref_compare(prec, a, b), (a, b)


def _open_terms(sig, rng, depth):
    nat = sig.sorts["nat"]
    x, y = Var("x", nat), Var("y", nat)

    def build(d):
        if d <= 1 or rng.random() < 0.25:
            return rng.choice([x, y, App(sig["0"])])
        f = rng.choice([sig["S"], sig["add"], sig["S"]])
        return App(f, tuple(build(d - 1) for _ in f.arg_sorts))

    return x, y, lambda: build(depth)


def test_substitution_stability(sig, prec):
    rng = random.Random(11)
    x, y, draw = _open_terms(sig, rng, 4)
    ground = [t for t in ground_terms(sig, 3)[sig.sorts["nat"]]]
    tried = 0
    while tried < 1000:
        s, t = draw(), draw()
        if rpo_compare(prec, s, t) is not GT:
            continue
        sigma = {x: rng.choice(ground + [y]), y: rng.choice(ground + [x])}
        assert rpo_compare(prec, apply(sigma, s), apply(sigma, t)) is GT, (s, t, sigma)
        tried += 1


def test_monotonicity(sig, prec):
    rng = random.Random(5)
    nat = sig.sorts["nat"]
    hole = Var("hole", nat)
    small = ground_terms(sig, 2)
    contexts = [hole]
    for f in sig.symbols.values():
        for i, s in enumerate(f.arg_sorts):
            if s != nat:
                continue
            for fill in itertools.product(*[small[a] for a in f.arg_sorts]):
                args = list(fill)
                args[i] = hole
                contexts.append(App(f, tuple(args)))
    contexts += [App(sig["S"], (c,)) for c in contexts if c.sort == nat][:30]
    x, y, draw = _open_terms(sig, rng, 4)
    pairs = 0
    while pairs < 300:
        s, t = draw(), draw()
        if rpo_compare(prec, s, t) is not GT:
            continue
        for ctx in contexts:
            assert rpo_compare(prec, apply({hole: s}, ctx), apply({hole: t}, ctx)) is GT
        pairs += 1


def test_axioms_are_oriented(spec, prec):
    for ax in spec.axioms:
        assert rpo_compare(prec, ax.lhs, ax.rhs) is GT, ax.label


def test_bounded_descent_by_axioms(spec, prec, sig):
    """Rewriting ground terms with the oriented axioms descends strictly and stops."""
    from indprover.clauses import Rule
    from indprover.engine import GroundEvaluator

    rules = [Rule(a.label, a) for a in spec.axioms]
    ev = GroundEvaluator(spec)
    terms = [t for ts in ground_terms(sig, 3).values() for t in ts]
    limit = len(terms) * 10
    for t in terms:
        chain = [t]
        while len(chain) < limit:
            step = _one_step(chain[-1], rules, ev)
            if step is None:
                break
            assert rpo_compare(prec, chain[-1], step) is GT
            chain.append(step)
        assert len(chain) < limit
        assert chain[-1] == ev.evaluate(t)


def _one_step(t, rules, ev):
    from indprover.terms import match_at

    for p in positions(t):
        sub = subterm_at(t, p)
        for r in rules:
            s = match_at(r.eq.lhs, sub)
            if s is None:
                continue
            if all(ev.evaluate(apply(s, cl)) == apply(s, cr) for cl, cr in r.eq.conditions):
                return replace_at(t, p, apply(s, r.eq.rhs))
    return None


def test_measure_compare_matches_brute_force_small(prec, sig):
    g = ground_terms(sig, 3)
    base = [t for ts in g.values() for t in ts if t.head.constructor]
    multisets = [list(c) for k in range(0, 4) for c in itertools.combinations_with_replacement(base, k)]
    for a in multisets:
        for b in multisets:
            assert measure_compare(prec, a, b) is dm_compare(prec, a, b, ref_gt, ref_equiv), (a, b)


def test_measure_compare_matches_brute_force_sampled(prec, sig):
    g = ground_terms(sig, 3)
    terms = [t for ts in g.values() for t in ts]
    rng = random.Random(3)
    for _ in range(5000):
        a = [rng.choice(terms) for _ in range(rng.randint(0, 3))]
        b = [rng.choice(terms) for _ in range(rng.randint(0, 3))]
        if rng.random() < 0.3 and a:
            b = a[: rng.randint(0, len(a))] + b[:1]
        assert measure_compare(prec, a, b) is dm_compare(prec, a, b, ref_gt, ref_equiv), (a, b)
