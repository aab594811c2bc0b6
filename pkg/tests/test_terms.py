import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indprover.terms import (
    App,
    PositionError,
    Signature,
    Sort,
    SortError,
    Symbol,
    Var,
    apply,
    cover_patterns,
    enumerate_ground,
    fresh_names,
    match_at,
    positions,
    replace_at,
    subterm_at,
    variables,
)


def test_apply_examples(T, sig):
    x = Var("x", sig.sorts["nat"])
    y = Var("y", sig.sorts["nat"])
    assert apply({}, T("even(x)")) == T("even(x)")
    assert apply({x: T("0")}, T("oeven(S(S(x)))")) == T("oeven(S(S(0)))")
    assert apply({x: T("S(y)")}, T("add(x,x)")) == T("add(S(y),S(y))")


def test_apply_is_simultaneous(T, sig):
    x, y = Var("x", sig.sorts["nat"]), Var("y", sig.sorts["nat"])
    assert apply({x: y, y: x}, T("add(x,y)")) == T("add(y,x)")


def test_apply_rejects_sort_mismatch(T, sig):
    x = Var("x", sig.sorts["nat"])
    with pytest.raises(SortError):
        apply({x: T("true")}, T("S(x)"))


def test_match_examples(T):
    assert match_at(T("add(0,x)"), T("add(0,S(0))")) == {Var("x", T("0").sort): T("S(0)")}
    assert match_at(T("even(S(S(x)))"), T("even(S(0))")) is None
    assert match_at(T("add(x,x)"), T("add(S(0),0)")) is None
    assert match_at(T("add(x,x)"), T("add(S(0),S(0))")) is not None


def test_position_examples(T):
    assert subterm_at(T("even(add(x,x))"), (0,)) == T("add(x,x)")
    assert replace_at(T("even(add(0,x))"), (0,), T("x")) == T("even(x)")
    assert replace_at(T("S(add(x,y))"), (), T("0")) == T("0")


def test_invalid_positions(T):
    with pytest.raises(PositionError):
        subterm_at(T("S(0)"), (1,))
    with pytest.raises(PositionError):
        replace_at(T("0"), (0,), T("0"))
    with pytest.raises(SortError):
        replace_at(T("even(x)"), (0,), T("true"))


def test_enumerate_ground_examples(sig):
    nat, bool_ = sig.sorts["nat"], sig.sorts["bool"]
    assert enumerate_ground(sig, nat, 1) == [App(sig["0"])]
    assert [str(t) for t in enumerate_ground(sig, nat, 3)] == ["0", "S(0)", "S(S(0))"]
    assert [str(t) for t in enumerate_ground(sig, bool_, 1)] == ["true", "false"]


def test_enumerate_ground_uninhabited():
    s = Sort("s")
    sig = Signature([s], [Symbol("f", (s,), s, True)])
    assert enumerate_ground(sig, s, 4) == []


def test_enumerate_ground_two_constructors():
    s = Sort("tree")
    sig = Signature([s], [Symbol("leaf", (), s, True), Symbol("node", (s, s), s, True)])
    got = enumerate_ground(sig, s, 3)
    # depth 3: node over the two shallower trees, except node(leaf, leaf)
    assert len(got) == len(set(got)) == 1 + 1 + (2 * 2 - 1)


def test_well_sortedness_enforced(sig):
    with pytest.raises(SortError):
        App(sig["S"], (App(sig["true"]),))
    with pytest.raises(SortError):
        App(sig["add"], (App(sig["0"]),))


def test_cover_patterns_partition(sig):
    nat = sig.sorts["nat"]
    for d in range(1, 5):
        pats = cover_patterns(sig, nat, d, fresh_names("n"))
        for g in enumerate_ground(sig, nat, d + 3):
            assert sum(match_at(p, g) is not None for p in pats) == 1
    assert [str(p) for p in cover_patterns(sig, nat, 2, fresh_names("n"))] == ["0", "S(0)", "S(S(n1))"]


# --- generated terms ---------------------------------------------------------------


def terms_of(sig, sort, vars_, depth):
    leaves = [App(f) for f in sig.constructors(sort) if f.arity == 0]
    leaves += [v for v in vars_ if v.sort == sort]
    if depth <= 1:
        return st.sampled_from(leaves)
    sub = {s: terms_of(sig, s, vars_, depth - 1) for s in sig.sorts.values()}
    compound = [f for f in sig.symbols.values() if f.sort == sort and f.arity]
    options = [st.sampled_from(leaves)] + [
        st.tuples(*[sub[s] for s in f.arg_sorts]).map(lambda args, f=f: App(f, tuple(args))) for f in compound
    ]
    return st.one_of(options)


@pytest.fixture(scope="module")
def gen(sig):
    nat = sig.sorts["nat"]
    vs = [Var("x", nat), Var("y", nat)]
    return vs, terms_of(sig, nat, vs, 4), terms_of(sig, nat, [], 3)


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_apply_is_homomorphism(gen, data):
    vs, terms, ground = gen
    t = data.draw(terms)
    s = {vs[0]: data.draw(ground), vs[1]: data.draw(ground)}
    if isinstance(t, App):
        assert apply(s, t) == App(t.head, tuple(apply(s, a) for a in t.args))
    assert not any(v in variables(apply(s, t)) for v in vs)


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_match_sound_on_instances(gen, data):
    vs, terms, ground = gen
    p = data.draw(terms)
    s = {v: data.draw(ground) for v in vs}
    subject = apply(s, p)
    m = match_at(p, subject)
    assert m is not None
    assert apply(m, p) == subject
    assert set(m) <= set(variables(p))


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_position_round_trip(gen, data):
    _, terms, _ = gen
    t = data.draw(terms)
    for p in positions(t):
        assert replace_at(t, p, subterm_at(t, p)) == t


def test_match_complete_brute_force(sig):
    """Every (pattern, ground subject) pair: a match exists iff some ground instance equals the subject."""
    from conftest import ground_terms

    nat = sig.sorts["nat"]
    x, y = Var("x", nat), Var("y", nat)
    ground = ground_terms(sig, 3)[nat]
    small = [t for t in ground if t.head.constructor]
    patterns = [x, App(sig["S"], (x,)), App(sig["add"], (x, x)), App(sig["add"], (x, y)), App(sig["add"], (App(sig["S"], (x,)), y))]
    patterns += [App(sig["add"], (App(sig["0"]), x)), App(sig["S"], (App(sig["add"], (y, x)),))]
    pool = ground_terms(sig, 2)[nat]
    for p in patterns:
        vs = variables(p)
        instances = {apply(dict(zip(vs, combo)), p) for combo in itertools.product(pool, repeat=len(vs))}
        for subject in ground + small:
            m = match_at(p, subject)
            if m is not None:
                assert apply(m, p) == subject
            # completeness relative to instances drawn from the pool
            if subject in instances:
                assert m is not None
