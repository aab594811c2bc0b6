"""Sorted first-order terms, substitutions, matching and ground enumeration."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union


class SortError(ValueError):
    pass


class PositionError(ValueError):
    pass


@dataclass(frozen=True)
class Sort:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Symbol:
    name: str
    arg_sorts: tuple[Sort, ...]
    sort: Sort
    constructor: bool = False

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Var:
    name: str
    sort: Sort

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class App:
    head: Symbol
    args: tuple["Term", ...] = ()
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.args) != self.head.arity:
            raise SortError(f"{self.head.name} expects {self.head.arity} arguments, got {len(self.args)}")
        for a, s in zip(self.args, self.head.arg_sorts):
            if a.sort != s:
                raise SortError(f"argument {a} of {self.head.name} has sort {a.sort}, expected {s}")
        object.__setattr__(self, "_hash", hash((self.head.name, self.args)))

    def __hash__(self) -> int:
        return self._hash

    @property
    def sort(self) -> Sort:
        return self.head.sort

    def __str__(self) -> str:
        return show(self)


Term = Union[Var, App]
Position = tuple[int, ...]
Substitution = dict  # Var -> Term


def app(head: Symbol, *args: Term) -> App:
    return App(head, tuple(args))


def show(t: Term, typed: bool = False) -> str:
    """Prefix syntax; with ``typed`` every variable is written ``name:sort``."""
    if isinstance(t, Var):
        return f"{t.name}:{t.sort.name}" if typed else t.name
    if not t.args:
        return t.head.name
    return f"{t.head.name}({','.join(show(a, typed) for a in t.args)})"


def is_constructor_term(t: Term) -> bool:
    """Built from constructors and variables only."""
    if isinstance(t, Var):
        return True
    return t.head.constructor and all(is_constructor_term(a) for a in t.args)


def is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    return all(is_ground(a) for a in t.args)


def variables(t: Term) -> list[Var]:
    """Distinct variables in first-occurrence (left-to-right) order."""
    seen: dict[Var, None] = {}

    def walk(u: Term) -> None:
        if isinstance(u, Var):
            seen.setdefault(u, None)
        else:
            for a in u.args:
                walk(a)

    walk(t)
    return list(seen)


def occurs(v: Var, t: Term) -> bool:
    if isinstance(t, Var):
        return t == v
    return any(occurs(v, a) for a in t.args)


def depth(t: Term) -> int:
    """Constructor layers along the longest path; variables count 0."""
    if isinstance(t, Var):
        return 0
    return 1 + max((depth(a) for a in t.args), default=0)


def size(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    return 1 + sum(size(a) for a in t.args)


def check_substitution(s: Mapping[Var, Term]) -> None:
    for v, u in s.items():
        if v.sort != u.sort:
            raise SortError(f"binding {v.name}:{v.sort} -> {u} of sort {u.sort}")


def apply(s: Mapping[Var, Term], t: Term) -> Term:
    """Simultaneous replacement of every variable bound in ``s``."""
    if not s:
        return t
    check_substitution(s)
    return _apply(s, t)


def _apply(s: Mapping[Var, Term], t: Term) -> Term:
    if isinstance(t, Var):
        return s.get(t, t)
    if not t.args:
        return t
    return App(t.head, tuple(_apply(s, a) for a in t.args))


def match_at(pattern: Term, subject: Term, s: Mapping[Var, Term] | None = None) -> dict | None:
    """One-way matching; returns the extended substitution or None.

    Repeated pattern variables must be bound to syntactically equal terms.
    """
    out = dict(s) if s else {}
    stack = [(pattern, subject)]
    while stack:
        p, t = stack.pop()
        if isinstance(p, Var):
            if p.sort != t.sort:
                return None
            bound = out.get(p)
            if bound is None:
                out[p] = t
            elif bound != t:
                return None
        elif isinstance(t, Var) or p.head.name != t.head.name or len(p.args) != len(t.args):
            return None
        else:
            stack.extend(zip(p.args, t.args))
    return out


def positions(t: Term) -> list[Position]:
    """All positions, leftmost-innermost first (children before parent)."""
    out: list[Position] = []

    def walk(u: Term, p: Position) -> None:
        if isinstance(u, App):
            for i, a in enumerate(u.args):
                walk(a, p + (i,))
        out.append(p)

    walk(t, ())
    return out


def subterm_at(t: Term, p: Iterable[int]) -> Term:
    for i in p:
        if isinstance(t, Var) or not 0 <= i < len(t.args):
            raise PositionError(f"position {tuple(p)} invalid")
        t = t.args[i]
    return t


def replace_at(t: Term, p: Iterable[int], u: Term) -> Term:
    p = tuple(p)
    old = subterm_at(t, p)
    if old.sort != u.sort:
        raise SortError(f"cannot replace {old} ({old.sort}) by {u} ({u.sort})")
    return _replace(t, p, u)


def _replace(t: Term, p: Position, u: Term) -> Term:
    if not p:
        return u
    i = p[0]
    args = list(t.args)
    args[i] = _replace(args[i], p[1:], u)
    return App(t.head, tuple(args))


class Signature:
    """Sorts and function symbols, looked up by name."""

    def __init__(self, sorts: Iterable[Sort] = (), symbols: Iterable[Symbol] = ()):
        self.sorts: dict[str, Sort] = {}
        self.symbols: dict[str, Symbol] = {}
        for s in sorts:
            self.add_sort(s)
        for f in symbols:
            self.add_symbol(f)

    def add_sort(self, s: Sort) -> None:
        if s.name in self.sorts:
            raise SortError(f"duplicate sort {s.name}")
        self.sorts[s.name] = s

    def add_symbol(self, f: Symbol) -> None:
        if f.name in self.symbols:
            raise SortError(f"duplicate symbol {f.name}")
        for s in f.arg_sorts + (f.sort,):
            if s.name not in self.sorts:
                raise SortError(f"unknown sort {s.name} in declaration of {f.name}")
        self.symbols[f.name] = f

    def __getitem__(self, name: str) -> Symbol:
        return self.symbols[name]

    def constructors(self, sort: Sort) -> list[Symbol]:
        return [f for f in self.symbols.values() if f.constructor and f.sort == sort]

    def defined(self) -> list[Symbol]:
        return [f for f in self.symbols.values() if not f.constructor]

    def is_boolean(self, sort: Sort) -> bool:
        cs = self.constructors(sort)
        return len(cs) == 2 and all(c.arity == 0 for c in cs)


def enumerate_ground(sig: Signature, sort: Sort, max_depth: int) -> list[Term]:
    """Every constructor-only term of ``sort`` with depth at most ``max_depth``.

    Ordered by depth, then by constructor declaration order.
    """
    by_depth: dict[Sort, list[list[Term]]] = {}

    def upto(s: Sort, d: int) -> list[Term]:
        return [t for k in range(1, d + 1) for t in exact(s, k)]

    def exact(s: Sort, d: int) -> list[Term]:
        layers = by_depth.setdefault(s, [])
        while len(layers) < d:
            layers.append(None)  # type: ignore[arg-type]
        if layers[d - 1] is not None:
            return layers[d - 1]
        out: list[Term] = []
        for c in sig.constructors(s):
            if c.arity == 0:
                if d == 1:
                    out.append(App(c))
                continue
            if d == 1:
                continue
            pools = [upto(a, d - 1) for a in c.arg_sorts]
            for combo in itertools.product(*pools):
                if max(depth(a) for a in combo) == d - 1:
                    out.append(App(c, combo))
        layers[d - 1] = out
        return out

    if max_depth < 1:
        return []
    return upto(sort, max_depth)


def cover_patterns(sig: Signature, sort: Sort, d: int, fresh: Iterator[str]) -> list[Term]:
    """Linear constructor patterns of depth ``d`` with variable leaves.

    Every ground constructor term of the sort is an instance of exactly one
    returned pattern. Depth 0 is a single variable.
    """
    if d <= 0:
        return [Var(next(fresh), sort)]
    out: list[Term] = []
    for c in sig.constructors(sort):
        if c.arity == 0:
            out.append(App(c))
            continue
        # each argument slot needs its own fresh variables, so expand lazily
        slots = [_cover_templates(sig, a, d - 1) for a in c.arg_sorts]
        for combo in itertools.product(*slots):
            out.append(App(c, tuple(_instantiate_template(tmpl, fresh) for tmpl in combo)))
    return out


def _cover_templates(sig: Signature, sort: Sort, d: int) -> list:
    if d <= 0:
        return [("var", sort)]
    out = []
    for c in sig.constructors(sort):
        if c.arity == 0:
            out.append(("app", c, ()))
        else:
            for combo in itertools.product(*[_cover_templates(sig, a, d - 1) for a in c.arg_sorts]):
                out.append(("app", c, combo))
    return out


def _instantiate_template(tmpl, fresh: Iterator[str]) -> Term:
    if tmpl[0] == "var":
        return Var(next(fresh), tmpl[1])
    return App(tmpl[1], tuple(_instantiate_template(t, fresh) for t in tmpl[2]))


def fresh_names(prefix: str = "u", avoid: Iterable[str] = (), start: int = 1) -> Iterator[str]:
    avoid = set(avoid)
    for k in itertools.count(start):
        name = f"{prefix}{k}"
        if name not in avoid:
            yield name


def unifiable_linear(p: Term, q: Term) -> bool:
    """Overlap test for patterns with no shared variables."""
    if isinstance(p, Var) or isinstance(q, Var):
        return True
    if p.head.name != q.head.name:
        return False
    return all(unifiable_linear(a, b) for a, b in zip(p.args, q.args))


def is_linear(t: Term) -> bool:
    names: list[Var] = []

    def walk(u: Term) -> None:
        if isinstance(u, Var):
            names.append(u)
        else:
            for a in u.args:
                walk(a)

    walk(t)
    return len(names) == len(set(names))


def rename(t: Term, mapping: Mapping[str, str]) -> Term:
    if isinstance(t, Var):
        return Var(mapping.get(t.name, t.name), t.sort)
    if not t.args:
        return t
    return App(t.head, tuple(rename(a, mapping) for a in t.args))
