"""Exact decision procedures on finite deterministic systems.

Trace equality is decided by walking the pair graph until a mismatch or a
revisited pair.  The bisimilarity relations are computed as fixpoints over
an explicitly indexed universe of pairs or quadruples, using boolean numpy
vectors for the iteration.  These procedures are the ground truth the proof
kernel is tested against.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, NamedTuple, Optional

import numpy as np

from .lts import DEFAULT_BUDGET, BudgetExceeded, TransitionSystem, lasso


class NotClosed(ValueError):
    """A universe is missing the successor of one of its elements."""


class Quad(NamedTuple):
    s1: object
    s2: object
    h1: object
    h2: object

    def cstep(self, C: TransitionSystem) -> "Quad":
        return Quad(C.next(self.s1), C.next(self.s2), self.h1, self.h2)

    def hstep(self, H: TransitionSystem) -> "Quad":
        return Quad(self.s1, self.s2, H.next(self.h1), H.next(self.h2))

    def lockstep(self, C: TransitionSystem, H: TransitionSystem) -> "Quad":
        return Quad(C.next(self.s1), C.next(self.s2), H.next(self.h1), H.next(self.h2))


class QuadRelation:
    """A set of quads, extensional or given by a membership predicate.

    Intensional relations enumerate their members only relative to a
    supplied finite universe.
    """

    def __init__(self, name: str, predicate: Optional[Callable[[Quad], bool]] = None,
                 members: Optional[Iterable] = None):
        if predicate is None and members is None:
            raise ValueError("a relation needs a predicate or a member set")
        self.name = name
        self.members = None if members is None else frozenset(Quad(*q) for q in members)
        self._pred = predicate

    @classmethod
    def extensional(cls, name: str, quads: Iterable) -> "QuadRelation":
        return cls(name, members=quads)

    @classmethod
    def intensional(cls, name: str, predicate: Callable[[Quad], bool]) -> "QuadRelation":
        return cls(name, predicate=predicate)

    @property
    def is_extensional(self) -> bool:
        return self.members is not None

    def __contains__(self, q) -> bool:
        if self.members is not None:
            return q in self.members
        return bool(self._pred(q))

    def enumerate(self, universe: Optional[Iterable] = None) -> list:
        if universe is None:
            if self.members is None:
                raise ValueError(f"relation {self.name!r} is intensional; a universe is required")
            return sorted(self.members, key=repr)
        return [q for q in universe if q in self]

    def __len__(self) -> int:
        if self.members is None:
            raise TypeError("intensional relation has no intrinsic size")
        return len(self.members)

    def __iter__(self) -> Iterator[Quad]:
        if self.members is None:
            raise TypeError("intensional relation is not iterable without a universe")
        return iter(self.members)

    def __repr__(self) -> str:
        kind = f"{len(self.members)} quads" if self.members is not None else "intensional"
        return f"QuadRelation({self.name!r}, {kind})"


EMPTY = QuadRelation.extensional("empty", ())
TOP = QuadRelation.intensional("top", lambda q: True)


@dataclass(frozen=True)
class PairGraphVerdict:
    equal: bool
    witness_index: Optional[int] = None

    def __post_init__(self):
        if self.equal != (self.witness_index is None):
            raise ValueError("witness index must be present exactly when traces differ")

    def __bool__(self) -> bool:
        return self.equal


def traces_equal(T: TransitionSystem, s1, s2, budget: int = DEFAULT_BUDGET) -> PairGraphVerdict:
    seen = set()
    k = 0
    a, b = s1, s2
    while (a, b) not in seen:
        if T.leak(a) != T.leak(b):
            return PairGraphVerdict(False, k)
        if len(seen) >= budget:
            raise BudgetExceeded(f"pair walk exceeded {budget} pairs")
        seen.add((a, b))
        a, b = T.next(a), T.next(b)
        k += 1
    return PairGraphVerdict(True)


def rel_trace_eq(C: TransitionSystem, H: TransitionSystem, q, budget: int = DEFAULT_BUDGET) -> bool:
    """Equal contract traces imply equal hardware traces, at one quad."""
    s1, s2, h1, h2 = q
    if not traces_equal(C, s1, s2, budget).equal:
        return True
    return traces_equal(H, h1, h2, budget).equal


# ---------------------------------------------------------------------------
# universes


def ultimate_trace(T: TransitionSystem, s, budget: int = DEFAULT_BUDGET) -> tuple:
    """The infinite trace of ``s`` as a canonical (prefix, period) pair.

    Deterministic finite-state traces are ultimately periodic; with the
    period made primitive and the prefix as short as possible, two states
    have equal traces exactly when their canonical pairs are equal.
    """
    path, loop = lasso(T, s, budget)
    obs = [T.leak(x) for x in path]
    prefix, cycle = obs[:loop], obs[loop:]
    n = len(cycle)
    for d in range(1, n + 1):
        if n % d == 0 and cycle == cycle[:d] * (n // d):
            cycle = cycle[:d]
            break
    while prefix and prefix[-1] == cycle[-1]:
        prefix.pop()
        cycle = cycle[-1:] + cycle[:-1]
    return tuple(prefix), tuple(cycle)


def close_quads(C: TransitionSystem, H: TransitionSystem, seeds: Iterable,
                budget: int = DEFAULT_BUDGET) -> list:
    """Close seed quads under the contract-step and hardware-step maps."""
    out = []
    seen = set()
    todo = deque()
    for q in seeds:
        q = Quad(*q)
        if q not in seen:
            seen.add(q)
            todo.append(q)
    while todo:
        q = todo.popleft()
        out.append(q)
        for r in (q.cstep(C), q.hstep(H)):
            if r not in seen:
                if len(seen) >= budget:
                    raise BudgetExceeded(f"quad universe exceeded {budget} elements")
                seen.add(r)
                todo.append(r)
    return out


def full_product(C: TransitionSystem, H: TransitionSystem) -> list:
    if C.states is None or H.states is None:
        raise ValueError("full product needs finite-mode systems")
    cs = sorted(C.states, key=repr)
    hs = sorted(H.states, key=repr)
    return [Quad(a, b, c, d) for a in cs for b in cs for c in hs for d in hs]


class QuadUniverse:
    """A finite indexed set of quads with precomputed successor indices."""

    def __init__(self, C: TransitionSystem, H: TransitionSystem, quads: Iterable):
        self.C, self.H = C, H
        self.quads = [Quad(*q) for q in quads]
        self.index = {q: i for i, q in enumerate(self.quads)}
        self.cdiff = np.array([C.leak(q.s1) != C.leak(q.s2) for q in self.quads], dtype=bool)
        self.heq = np.array([H.leak(q.h1) == H.leak(q.h2) for q in self.quads], dtype=bool)
        self._succ: dict = {}

    def __len__(self) -> int:
        return len(self.quads)

    def __iter__(self):
        return iter(self.quads)

    def __contains__(self, q) -> bool:
        return q in self.index

    def succ(self, kind: str) -> np.ndarray:
        """Successor index vector for ``kind`` in {'c', 'h', 'lock'}."""
        if kind not in self._succ:
            step = {
                "c": lambda q: q.cstep(self.C),
                "h": lambda q: q.hstep(self.H),
                "lock": lambda q: q.lockstep(self.C, self.H),
            }[kind]
            idx = np.empty(len(self.quads), dtype=np.int64)
            for i, q in enumerate(self.quads):
                r = step(q)
                j = self.index.get(r)
                if j is None:
                    raise NotClosed(f"{kind}-successor of {q!r} is outside the universe")
                idx[i] = j
            self._succ[kind] = idx
        return self._succ[kind]

    def relation(self, mask: np.ndarray, name: str) -> QuadRelation:
        return QuadRelation.extensional(name, (self.quads[i] for i in np.flatnonzero(mask)))

    def mask(self, rel) -> np.ndarray:
        if isinstance(rel, np.ndarray):
            return rel
        return np.array([q in rel for q in self.quads], dtype=bool)


def as_universe(C, H, universe) -> QuadUniverse:
    if isinstance(universe, QuadUniverse):
        return universe
    return QuadUniverse(C, H, universe)


# ---------------------------------------------------------------------------
# fixpoints


def compute_bisim(T: TransitionSystem, universe: Iterable) -> frozenset:
    """Greatest fixpoint of the bisimulation functional on a set of pairs."""
    pairs = list(universe)
    index = {p: i for i, p in enumerate(pairs)}
    succ = np.empty(len(pairs), dtype=np.int64)
    same = np.empty(len(pairs), dtype=bool)
    for i, (a, b) in enumerate(pairs):
        j = index.get((T.next(a), T.next(b)))
        if j is None:
            raise NotClosed(f"successor of pair {(a, b)!r} is outside the universe")
        succ[i] = j
        same[i] = T.leak(a) == T.leak(b)
    x = np.ones(len(pairs), dtype=bool)
    while True:
        y = same & x[succ]
        if np.array_equal(x, y):
            break
        x = y
    return frozenset(p for p, keep in zip(pairs, x) if keep)


def compute_rbisim_lockstep(C, H, universe) -> QuadRelation:
    U = as_universe(C, H, universe)
    succ = U.succ("lock")
    x = np.ones(len(U), dtype=bool)
    while True:
        y = U.cdiff | (U.heq & x[succ])
        if np.array_equal(x, y):
            break
        x = y
    return U.relation(x, "rbisim-lockstep")


def compute_rbisim_relaxed(C, H, universe) -> QuadRelation:
    U = as_universe(C, H, universe)
    cs, hs = U.succ("c"), U.succ("h")
    x = np.ones(len(U), dtype=bool)
    while True:
        y = U.cdiff | x[cs] | (U.heq & x[hs])
        if np.array_equal(x, y):
            break
        x = y
    return U.relation(x, "rbisim-relaxed")


class RbisimResult(QuadRelation):
    """The relative bisimilarity relation plus the inner derivation ranks.

    ``justification[q]`` is ``("cleak", 0)``, ``("hstep", 0)`` or
    ``("cstep", n)`` where ``n`` is the number of contract steps before the
    member is discharged by C-Leak or H-Step.
    """

    def __init__(self, name, members, justification, outer_history, inner_history):
        super().__init__(name, members=members)
        self.justification = justification
        self.outer_history = outer_history
        self.inner_history = inner_history


def rbisim_functional(U: QuadUniverse, r1: np.ndarray, record: Optional[list] = None) -> tuple:
    """One application of rbisimF: the inner least fixpoint for fixed ``r1``.

    Returns the resulting mask and the per-quad inner rank (-1 if absent).
    """
    cs, hs = U.succ("c"), U.succ("h")
    hpart = U.heq & r1[hs]
    rank = np.full(len(U), -1, dtype=np.int64)
    x = np.zeros(len(U), dtype=bool)
    level = 0
    while True:
        y = U.cdiff | hpart | x[cs]
        new = y & ~x
        rank[new] = level
        if record is not None:
            record.append(y.copy())
        if not new.any():
            break
        x = y
        level += 1
    return x, rank


def compute_rbisim(C, H, universe, history: bool = False) -> RbisimResult:
    """Nested fixpoint nu R1. mu R2. (C-Leak | C-Step(R2) | H-Step(R1))."""
    U = as_universe(C, H, universe)
    r1 = np.ones(len(U), dtype=bool)
    outer = [r1.copy()] if history else None
    inner_all = [] if history else None
    while True:
        inner = [] if history else None
        x, rank = rbisim_functional(U, r1, inner)
        if history:
            inner_all.append(inner)
            outer.append(x.copy())
        if np.array_equal(x, r1):
            break
        r1 = x
    hpart = U.heq & r1[U.succ("h")]
    just = {}
    for i in np.flatnonzero(r1):
        q = U.quads[i]
        if U.cdiff[i]:
            just[q] = ("cleak", 0)
        elif hpart[i]:
            just[q] = ("hstep", 0)
        else:
            just[q] = ("cstep", int(rank[i]))
    members = [U.quads[i] for i in np.flatnonzero(r1)]
    return RbisimResult("rbisim", members, just, outer, inner_all)


def compute_parameterized(C, H, universe, hypothesis, lockstep: bool = False) -> QuadRelation:
    """Members of the parameterized predicate G_F(R) = nu X. F(X | R).

    With ``lockstep`` the functional is the lockstep one.  Quads of the
    universe that lie in ``hypothesis`` are added to X before every step.
    """
    U = as_universe(C, H, universe)
    hyp = U.mask(hypothesis)
    x = np.ones(len(U), dtype=bool)
    while True:
        xr = x | hyp
        if lockstep:
            y = U.cdiff | (U.heq & xr[U.succ("lock")])
        else:
            y, _ = rbisim_functional(U, xr)
        if np.array_equal(x, y):
            break
        x = y
    return U.relation(x, "G")
