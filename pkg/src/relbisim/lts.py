"""Deterministic labeled transition systems with infinite-trace semantics.

A system is a pair of total functions ``next`` and ``leak`` over an opaque
state space.  Traces are never materialised; callers work with finite
prefixes or with the pair-walk procedures in :mod:`relbisim.oracle`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Hashable, Iterable, NamedTuple, Optional

State = Hashable


class BudgetExceeded(RuntimeError):
    """Raised when an exploration exceeds its configured element budget."""


DEFAULT_BUDGET = 100_000


class Obs(NamedTuple):
    """One observation.  ``kind`` is the tag, ``value`` its payload.

    Kinds: ``unit`` (the bottom leak), ``address``, ``branch``, ``cache``
    (a tuple of addresses, most recent first), ``halt`` and ``named``.
    """

    kind: str
    value: Any = None

    def __repr__(self) -> str:
        if self.kind in ("unit", "halt"):
            return self.kind
        return f"{self.kind}({self.value!r})"


UNIT = Obs("unit")
HALT = Obs("halt")


def address(n: int) -> Obs:
    return Obs("address", n)


def branch(b: bool) -> Obs:
    return Obs("branch", bool(b))


def cache(entries: Iterable[int]) -> Obs:
    return Obs("cache", tuple(entries))


def named(symbol: str) -> Obs:
    return Obs("named", symbol)


@dataclass(frozen=True, eq=False)
class TransitionSystem:
    """A deterministic system ``(S, Sigma, next, leak)``.

    ``states`` is optional; when given it must be a finite collection closed
    under ``next`` and marks the system as finite-mode.
    """

    next: Callable[[State], State]
    leak: Callable[[State], Obs]
    states: Optional[frozenset] = None
    name: str = "T"

    @classmethod
    def from_tables(cls, next_table: dict, leak_table: dict, name: str = "T") -> "TransitionSystem":
        states = frozenset(next_table)
        if set(leak_table) != states:
            raise ValueError("next and leak tables must share one domain")
        for s, t in next_table.items():
            if t not in states:
                raise ValueError(f"successor {t!r} of {s!r} outside the state set")
        nt, lt = dict(next_table), dict(leak_table)
        return cls(nt.__getitem__, lt.__getitem__, states, name)

    @classmethod
    def from_step(cls, step: Callable[[State], tuple], name: str = "T",
                  memo: bool = True) -> "TransitionSystem":
        """Build from a joint ``step(s) -> (next_state, obs)`` function."""
        if memo:
            step = lru_cache(maxsize=None)(step)
        return cls(lambda s: step(s)[0], lambda s: step(s)[1], None, name)

    def step(self, s: State) -> tuple:
        return self.next(s), self.leak(s)


@dataclass(frozen=True)
class TracePrefix:
    origin: Any
    observations: tuple

    def __len__(self) -> int:
        return len(self.observations)


def trace_prefix(T: TransitionSystem, s: State, n: int) -> TracePrefix:
    """The first ``n`` observations of the infinite trace from ``s``."""
    if n < 0:
        raise ValueError("prefix length must be non-negative")
    out = []
    cur = s
    for _ in range(n):
        out.append(T.leak(cur))
        cur = T.next(cur)
    return TracePrefix(s, tuple(out))


def encode_termination(partial_next: Callable[[State], Optional[State]],
                       leak: Callable[[State], Obs],
                       halt_leak: Callable[[State], Obs],
                       name: str = "T") -> TransitionSystem:
    """Turn a partial successor map into a total system.

    States without a successor self-loop forever and leak ``halt_leak(s)``;
    all other states keep their successor and leak.
    """
    def nxt(s):
        t = partial_next(s)
        return s if t is None else t

    def lk(s):
        if partial_next(s) is None:
            return halt_leak(s)
        return leak(s)

    return TransitionSystem(nxt, lk, None, name)


def encode_partial_step(partial_step: Callable[[State], Optional[tuple]],
                        halt_leak: Callable[[State], Obs],
                        name: str = "T", memo: bool = True) -> TransitionSystem:
    """Variant of :func:`encode_termination` for joint step functions.

    ``partial_step(s)`` returns ``(next_state, obs)`` or ``None`` at a
    terminal state.
    """
    def step(s):
        r = partial_step(s)
        if r is None:
            return s, halt_leak(s)
        return r

    return TransitionSystem.from_step(step, name=name, memo=memo)


def reachable_states(T: TransitionSystem, s: State, bound: int = DEFAULT_BUDGET) -> frozenset:
    """States on the path from ``s``, stopping at the first revisit."""
    if bound < 1:
        raise ValueError("bound must be at least 1")
    seen = set()
    cur = s
    while cur not in seen:
        if len(seen) >= bound:
            raise BudgetExceeded(f"no repeat within {bound} states")
        seen.add(cur)
        cur = T.next(cur)
    return frozenset(seen)


def lasso(T: TransitionSystem, s: State, bound: int = DEFAULT_BUDGET) -> tuple[list, int]:
    """Return the path from ``s`` up to its first revisit and the loop entry index."""
    index: dict = {}
    path = []
    cur = s
    while cur not in index:
        if len(path) >= bound:
            raise BudgetExceeded(f"no repeat within {bound} states")
        index[cur] = len(path)
        path.append(cur)
        cur = T.next(cur)
    return path, index[cur]
