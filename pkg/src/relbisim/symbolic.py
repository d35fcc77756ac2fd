"""Lazy enumeration of initial states over a finite value domain.

Instead of enumerating every memory and register assignment up front, an
initial state is built from :class:`Hole` placeholders.  The semantics
treat holes as opaque until they need the value (arithmetic, addressing,
branching or comparing against something that is not the very same hole);
at that point :class:`NeedValue` is raised.  :func:`explore` catches it,
branches over the hole's domain and re-runs the computation from scratch
on each substituted state.

Since a run only ever depends on the cells it actually forced, each leaf
of the exploration stands for every completion of its unassigned holes.
The leaf weights (domain size to the power of the number of free holes)
sum to the size of the full product, which callers assert as a coverage
check.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator


class NeedValue(Exception):
    def __init__(self, hole: "Hole"):
        super().__init__(repr(hole))
        self.hole = hole


class Hole:
    """An unknown integer identified by a key such as ``('m', 1, 3)``.

    Holes are interned, one object per key, so that hashing and equality
    are identity based and cheap; states full of holes are hashed a lot.
    """

    __slots__ = ("key", "__weakref__")
    _interned: dict = {}

    def __new__(cls, key):
        h = cls._interned.get(key)
        if h is None:
            h = object.__new__(cls)
            h.key = key
            cls._interned[key] = h
        return h

    def __eq__(self, other):
        if other is self:
            return True
        raise NeedValue(self)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = object.__hash__

    def __reduce__(self):
        return (Hole, (self.key,))

    def __repr__(self):
        return "?" + "".join(str(k) for k in self.key)

    def __bool__(self):
        raise NeedValue(self)

    def __index__(self):
        raise NeedValue(self)

    def __int__(self):
        raise NeedValue(self)

    def _force(self, *_):
        raise NeedValue(self)

    __lt__ = __le__ = __gt__ = __ge__ = _force
    __add__ = __radd__ = __sub__ = __rsub__ = __mod__ = __neg__ = _force


def force(x):
    """Return ``x`` if it is concrete, otherwise demand its value."""
    if type(x) is Hole:
        raise NeedValue(x)
    return x


class _Tail:
    """A shared symbolic cache suffix.

    The semantics only prepend to caches and compare them, so one opaque
    suffix common to both hardware states stands for every initial cache.
    """

    __slots__ = ()

    def __repr__(self):
        return "..."

    def __reduce__(self):
        return "CACHE_TAIL"


CACHE_TAIL = _Tail()


def substitute(obj, hole: Hole, value):
    if type(obj) is Hole:
        return value if obj is hole else obj
    if isinstance(obj, tuple):
        items = [substitute(x, hole, value) for x in obj]
        if hasattr(obj, "_fields"):
            return type(obj)._make(items)
        return tuple(items)
    return obj


def holes_in(obj, out=None) -> set:
    out = set() if out is None else out
    if type(obj) is Hole:
        out.add(obj.key)
    elif isinstance(obj, tuple):
        for x in obj:
            holes_in(x, out)
    return out


@dataclass(frozen=True)
class Leaf:
    assignment: dict
    state: object
    result: object
    free: int

    def weight(self, domain_size: int) -> int:
        return domain_size ** self.free


def explore(initial, domain, run: Callable, max_leaves: int = 10_000_000) -> Iterator[Leaf]:
    """Yield one :class:`Leaf` per region of the input space ``run`` distinguishes.

    ``domain(key)`` gives the values a hole ranges over.
    """
    stack = [({}, initial)]
    produced = 0
    while stack:
        asg, obj = stack.pop()
        try:
            res = run(obj)
        except NeedValue as e:
            h = e.hole
            if h.key in asg:
                raise RuntimeError(f"hole {h!r} re-demanded after substitution")
            for v in reversed(tuple(domain(h.key))):
                stack.append(({**asg, h.key: v}, substitute(obj, h, v)))
            continue
        produced += 1
        if produced > max_leaves:
            raise RuntimeError("lazy exploration exceeded its leaf budget")
        yield Leaf(asg, obj, res, len(holes_in(obj)))


def complete(state, value=0):
    """Fill every remaining hole with ``value`` (for reporting concrete witnesses)."""
    for key in sorted(holes_in(state), key=repr):
        state = substitute(state, Hole(key), value)
    return state
