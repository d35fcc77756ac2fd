from itertools import product

import pytest

from relbisim.symbolic import CACHE_TAIL, Hole, NeedValue, complete, explore, force, holes_in, substitute


def test_hole_identity_and_demand():
    h = Hole(("x",))
    assert h == Hole(("x",))
    assert h is Hole(("x",))
    with pytest.raises(NeedValue):
        h == 0
    with pytest.raises(NeedValue):
        force(h)
    with pytest.raises(NeedValue):
        h + 1
    assert force(3) == 3


def test_substitute_and_holes():
    a, b = Hole(("a",)), Hole(("b",))
    t = ((a, 1), b)
    assert holes_in(t) == {("a",), ("b",)}
    assert substitute(t, a, 7) == ((7, 1), b)
    assert complete(t, 0) == ((0, 1), 0)


def test_explore_covers_product_and_matches_brute_force():
    keys = [("x", i) for i in range(4)]
    start = tuple(Hole(k) for k in keys)

    def run(st):
        # depends on x0 always, on x1 only when x0 is zero
        if force(st[0]) == 0:
            return force(st[1]) + 10
        return force(st[0])

    leaves = list(explore(start, lambda k: (0, 1, 2), run))
    assert sum(l.weight(3) for l in leaves) == 3 ** 4
    assert len(leaves) == 5
    for vals in product((0, 1, 2), repeat=4):
        expect = vals[1] + 10 if vals[0] == 0 else vals[0]
        leaf = next(l for l in leaves if all(l.assignment.get(k, v) == v for k, v in zip(keys, vals)))
        assert leaf.result == expect


def test_cache_tail_is_a_shared_suffix():
    assert (1, CACHE_TAIL) == (1, CACHE_TAIL)
    assert (1, CACHE_TAIL) != (CACHE_TAIL,)
