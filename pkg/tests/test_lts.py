import random
from collections import deque

import pytest
from hypothesis import given, settings, strategies as st

from relbisim.isa import HwState, ArchState, Load, hw_step, parse_program
from relbisim.lts import (
    HALT, UNIT, BudgetExceeded, Obs, TransitionSystem, address, cache, encode_termination,
    lasso, reachable_states, trace_prefix,
)
from relbisim.random_systems import random_system
from relbisim.speculation import Predictor, build_am_instance
from relbisim.isa import Domain

from conftest import system


def test_zero_length_prefix():
    T = system({"s": "s"}, {"s": "a"})
    assert trace_prefix(T, "s", 0).observations == ()


def test_self_loop_prefix():
    T = TransitionSystem.from_tables({"s": "s"}, {"s": UNIT})
    assert trace_prefix(T, "s", 3).observations == (UNIT, UNIT, UNIT)


def test_negative_prefix_rejected():
    T = system({"s": "s"}, {"s": "a"})
    with pytest.raises(ValueError):
        trace_prefix(T, "s", -1)


def test_hardware_load_prefix():
    # two steps of a load: the snapshot before, then the cache with the address prepended
    P = (Load("r1", "r2"), Load("r1", "r2"))

    def step(h):
        if h.pc >= len(P):
            return h, cache(h.c)
        return hw_step(h, P[h.pc])

    T = TransitionSystem.from_step(step)
    h = HwState(ArchState((0, 0, 0, 0), (0, 3), 0), (1,))
    assert trace_prefix(T, h, 2).observations == (cache((1,)), cache((3, 1)))


def test_halting_state_self_loops():
    T = encode_termination(lambda s: None if s == "end" else "end", lambda s: UNIT, lambda s: HALT)
    assert T.next("end") == "end"
    assert trace_prefix(T, "end", 4).observations == (HALT,) * 4
    assert T.next("start") == "end" and T.leak("start") == UNIT


def test_out_of_range_pc_leaks_halt_forever():
    P = parse_program("add r1 r2 1")
    inst = build_am_instance(P, Predictor.constant("next"), 2)
    s = inst.contract_state((0,) * 4, (0, 0), 1)
    assert trace_prefix(inst.C, s, 5).observations == (HALT,) * 5


def test_reachable_self_loop_and_cycle():
    T = system({"s": "t", "t": "u", "u": "s", "x": "x"}, dict.fromkeys("stux", "o"))
    assert reachable_states(T, "x", 5) == {"x"}
    assert reachable_states(T, "s", 10) == {"s", "t", "u"}


def test_reachable_budget_on_infinite_system():
    T = TransitionSystem(lambda n: n + 1, lambda n: UNIT)
    with pytest.raises(BudgetExceeded):
        reachable_states(T, 0, 50)


def test_reachable_spec_hardware_matches_bfs():
    P = parse_program("beqz r1 3\nload r2 r2\nload r1 r2\nload r1 r1")
    dom = Domain(4, (0, 1))
    inst = build_am_instance(P, Predictor.constant("next"), 2, dom)
    for m in [(0, 1, 1, 0), (1, 1, 0, 1)]:
        for a in [(0, 0), (1, 1), (0, 1)]:
            h = inst.hardware_state(m, a, 0)
            got = reachable_states(inst.H, h)
            seen, todo = {h}, deque([h])
            while todo:
                nxt = inst.H.next(todo.popleft())
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
            assert got == seen


def test_lasso_shape():
    T = system({0: 1, 1: 2, 2: 1}, {0: "a", 1: "b", 2: "c"})
    path, loop = lasso(T, 0)
    assert path == [0, 1, 2] and loop == 1


def test_obs_equality_is_structural():
    assert cache([1, 2]) == cache((1, 2))
    assert cache((1, 2)) != cache((2, 1))
    assert address(3) == Obs("address", 3)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12))
def test_prefix_shift_invariance(seed, n):
    T = random_system(random.Random(seed), 6, 3)
    for s in T.states:
        assert trace_prefix(T, s, n).observations == (T.leak(s),) + trace_prefix(T, T.next(s), n - 1).observations


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_reachable_set_closed(seed):
    T = random_system(random.Random(seed), 8, 2)
    for s in T.states:
        R = reachable_states(T, s)
        assert all(T.next(x) in R for x in R)
