from itertools import product

import pytest

from relbisim.isa import ArchState, Domain, HwState, arch_step, contract_obs, hw_step, instruction_alphabet, parse_program
from relbisim.lts import UNIT, address, branch, cache, trace_prefix
from relbisim.ooo import (
    InvalidScheduler, OooState, Scheduler, build_ooo_instance, delayable, ooo_next_leak,
    seq_next_leak, valid_schedulers,
)
from relbisim.isa import Add, Beqz, Load

DOM = Domain(4, (0, 1, 2))


def hw(a, m=(0, 1, 2, 0), pc=0, c=()):
    return HwState(ArchState(tuple(m), tuple(a), pc), tuple(c))


def test_delayable_examples():
    assert not delayable(Beqz("r1", 0), Add("r2", "r2", 1))
    assert not delayable(Load("r1", "r2"), Load("r2", "r1"))
    assert delayable(Add("r1", "r1", 1), Load("r2", "r2"))
    assert delayable(Load("r1", "r1"), Beqz("r2", 0))
    assert not delayable(Load("r1", "r1"), Beqz("r1", 0))


def test_execute_matches_vanilla():
    P = parse_program("add r1 r2 1")
    st = OooState(hw((0, 1)), None)
    nxt, o = ooo_next_leak(P, Scheduler(), st, DOM)
    ref, ro = hw_step(st.s, P[0], DOM)
    assert nxt == OooState(ref, None) and o == ro


def test_delay_then_execute_heap():
    P = parse_program("add r1 r1 1\nload r2 r2")
    sched = Scheduler(frozenset({0}))
    st = OooState(hw((0, 2)), None)
    s1, o1 = ooo_next_leak(P, sched, st, DOM)
    assert s1.b == P[0] and s1.s.c == (2,) and s1.s.pc == 2 and o1 == cache(())
    s2, o2 = ooo_next_leak(P, sched, s1, DOM)
    assert s2.b is None and s2.s.pc == 2 and s2.s.arch.a == (1, 2) and o2 == cache((2,))


def test_invalid_scheduler_rejected():
    P = parse_program("beqz r1 0\nadd r2 r2 1")
    with pytest.raises(InvalidScheduler):
        build_ooo_instance(P, Scheduler(frozenset({0})))
    with pytest.raises(InvalidScheduler):
        build_ooo_instance(P, Scheduler(frozenset({5})))


def test_valid_schedulers_enumerate_delay_points():
    P = parse_program("add r1 r1 1\nload r2 r2\nload r1 r1")
    assert {frozenset(s.delays) for s in valid_schedulers(P)} == {frozenset(), frozenset({0}), frozenset({1})} | {frozenset({0, 1})}


def test_swapping_delayable_pairs():
    wide = Domain(4, None)
    alphabet = instruction_alphabet(3, 1)
    for i1, i2 in product(alphabet, repeat=2):
        if not delayable(i1, i2):
            continue
        for a in product((0, 1, 2), repeat=2):
            h = hw(a, m=(2, 0, 1, 1), c=(3,))
            s = h.arch
            x, _ = hw_step(h, i1, wide)
            inorder, _ = hw_step(x, i2, wide)
            y, _ = hw_step(h.with_pc(h.pc + 1), i2, wide)
            swapped, _ = hw_step(y, i1, wide)
            swapped = swapped.with_pc(y.pc)
            assert swapped.arch == inorder.arch
            assert sorted(swapped.c) == sorted(inorder.c)
            if (type(i1) is Load) + (type(i2) is Load) <= 1:
                assert swapped.c == inorder.c
            # each contract leak is unchanged by the swap
            o1 = contract_obs(s, i1, wide)
            o2 = contract_obs(arch_step(s, i1, wide), i2, wide)
            assert contract_obs(s.with_pc(s.pc + 1), i2, wide) == o2
            assert contract_obs(y.arch, i1, wide) == o1


def test_sequential_contract_leaks():
    P = parse_program("load r1 r2\nadd r1 r1 1\nbeqz r1 0")
    s = ArchState((0, 0, 0, 0), (5, 2), 0)
    assert seq_next_leak(P, s, DOM)[1] == address(2)
    assert seq_next_leak(P, s._replace(pc=1), DOM)[1] == UNIT
    assert seq_next_leak(P, s._replace(pc=2), DOM)[1] == branch(False)


def test_in_order_scheduler_is_vanilla_hardware():
    P = parse_program("load r1 r2\nbeqz r1 3\nload r2 r1")
    inst = build_ooo_instance(P, Scheduler(), DOM)
    for a in product((0, 1, 2), repeat=2):
        h = hw(a)
        got = trace_prefix(inst.H, OooState(h, None), 8).observations
        want, cur = [], h
        for _ in range(8):
            if 0 <= cur.pc < len(P):
                cur, o = hw_step(cur, P[cur.pc], DOM)
            else:
                o = cache(cur.c)
            want.append(o)
        assert list(got) == want


def test_delayed_loads_reach_the_cache_in_swapped_order():
    P = parse_program("load r1 r1\nload r2 r2")
    inst = build_ooo_instance(P, Scheduler(frozenset({0})), DOM)
    m, a = (0, 1, 2, 0), (1, 2)
    c_tr = trace_prefix(inst.C, inst.contract_state(m, a, 0), 2).observations
    h_tr = trace_prefix(inst.H, inst.hardware_state(m, a, 0), 3).observations
    assert c_tr == (address(1), address(2))
    assert h_tr[-1] == cache((1, 2))  # most recent first: 1 was loaded last
