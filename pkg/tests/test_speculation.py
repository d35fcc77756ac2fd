import random

import pytest

from relbisim.isa import ArchState, Domain, HwState, hw_step, parse_program
from relbisim.lts import HALT, UNIT, address, branch, cache, trace_prefix
from relbisim.speculation import (
    INF, JUMP, NEXT, AMState, Predictor, SpecHwState, am_next_leak, build_am_instance,
    spec_hw_next_leak,
)

WIDE = Domain(4, None)
GADGET = parse_program("beqz r1 3\nload r2 r2\nload r1 r2\nload r1 r1\n")


def arch(a, m=(2, 3, 1, 0), pc=0):
    return ArchState(tuple(m), tuple(a), pc)


def test_hardware_rollback_keeps_cache():
    sb = arch((1, 1), pc=3)
    st = SpecHwState(HwState(arch((0, 0), pc=2), (4, 5)), 0, (False, sb))
    nxt, o = spec_hw_next_leak(GADGET, Predictor.constant(NEXT), 2, st)
    assert nxt == SpecHwState(HwState(sb, (4, 5)), INF, None)
    assert o == cache((4, 5))


def test_hardware_commit():
    s = HwState(arch((0, 0), pc=2), (4,))
    nxt, o = spec_hw_next_leak(GADGET, Predictor.constant(NEXT), 2, SpecHwState(s, 0, (True, arch((0, 0)))))
    assert nxt == SpecHwState(s, INF, None) and o == cache((4,))


def test_hardware_branch_next_mispredicted():
    st = SpecHwState(HwState(arch((0, 1)), ()), INF, None)
    nxt, o = spec_hw_next_leak(GADGET, Predictor.constant(NEXT), 2, st)
    assert nxt.s.pc == 1 and nxt.w == 2
    assert nxt.cp == (False, arch((0, 1), pc=3))
    assert o == cache(())


def test_hardware_branch_inside_speculation_just_steps():
    P = parse_program("beqz r1 2\nbeqz r1 0\nadd r1 r1 1")
    st = SpecHwState(HwState(arch((0, 0), pc=1), ()), 1, (False, arch((0, 0), pc=2)))
    nxt, _ = spec_hw_next_leak(P, Predictor.constant(JUMP), 2, st)
    assert nxt.s.pc == 0 and nxt.w == 0 and nxt.cp == st.cp


def test_contract_branch_goes_the_wrong_way():
    st = AMState(arch((0, 1)), INF, None)
    nxt, o = am_next_leak(GADGET, 2, st)
    assert o == branch(True)
    assert nxt.sigma.pc == 1 and nxt.w == 2 and nxt.sb == arch((0, 1), pc=3)


def test_contract_rollback_and_load_leak():
    sb = arch((1, 1), pc=3)
    nxt, o = am_next_leak(GADGET, 2, AMState(arch((0, 0), pc=2), 0, sb))
    assert nxt == AMState(sb, INF, None) and o == UNIT
    _, o = am_next_leak(GADGET, 2, AMState(arch((0, 2), pc=1), INF, None))
    assert o == address(2)


def test_gadget_contract_trace_matches_hand_simulation():
    inst = build_am_instance(GADGET, Predictor.constant(NEXT), 2, WIDE)
    s = inst.contract_state((2, 3, 1, 0), (0, 1), 0)
    # taken branch, two wrong-path loads, silent rollback, realigned load, halt
    expect = (branch(True), address(1), address(3), UNIT, address(0), HALT, HALT)
    assert trace_prefix(inst.C, s, 7).observations == expect


def test_gadget_hardware_traces_by_predictor():
    m, a = (2, 3, 1, 0), (0, 1)
    nxt = build_am_instance(GADGET, Predictor.constant(NEXT), 2, WIDE)
    jmp = build_am_instance(GADGET, Predictor.constant(JUMP), 2, WIDE)
    t_next = trace_prefix(nxt.H, nxt.hardware_state(m, a, 0), 7).observations
    t_jump = trace_prefix(jmp.H, jmp.hardware_state(m, a, 0), 7).observations
    assert t_next == (cache(()), cache(()), cache((1,)), cache((3, 1)), cache((3, 1)),
                      cache((0, 3, 1)), cache((0, 3, 1)))
    assert t_jump == (cache(()), cache(()), cache((0,)), cache((0,)), cache((0,)), cache((0,)), cache((0,)))


def test_correct_prediction_leaves_only_architectural_entries():
    rng = random.Random(3)
    for _ in range(50):
        m = tuple(rng.randrange(3) for _ in range(4))
        a = (rng.randrange(2), rng.randrange(3))
        taken = a[0] == 0
        good = build_am_instance(GADGET, Predictor.constant(JUMP if taken else NEXT), 2, WIDE)
        bad = build_am_instance(GADGET, Predictor.constant(NEXT if taken else JUMP), 2, WIDE)
        final = lambda inst: trace_prefix(inst.H, inst.hardware_state(m, a, 0), 12).observations[-1]
        # the architectural path of the gadget, run without speculation
        s, c = arch(a, m), ()
        while s.pc < len(GADGET):
            h, _ = hw_step(HwState(s, c), GADGET[s.pc], WIDE)
            s, c = h.arch, h.c
        assert final(good) == cache(c)
        got = final(bad).value
        assert got[: len(c)] == c and len(got) >= len(c)


def _walk(inst, start, n=40):
    out, st = [start], start
    for _ in range(n):
        st = inst.H.next(st)
        out.append(st)
    return out


def test_speculation_invariants_on_random_walks():
    rng = random.Random(7)
    for _ in range(60):
        P = tuple(rng.choice(parse_program("beqz r1 2\nbeqz r2 0\nload r1 r2\nadd r2 r1 1\nload r2 r2"))
                  for _ in range(rng.randint(1, 4)))
        w = rng.randint(1, 3)
        inst = build_am_instance(P, Predictor.mixed(P), w, Domain(4, (0, 1, 2)))
        m = tuple(rng.randrange(3) for _ in range(4))
        a = (rng.randrange(3), rng.randrange(3))
        states = _walk(inst, inst.hardware_state(m, a, 0))
        for x, y in zip(states, states[1:]):
            assert (x.w == INF) == (x.cp is None)
            assert x.cp is None or x.w <= w
            if x.cp is not None and y.cp is not None:
                assert y.cp == x.cp  # no second checkpoint while speculating
            if x.cp is not None and x.w == 0 and not x.cp[0]:
                assert y.s.c == x.s.c and y.s.arch == x.cp[1]
        cs = inst.contract_state(m, a, 0)
        prev = cs
        for _ in range(30):
            nxt = inst.C.next(prev)
            assert (prev.w == INF) == (prev.sb is None)
            if prev.sb is not None and prev.w == 0:
                assert nxt.sigma == prev.sb
            prev = nxt


def test_single_add_contract_trace():
    inst = build_am_instance(parse_program("add r1 r1 1"), Predictor.constant(NEXT), 2)
    s = inst.contract_state((0,) * 4, (0, 0), 0)
    assert trace_prefix(inst.C, s, 4).observations == (UNIT, HALT, HALT, HALT)


def test_predictor_file_and_validation():
    phi = Predictor.parse("# table\n0 jump\n3 next\n")
    assert phi(0) == JUMP and phi(3) == NEXT and phi(9) == NEXT
    with pytest.raises(ValueError):
        Predictor.parse("0 maybe")
    with pytest.raises(ValueError):
        build_am_instance(GADGET, phi, 0)
