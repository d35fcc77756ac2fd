import json
from itertools import product

import pytest

from relbisim.isa import REGISTERS, Domain, locations, parse_program, swap_registers
from relbisim.oracle import rel_trace_eq
from relbisim.ooo import Scheduler, build_ooo_instance
from relbisim.speculation import JUMP, NEXT, Predictor, build_am_instance
from relbisim.workbench import (
    ConfigError, Instance, InstanceConfig, check_instance, closure_check, enumerate_programs,
    fuzz_differential, instances, isa_rel_trace_eq, oracle_check, run_case_study,
)
from relbisim.ooo import OOO_INVARIANT

GADGET = parse_program("beqz r1 3\nload r2 r2\nload r1 r2\nload r1 r1\n")
RACE = parse_program("load r1 r2\nload r2 r1")


def _concrete_refuted(obj, dom):
    inputs = list(product(dom.values, repeat=dom.M + len(REGISTERS)))
    split = lambda x: (x[: dom.M], x[dom.M:])
    bad = 0
    for pc in locations(obj.P):
        for x, y in product(inputs, repeat=2):
            (m1, a1), (m2, a2) = split(x), split(y)
            q = obj.initial_quad(m1, a1, m2, a2, pc)
            bad += not rel_trace_eq(obj.C, obj.H, q)
    return len(locations(obj.P)) * len(inputs) ** 2, bad


@pytest.mark.parametrize("make", [
    lambda d: build_am_instance(GADGET, Predictor.constant(NEXT), 1, d),
    lambda d: build_am_instance(parse_program("load r1 r1\nbeqz r2 3\nadd r2 r1 1"), Predictor.constant(JUMP), 2, d),
    lambda d: build_am_instance(parse_program("add r1 r1 1\nbeqz r1 0"), Predictor.constant(NEXT), 2, d),
    lambda d: build_ooo_instance(RACE, Scheduler(frozenset({0})), d, checked=False),
    lambda d: build_ooo_instance(parse_program("add r1 r1 1\nload r2 r2"), Scheduler(frozenset({0})), d),
])
def test_lazy_oracle_agrees_with_concrete_enumeration(make):
    dom = Domain(2, (0, 1))
    obj = make(dom)
    quads, refuted, _, witness = oracle_check(obj, dom)
    assert (quads, refuted) == _concrete_refuted(obj, dom)
    assert (witness is None) == (refuted == 0)
    if witness is not None:
        assert not rel_trace_eq(obj.C, obj.H, witness)


def test_isa_oracle_decides_looping_programs():
    # the concrete caches grow forever here; the cache-growth view stays finite
    dom = Domain(2, (0, 1))
    P = parse_program("load r1 r2\nload r2 r1\nbeqz r1 0")
    obj = build_ooo_instance(P, Scheduler(frozenset({0})), dom, checked=False)
    inputs = list(product(dom.values, repeat=dom.M + len(REGISTERS)))
    bad = 0
    for pc in locations(P):
        for x, y in product(inputs, repeat=2):
            q = obj.initial_quad(x[:2], x[2:], y[:2], y[2:], pc)
            bad += not isa_rel_trace_eq(obj, q)
    quads, refuted, _, witness = oracle_check(obj, dom)
    assert bad == refuted > 0 and quads == len(locations(P)) * len(inputs) ** 2
    assert not isa_rel_trace_eq(obj, witness)


def test_straight_line_am_program_is_proved():
    cfg = InstanceConfig(program=parse_program("load r1 r2\nadd r2 r1 1"),
                         predictor=Predictor.constant(NEXT), windows=(1, 2))
    rep = run_case_study(cfg)
    assert rep.passed and rep.refuted == 0 and rep.proved == rep.checked > 0


@pytest.mark.parametrize("kind", [NEXT, JUMP])
def test_gadget_is_proved_under_both_predictors(kind):
    cfg = InstanceConfig(program=GADGET, predictor=Predictor.constant(kind), windows=(1, 2))
    rep = run_case_study(cfg)
    assert rep.passed and rep.proved == rep.checked


def test_invalid_scheduler_negative_control():
    cfg = InstanceConfig(model="ooo-seq", program=RACE, scheduler=Scheduler(frozenset({0})))
    res = check_instance(cfg, Instance(RACE, cfg.scheduler), checked=False)
    assert res.refuted > 0 and res.closure is False and not res.passed
    assert res.counterexample["diverges_at"] is not None
    obj = build_ooo_instance(RACE, cfg.scheduler, cfg.domain, checked=False)
    ok, _, why = closure_check(obj, OOO_INVARIANT, cfg.domain, 3)
    assert not ok and "no derivation" in why


def test_program_enumeration_and_symmetry():
    progs = list(enumerate_programs(2))
    assert len(set(progs)) == len(progs)
    assert all(swap_registers(P) in set(progs) for P in progs)
    full, covered = instances(InstanceConfig(model="ooo-seq", max_len=2, symmetry=False))
    reduced, covered2 = instances(InstanceConfig(model="ooo-seq", max_len=2))
    assert covered == covered2 == len(full) > len(reduced)
    am, am_cov = instances(InstanceConfig(max_len=1, windows=(1, 2)))
    assert am_cov == 2 * 3 * len(list(enumerate_programs(1)))


def test_config_validation():
    with pytest.raises(ConfigError):
        InstanceConfig(model="nope").validate()
    with pytest.raises(ConfigError):
        InstanceConfig(windows=(0,)).validate()
    with pytest.raises(ConfigError):
        InstanceConfig(model="ooo-seq", predictor=Predictor.constant(NEXT)).validate()
    with pytest.raises(ConfigError):
        InstanceConfig(values=()).validate()


def test_report_is_deterministic_json(tmp_path):
    cfg = InstanceConfig(model="ooo-seq", program=parse_program("add r1 r1 1\nload r2 r2"))
    a, b = run_case_study(cfg).to_dict(), run_case_study(cfg).to_dict()
    a.pop("seconds"), b.pop("seconds")
    assert a == b and a["schema"] == "relbisim-report/1" and a["passed"]
    rep = run_case_study(cfg)
    rep.dump_json(tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text())["checked"] == rep.checked


def test_fuzz_clean_kernel():
    rep = fuzz_differential(seed=0, trials=100)
    assert rep.refuted == 0 and rep.rejected == 0 and rep.proved > 0


def test_fuzz_needs_trials():
    with pytest.raises(ValueError):
        fuzz_differential(trials=0)


def test_fuzz_catches_the_mutation():
    rep = fuzz_differential(seed=0, trials=100, mutated=True)
    assert rep.refuted > 0 and rep.counterexample["kind"] == "soundness"
