"""Hand-built counterexamples, each checked against the claim it illustrates."""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import script as S
from .kernel import Goal, check_script
from .lts import TransitionSystem, named
from .oracle import (
    TOP, Quad, close_quads, compute_rbisim, compute_rbisim_lockstep,
    compute_rbisim_relaxed, full_product, rel_trace_eq,
)
from .random_systems import random_instance
from .upto import apply_augment_hardware_leakage, search_lockstep_proof


def _system(edges: dict, leaks: dict, name: str) -> TransitionSystem:
    return TransitionSystem.from_tables(edges, {s: named(o) for s, o in leaks.items()}, name)


def lockstep_instance():
    """Contract pair agreeing on obsA then splitting on obsB/obsC; hardware leaking obsD/obsE."""
    C = _system({"s1": "s1'", "s1'": "end", "s2": "s2'", "s2'": "end", "end": "end"},
                {"s1": "A", "s1'": "B", "s2": "A", "s2'": "C", "end": "Z"}, "C")
    H = _system({"h1": "h1", "h2": "h2"}, {"h1": "D", "h2": "E"}, "H")
    return C, H, Quad("s1", "s2", "h1", "h2")


def augment_instance():
    """h1'/h2' agree once then split; h1/h2 differ immediately; one contract state."""
    C = _system({"s": "s"}, {"s": "A"}, "C")
    H = _system({"h1'": "b", "h2'": "c", "b": "b", "c": "c", "h1": "h1", "h2": "h2"},
                {"h1'": "A", "h2'": "A", "b": "B", "c": "C", "h1": "D", "h2": "E"}, "H")
    return C, H


@dataclass
class GalleryReport:
    name: str
    claim: str
    facts: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.facts.get(k) == v for k, v in self.expected.items())

    def lines(self) -> list:
        out = [f"{self.name}: {self.claim}"]
        for k, v in self.facts.items():
            mark = "" if k not in self.expected else ("  ok" if self.expected[k] == v else f"  EXPECTED {self.expected[k]}")
            out.append(f"  {k}: {v}{mark}")
        out.append(f"  => {'PASS' if self.passed else 'FAIL'}")
        return out


def lockstep_incomplete() -> GalleryReport:
    C, H, q = lockstep_instance()
    U = close_quads(C, H, [q])
    r = GalleryReport("lockstep-incomplete",
                      "relative trace equality holds but lockstep relative bisimilarity misses it")
    r.facts["oracle"] = rel_trace_eq(C, H, q)
    r.facts["lockstep"] = q in compute_rbisim_lockstep(C, H, U)
    r.facts["rbisim"] = q in compute_rbisim(C, H, U)
    r.expected = {"oracle": True, "lockstep": False, "rbisim": True}
    return r


def relaxed_vacuous(seed: int = 7) -> GalleryReport:
    rng = random.Random(seed)
    C, H = random_instance(rng, max_states=4, max_obs=3)
    U = full_product(C, H)
    rel = compute_rbisim_relaxed(C, H, U)
    truth = sum(rel_trace_eq(C, H, q) for q in U)
    r = GalleryReport("relaxed-vacuous", "coinduction over independent contract steps relates every quad")
    r.facts["universe"] = len(U)
    r.facts["relaxed"] = len(rel)
    r.facts["oracle-true"] = truth
    r.facts["relaxed == universe"] = len(rel) == len(U)
    r.facts["relates refuted quads"] = truth < len(rel)
    r.expected = {"relaxed == universe": True}
    return r


def augment_unsound() -> GalleryReport:
    C, H = augment_instance()
    first = S.loads("(hstep (cycle))")
    second = S.loads("(cstep (cleak))")
    g1 = Goal(Quad("s", "s", "h1'", "h2'"), (TOP,), True)
    g2 = Quad("h1'", "h2'", "h1", "h2")
    third = Quad("s", "s", "h1", "h2")
    r = GalleryReport("augment-unsound",
                      "composing with a non-lockstep hardware-side proof would prove a false claim")
    r.facts["first quintuple"] = check_script(C, H, g1, first).accepted
    r.facts["second quintuple (non-lockstep)"] = check_script(H, H, g2, second).accepted
    r.facts["second quintuple (lockstep)"] = search_lockstep_proof(H, H, g2) is not None
    r.facts["third quintuple oracle"] = rel_trace_eq(C, H, third)
    goal = Goal(third, (TOP,), True)
    try:
        apply_augment_hardware_leakage(H, goal, "h1'", "h2'", second)
        verdict = "accepted"
    except Exception as e:  # KernelError carries the reason
        verdict = getattr(getattr(e, "failure", None), "reason", type(e).__name__)
    r.facts["restricted rule"] = verdict
    r.expected = {
        "first quintuple": True,
        "second quintuple (non-lockstep)": True,
        "second quintuple (lockstep)": False,
        "third quintuple oracle": False,
        "restricted rule": "non-lockstep-side-proof",
    }
    return r


def guarded_cycle_rejected() -> GalleryReport:
    C, H = augment_instance()
    q = Quad("s", "s", "h1", "h2")
    v = check_script(C, H, Goal(q, (TOP,), True), S.loads("(cstep (cycle))"))
    r = GalleryReport("guarded-cycle-rejected",
                      "closing a cycle before any hardware step is refused")
    r.facts["oracle"] = rel_trace_eq(C, H, q)
    r.facts["accepted"] = v.accepted
    r.facts["reason"] = None if v.accepted else v.failure.reason
    r.expected = {"oracle": False, "accepted": False, "reason": "side-condition-violated"}
    return r


GALLERY = {
    "lockstep-incomplete": lockstep_incomplete,
    "relaxed-vacuous": relaxed_vacuous,
    "augment-unsound": augment_unsound,
    "guarded-cycle-rejected": guarded_cycle_rejected,
}


def run_counterexample(name: str) -> GalleryReport:
    if name not in GALLERY:
        raise KeyError(f"unknown gallery entry {name!r}; choose from {', '.join(GALLERY)}")
    return GALLERY[name]()
