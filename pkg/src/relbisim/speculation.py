"""Branch speculation: predictor-driven hardware and the always-mispredict contract.

Both machines carry a speculation window ``w`` (``inf`` outside
speculation, and ``inf - 1 == inf``).  The hardware follows a fixed
predictor table and learns the real outcome only when the window runs
out; the contract always takes the wrong direction first and then rolls
back to the correct state it saved at the branch.

A pc outside the program halts the machine when it is not speculating.
While speculating, such a pc is an idle step: the window still counts
down so that rollback or commit happens on schedule.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .isa import (
    DEFAULT_DOMAIN, ArchState, Beqz, Domain, HwState, Program, arch_step,
    contract_obs, fetch, hw_step, locations,
)
from .lts import HALT, UNIT, Obs, TransitionSystem, branch, cache, encode_partial_step
from .oracle import Quad, QuadRelation
from .symbolic import force

INF = float("inf")
JUMP, NEXT = "jump", "next"


class SpecHwState(NamedTuple):
    s: HwState
    w: float
    cp: Optional[tuple]  # (prediction correct?, correct post-branch state)


class AMState(NamedTuple):
    sigma: ArchState
    w: float
    sb: Optional[ArchState]


@dataclass(frozen=True)
class Predictor:
    """A pc-indexed prediction table with a default for unlisted locations."""

    table: tuple = ()
    default: str = NEXT
    name: str = ""

    def __post_init__(self):
        for pc, d in self.table:
            if d not in (JUMP, NEXT) or pc < 0:
                raise ValueError(f"bad predictor entry {pc} {d}")
        if self.default not in (JUMP, NEXT):
            raise ValueError(f"bad default prediction {self.default!r}")

    def __call__(self, pc: int) -> str:
        for p, d in self.table:
            if p == pc:
                return d
        return self.default

    @classmethod
    def constant(cls, d: str) -> "Predictor":
        return cls((), d, f"always-{d}")

    @classmethod
    def mixed(cls, P: Program) -> "Predictor":
        """Jump at even locations, fall through at odd ones."""
        return cls(tuple((pc, JUMP if pc % 2 == 0 else NEXT) for pc in locations(P)), NEXT, "mixed")

    @classmethod
    def parse(cls, text: str) -> "Predictor":
        entries = []
        for ln, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].split()
            if not line:
                continue
            if len(line) != 2 or not line[0].isdigit() or line[1] not in (JUMP, NEXT):
                raise ValueError(f"line {ln}: expected 'PC jump|next'")
            entries.append((int(line[0]), line[1]))
        return cls(tuple(entries), NEXT, "file")

    def __str__(self):
        return self.name or ",".join(f"{p}:{d}" for p, d in self.table)


def spec_hw_next_leak(P: Program, phi: Predictor, w: int, st: SpecHwState,
                      dom: Domain = DEFAULT_DOMAIN) -> Optional[tuple]:
    """One step of the speculating hardware, or None when it has halted."""
    s, om, cp = st
    if om == 0:
        ok, sb = cp
        if not ok:
            return SpecHwState(HwState(sb, s.c), INF, None), cache(s.c)
        return SpecHwState(s, INF, None), cache(s.c)
    i = fetch(P, s.pc)
    if i is None:
        if cp is None:
            return None
        return SpecHwState(s, om - 1, cp), cache(s.c)
    if cp is not None or type(i) is not Beqz:
        s2, o = hw_step(s, i, dom)
        return SpecHwState(s2, om - 1, cp), o
    correct = arch_step(s.arch, i, dom)
    target = s.pc + 1 if phi(s.pc) == NEXT else i.l
    return SpecHwState(s.with_pc(target), w, (correct.pc == target, correct)), cache(s.c)


def am_next_leak(P: Program, w: int, st: AMState, dom: Domain = DEFAULT_DOMAIN) -> Optional[tuple]:
    """One step of the always-mispredict contract, or None when it has halted."""
    sigma, om, sb = st
    if om == 0:
        return AMState(sb, INF, None), UNIT
    i = fetch(P, sigma.pc)
    if i is None:
        if sb is None:
            return None
        return AMState(sigma, om - 1, sb), UNIT
    if sb is not None or type(i) is not Beqz:
        return AMState(arch_step(sigma, i, dom), om - 1, sb), contract_obs(sigma, i, dom)
    correct = arch_step(sigma, i, dom)
    taken = force(sigma.reg(i.x)) == 0
    wrong = sigma.pc + 1 if taken else i.l
    return AMState(sigma.with_pc(wrong), w, correct), branch(taken)


@dataclass
class AMInstance:
    P: Program
    phi: Predictor
    w: int
    dom: Domain
    C: TransitionSystem = field(repr=False)
    H: TransitionSystem = field(repr=False)

    def contract_state(self, m, a, pc) -> AMState:
        return AMState(ArchState(tuple(m), tuple(a), pc), INF, None)

    def hardware_state(self, m, a, pc, c=()) -> SpecHwState:
        return SpecHwState(HwState(ArchState(tuple(m), tuple(a), pc), tuple(c)), INF, None)

    def initial_quad(self, m1, a1, m2, a2, pc, c=()) -> Quad:
        return Quad(self.contract_state(m1, a1, pc), self.contract_state(m2, a2, pc),
                    self.hardware_state(m1, a1, pc, c), self.hardware_state(m2, a2, pc, c))

    def delta_hardware(self) -> TransitionSystem:
        """Hardware with caches stripped, leaking what each step adds to the cache.

        For two states that start from the same cache, the cache-snapshot
        traces are equal exactly when these traces are equal, and this
        system is finite whenever the value domain is.
        """
        H = self.H

        def step(st):
            nxt = H.next(st)
            grown = nxt.s.c[: len(nxt.s.c) - len(st.s.c)]
            return nxt._replace(s=nxt.s._replace(c=())), Obs("delta", grown)

        return TransitionSystem.from_step(step, name="spec-hw-delta")


def build_am_instance(P: Program, phi: Predictor, w: int = 2,
                      dom: Domain = DEFAULT_DOMAIN) -> AMInstance:
    if not P:
        raise ValueError("empty program")
    if w < 1:
        raise ValueError("speculation window must be at least 1")
    C = encode_partial_step(lambda st: am_next_leak(P, w, st, dom), lambda st: HALT, name="am-contract")
    H = encode_partial_step(lambda st: spec_hw_next_leak(P, phi, w, st, dom),
                            lambda st: cache(st.s.c), name="spec-hw")
    return AMInstance(P, phi, w, dom, C, H)


def _am_member(q) -> bool:
    s1, s2, h1, h2 = q
    if not (s1.sb is None and s2.sb is None and h1.cp is None and h2.cp is None):
        return False
    if not (s1.w == INF and s2.w == INF and h1.w == INF and h2.w == INF):
        return False
    if s1.sigma.pc != s2.sigma.pc:
        return False
    return s1.sigma == h1.s.arch and s2.sigma == h2.s.arch and h1.s.c == h2.s.c


AM_INVARIANT = QuadRelation.intensional("I-am", _am_member)
