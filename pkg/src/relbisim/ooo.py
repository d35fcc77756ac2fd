"""Out-of-order execution with a one-instruction buffer, and the sequential contract.

A scheduler decides per pc whether to execute the current instruction or
to delay it: the next instruction runs first and the delayed one sits in
the buffer, to be executed on the following step with the pc put back to
where the second instruction left it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import NamedTuple, Optional

from .isa import (
    DEFAULT_DOMAIN, ArchState, Beqz, Domain, HwState, Instruction, Program,
    arch_step, contract_obs, fetch, hw_step,
)
from .lts import HALT, Obs, TransitionSystem, cache, encode_partial_step
from .oracle import Quad, QuadRelation

EXECUTE, DELAY = "execute", "delay"
PC = "pc"  # destination of a branch; never equal to a register name


class InvalidScheduler(ValueError):
    pass


class OooState(NamedTuple):
    s: HwState
    b: Optional[Instruction]


def src(i: Instruction) -> str:
    return i.x if type(i) is Beqz else i.x2


def des(i: Instruction) -> str:
    return PC if type(i) is Beqz else i.x1


def delayable(i1: Instruction, i2: Instruction) -> bool:
    return (type(i1) is not Beqz and des(i1) != des(i2)
            and des(i1) != src(i2) and src(i1) != des(i2))


@dataclass(frozen=True)
class Scheduler:
    delays: frozenset = frozenset()
    name: str = ""

    def __call__(self, pc: int) -> str:
        return DELAY if pc in self.delays else EXECUTE

    @classmethod
    def parse(cls, text: str) -> "Scheduler":
        delays = set()
        for ln, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].split()
            if not line:
                continue
            if len(line) != 2 or not line[0].isdigit() or line[1] not in (EXECUTE, DELAY):
                raise ValueError(f"line {ln}: expected 'PC execute|delay'")
            if line[1] == DELAY:
                delays.add(int(line[0]))
        return cls(frozenset(delays), "file")

    def __str__(self):
        return self.name or ("delay@" + ",".join(map(str, sorted(self.delays))) if self.delays else "in-order")


def delay_points(P: Program) -> list:
    return [pc for pc in range(len(P) - 1) if delayable(P[pc], P[pc + 1])]


def check_scheduler(P: Program, sigma: Scheduler):
    for pc in sorted(sigma.delays):
        if not (0 <= pc < len(P) - 1) or not delayable(P[pc], P[pc + 1]):
            raise InvalidScheduler(f"delay at pc {pc} is not allowed for this program")


def valid_schedulers(P: Program) -> list:
    """Every scheduler that delays only at delayable locations."""
    pts = delay_points(P)
    out = []
    for bits in product((False, True), repeat=len(pts)):
        out.append(Scheduler(frozenset(p for p, b in zip(pts, bits) if b)))
    return out


def ooo_next_leak(P: Program, sigma: Scheduler, st: OooState, dom: Domain = DEFAULT_DOMAIN,
                  checked: bool = True) -> Optional[tuple]:
    """One out-of-order step, or None when the machine has halted.

    With ``checked=False`` the Delay rule fires without the delayable
    test; this exists only to show what goes wrong without it.
    """
    s, buf = st
    if buf is not None:
        s2, o = hw_step(s, buf, dom)
        return OooState(s2.with_pc(s.pc), None), o
    i = fetch(P, s.pc)
    if i is None:
        return None
    if sigma(s.pc) == DELAY:
        i2 = fetch(P, s.pc + 1)
        if i2 is not None and (not checked or delayable(i, i2)):
            s2, o = hw_step(s.with_pc(s.pc + 1), i2, dom)
            return OooState(s2, i), o
        if checked:
            raise InvalidScheduler(f"delay at pc {s.pc} is not allowed")
    s2, o = hw_step(s, i, dom)
    return OooState(s2, None), o


def seq_next_leak(P: Program, sigma: ArchState, dom: Domain = DEFAULT_DOMAIN) -> Optional[tuple]:
    i = fetch(P, sigma.pc)
    if i is None:
        return None
    return arch_step(sigma, i, dom), contract_obs(sigma, i, dom)


@dataclass
class OooInstance:
    P: Program
    sched: Scheduler
    dom: Domain
    C: TransitionSystem = field(repr=False)
    H: TransitionSystem = field(repr=False)

    def contract_state(self, m, a, pc) -> ArchState:
        return ArchState(tuple(m), tuple(a), pc)

    def hardware_state(self, m, a, pc, c=()) -> OooState:
        return OooState(HwState(ArchState(tuple(m), tuple(a), pc), tuple(c)), None)

    def initial_quad(self, m1, a1, m2, a2, pc, c=()) -> Quad:
        return Quad(self.contract_state(m1, a1, pc), self.contract_state(m2, a2, pc),
                    self.hardware_state(m1, a1, pc, c), self.hardware_state(m2, a2, pc, c))

    def delta_hardware(self) -> TransitionSystem:
        """Cache-stripped hardware leaking each step's cache growth (see the speculation model)."""
        H = self.H

        def step(st):
            nxt = H.next(st)
            grown = nxt.s.c[: len(nxt.s.c) - len(st.s.c)]
            return nxt._replace(s=nxt.s._replace(c=())), Obs("delta", grown)

        return TransitionSystem.from_step(step, name="ooo-hw-delta")


def build_ooo_instance(P: Program, sched: Scheduler, dom: Domain = DEFAULT_DOMAIN,
                       checked: bool = True) -> OooInstance:
    if not P:
        raise ValueError("empty program")
    if checked:
        check_scheduler(P, sched)
    C = encode_partial_step(lambda st: seq_next_leak(P, st, dom), lambda st: HALT, name="seq-contract")
    H = encode_partial_step(lambda st: ooo_next_leak(P, sched, st, dom, checked),
                            lambda st: cache(st.s.c), name="ooo-hw")
    return OooInstance(P, sched, dom, C, H)


def _ooo_member(q) -> bool:
    s1, s2, h1, h2 = q
    if h1.b is not None or h2.b is not None:
        return False
    if s1.pc != s2.pc:
        return False
    return s1 == h1.s.arch and s2 == h2.s.arch and h1.s.c == h2.s.c


OOO_INVARIANT = QuadRelation.intensional("I-ooo", _ooo_member)
