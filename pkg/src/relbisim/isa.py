"""A three-instruction ISA: architectural and cache-leaking hardware semantics.

Instructions are ``load x1 x2``, ``add x1 x2 k`` and ``beqz x l`` over two
registers.  Memory is a tuple of ``M`` cells and is never written.  Values
and addresses follow a :class:`Domain`: load addresses clamp negatives to
zero and are reduced modulo ``M``; with a bounded value range, ``add``
wraps into that range so enumeration stays finite.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

from .lts import UNIT, Obs, address, branch, cache
from .symbolic import force

REGISTERS = ("r1", "r2")
_REG = {"r1": 0, "r2": 1}


class Load(NamedTuple):
    x1: str
    x2: str

    def __str__(self):
        return f"load {self.x1} {self.x2}"


class Add(NamedTuple):
    x1: str
    x2: str
    k: int

    def __str__(self):
        return f"add {self.x1} {self.x2} {self.k}"


class Beqz(NamedTuple):
    x: str
    l: int

    def __str__(self):
        return f"beqz {self.x} {self.l}"


Instruction = Union[Load, Add, Beqz]
Program = tuple


class ArchState(NamedTuple):
    m: tuple
    a: tuple
    pc: int

    def reg(self, x: str):
        return self.a[_REG[x]]

    def set_reg(self, x: str, v) -> "ArchState":
        a = list(self.a)
        a[_REG[x]] = v
        return ArchState(self.m, tuple(a), self.pc)

    def with_pc(self, pc: int) -> "ArchState":
        return ArchState(self.m, self.a, pc)


class HwState(NamedTuple):
    """Architectural state plus a cache of addresses, most recent first."""

    arch: ArchState
    c: tuple

    @property
    def pc(self) -> int:
        return self.arch.pc

    def with_pc(self, pc: int) -> "HwState":
        return HwState(self.arch.with_pc(pc), self.c)


@dataclass(frozen=True)
class Domain:
    """Memory size and value range.  ``values=None`` means unbounded integers."""

    M: int = 4
    values: Optional[tuple] = (0, 1, 2)

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("memory size must be positive")
        if self.values is not None:
            vs = tuple(self.values)
            if not vs or list(vs) != list(range(vs[0], vs[0] + len(vs))):
                raise ValueError("value range must be a non-empty contiguous range")
            object.__setattr__(self, "values", vs)

    def wrap(self, v: int) -> int:
        if self.values is None:
            return v
        lo, n = self.values[0], len(self.values)
        return lo + (v - lo) % n

    def addr(self, v) -> int:
        return max(force(v), 0) % self.M


DEFAULT_DOMAIN = Domain()


def load_address(sigma: ArchState, i: Load, dom: Domain = DEFAULT_DOMAIN) -> int:
    return dom.addr(sigma.reg(i.x2))


def arch_step(sigma: ArchState, i: Instruction, dom: Domain = DEFAULT_DOMAIN) -> ArchState:
    """One architectural step of ``i`` (the program counter is not consulted)."""
    if type(i) is Load:
        v = sigma.m[load_address(sigma, i, dom)]
        return ArchState(sigma.m, _set(sigma.a, i.x1, v), sigma.pc + 1)
    if type(i) is Add:
        v = dom.wrap(force(sigma.reg(i.x2)) + i.k)
        return ArchState(sigma.m, _set(sigma.a, i.x1, v), sigma.pc + 1)
    if type(i) is Beqz:
        pc = i.l if force(sigma.reg(i.x)) == 0 else sigma.pc + 1
        return ArchState(sigma.m, sigma.a, pc)
    raise TypeError(f"not an instruction: {i!r}")


def _set(a: tuple, x: str, v) -> tuple:
    return (v, a[1]) if x == "r1" else (a[0], v)


def hw_step(h: HwState, i: Instruction, dom: Domain = DEFAULT_DOMAIN) -> tuple:
    """Vanilla hardware step: leak the cache, prepend load addresses."""
    obs = cache(h.c)
    if type(i) is Load:
        adr = load_address(h.arch, i, dom)
        return HwState(arch_step(h.arch, i, dom), (adr,) + h.c), obs
    return HwState(arch_step(h.arch, i, dom), h.c), obs


def contract_obs(sigma: ArchState, i: Instruction, dom: Domain = DEFAULT_DOMAIN) -> Obs:
    """Sequential-contract leak of one instruction: address, branch outcome or nothing."""
    if type(i) is Load:
        return address(load_address(sigma, i, dom))
    if type(i) is Beqz:
        return branch(force(sigma.reg(i.x)) == 0)
    return UNIT


def fetch(P: Program, pc: int) -> Optional[Instruction]:
    return P[pc] if 0 <= pc < len(P) else None


def locations(P: Program) -> range:
    """Every pc an execution of ``P`` can reach: 0..len(P) and all branch targets."""
    top = len(P)
    for i in P:
        if type(i) is Beqz:
            top = max(top, i.l)
    return range(top + 1)


def cache_growth(before: HwState, after: HwState) -> Obs:
    """The entries a step prepended to the cache (at most one for every model here)."""
    return Obs("delta", after.c[: len(after.c) - len(before.c)])


# ---------------------------------------------------------------------------
# assembly text


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line, self.col = line, col


_INT = re.compile(r"^[+-]?\d+$")


def _tokens(line: str):
    for m in re.finditer(r"\S+", line):
        yield m.group(), m.start() + 1


def parse_program(text: str) -> Program:
    prog = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        toks = list(_tokens(line))
        if not toks:
            continue
        op, col = toks[0]
        args = toks[1:]
        arity = {"load": 2, "add": 3, "beqz": 2}.get(op)
        if arity is None:
            raise ParseError(f"unknown instruction {op!r}", ln, col)
        if len(args) != arity:
            raise ParseError(f"{op} takes {arity} operands, got {len(args)}", ln, col)

        def reg(k):
            tok, c = args[k]
            if tok not in _REG:
                raise ParseError(f"expected a register r1|r2, got {tok!r}", ln, c)
            return tok

        def num(k, natural=False):
            tok, c = args[k]
            if not _INT.match(tok) or (natural and tok.startswith("-")):
                raise ParseError(f"expected {'a location' if natural else 'an integer'}, got {tok!r}", ln, c)
            return int(tok)

        if op == "load":
            prog.append(Load(reg(0), reg(1)))
        elif op == "add":
            prog.append(Add(reg(0), reg(1), num(2)))
        else:
            prog.append(Beqz(reg(0), num(1, natural=True)))
    if not prog:
        raise ParseError("empty program", 1, 1)
    return tuple(prog)


def format_program(P: Sequence[Instruction]) -> str:
    return "".join(f"{i}\n" for i in P)


def swap_registers(P: Program) -> Program:
    """Rename r1 <-> r2 throughout ``P``."""
    s = {"r1": "r2", "r2": "r1"}
    out = []
    for i in P:
        if type(i) is Load:
            out.append(Load(s[i.x1], s[i.x2]))
        elif type(i) is Add:
            out.append(Add(s[i.x1], s[i.x2], i.k))
        else:
            out.append(Beqz(s[i.x], i.l))
    return tuple(out)


def has_branch(P: Program) -> bool:
    return any(type(i) is Beqz for i in P)


def instruction_alphabet(max_len: int, k: int = 1) -> list:
    """Loads and adds over all register pairs, and branches to every location 0..max_len."""
    out = [Load(a, b) for a in REGISTERS for b in REGISTERS]
    out += [Add(a, b, k) for a in REGISTERS for b in REGISTERS]
    out += [Beqz(x, l) for x in REGISTERS for l in range(max_len + 1)]
    return out
