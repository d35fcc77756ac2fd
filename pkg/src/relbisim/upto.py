"""Up-to reasoning: compatible functions, the derived rules and lockstep quintuples.

Only the six registered functions may enter accepted proofs.  Their
compatibility is proven elsewhere; here it is merely sampled.  Test-only
functions live in :data:`SANDBOX` and the kernel rejects them.

Each function has two faces.  ``admits(ctx, q, w)`` says whether the goal
quad ``q`` lies in ``f({w})`` and is what the kernel uses.  ``transform``
maps a whole set of quads and is what the compatibility sampler uses.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Optional

import numpy as np

from . import script as S
from .kernel import Checker, Failure, Goal, KernelError
from .oracle import (
    PairGraphVerdict, Quad, QuadRelation, QuadUniverse,
    compute_rbisim_lockstep, rbisim_functional, rel_trace_eq, traces_equal,
)

PROVEN = "proven"
TEST_ONLY = "test-only"


class UpToContext:
    """Precomputed equivalences over finite-mode systems, for set transforms."""

    def __init__(self, C, H):
        if C.states is None or H.states is None:
            raise ValueError("set transforms need finite-mode systems")
        self.C, self.H = C, H
        self.cstates = sorted(C.states, key=repr)
        self.hstates = sorted(H.states, key=repr)
        self._cls = {}
        self._reduce = None
        self._augment = None

    def classes(self, side: str) -> dict:
        """Map each state to the list of states with the same trace."""
        if side not in self._cls:
            T, states = (self.C, self.cstates) if side == "c" else (self.H, self.hstates)
            out = {}
            for a in states:
                out[a] = [b for b in states if traces_equal(T, a, b).equal]
            self._cls[side] = out
        return self._cls[side]

    def reduce_preimages(self) -> dict:
        """(s1', s2') -> pairs (s1, s2) with (s1, s2, s1', s2') relatively bisimilar."""
        if self._reduce is None:
            out = {}
            for a, b, c, d in product(self.cstates, repeat=4):
                if rel_trace_eq(self.C, self.C, (a, b, c, d)):
                    out.setdefault((c, d), []).append((a, b))
            self._reduce = out
        return self._reduce

    def augment_preimages(self) -> dict:
        """(h1', h2') -> pairs (h1, h2) with (h1', h2', h1, h2) lockstep related."""
        if self._augment is None:
            quads = [Quad(*t) for t in product(self.hstates, repeat=4)]
            rel = compute_rbisim_lockstep(self.H, self.H, quads)
            out = {}
            for q in rel.members:
                out.setdefault((q.s1, q.s2), []).append((q.h1, q.h2))
            self._augment = out
        return self._augment


@dataclass(frozen=True)
class UpToFunction:
    name: str
    transform: Callable
    admits: Callable
    status: str = PROVEN


def _swap_c(q):
    return Quad(q.s2, q.s1, q.h1, q.h2)


def _swap_h(q):
    return Quad(q.s1, q.s2, q.h2, q.h1)


def _t_cswap(ctx, X):
    return {_swap_c(x) for x in X}


def _t_hswap(ctx, X):
    return {_swap_h(x) for x in X}


def _t_cleq(ctx, X):
    cls = ctx.classes("c")
    return {Quad(s, x.s2, x.h1, x.h2) for x in X for s in cls[x.s1]}


def _t_hleq(ctx, X):
    # The function is {(s1,s2,h1,h2) | h1 ~ h1' and (s1,s2,h1',h2) in R}.
    cls = ctx.classes("h")
    return {Quad(x.s1, x.s2, h, x.h2) for x in X for h in cls[x.h1]}


def _t_reduce(ctx, X):
    pre = ctx.reduce_preimages()
    return {Quad(a, b, x.h1, x.h2) for x in X for a, b in pre.get((x.s1, x.s2), ())}


def _t_augment(ctx, X):
    pre = ctx.augment_preimages()
    return {Quad(x.s1, x.s2, a, b) for x in X for a, b in pre.get((x.h1, x.h2), ())}


def _a_cswap(C, H, q, w):
    return w == _swap_c(q)


def _a_hswap(C, H, q, w):
    return w == _swap_h(q)


def _a_cleq(C, H, q, w):
    return (w.s2, w.h1, w.h2) == (q.s2, q.h1, q.h2) and traces_equal(C, q.s1, w.s1).equal


def _a_hleq(C, H, q, w):
    return (w.s1, w.s2, w.h2) == (q.s1, q.s2, q.h2) and traces_equal(H, q.h1, w.h1).equal


def _a_reduce(C, H, q, w):
    return (w.h1, w.h2) == (q.h1, q.h2) and rel_trace_eq(C, C, (q.s1, q.s2, w.s1, w.s2))


def _a_augment(C, H, q, w):
    if (w.s1, w.s2) != (q.s1, q.s2):
        return False
    side = Quad(w.h1, w.h2, q.h1, q.h2)
    rel = compute_rbisim_lockstep(H, H, _lockstep_closure(H, side))
    return side in rel


REGISTRY = {
    "c-swap": UpToFunction("c-swap", _t_cswap, _a_cswap),
    "h-swap": UpToFunction("h-swap", _t_hswap, _a_hswap),
    "c-leak-eq": UpToFunction("c-leak-eq", _t_cleq, _a_cleq),
    "h-leak-eq": UpToFunction("h-leak-eq", _t_hleq, _a_hleq),
    "reduce-c-leak": UpToFunction("reduce-c-leak", _t_reduce, _a_reduce),
    "augment-h-leak": UpToFunction("augment-h-leak", _t_augment, _a_augment),
}

SANDBOX = {
    "identity": UpToFunction("identity", lambda ctx, X: set(X), lambda C, H, q, w: q == w, TEST_ONLY),
    # Replaces every hypothesis by the full universe: the relaxed-coinduction exploit.
    "top": UpToFunction("top", lambda ctx, X: None, lambda C, H, q, w: True, TEST_ONLY),
}


def lookup(name: str) -> UpToFunction:
    if name in REGISTRY:
        return REGISTRY[name]
    if name in SANDBOX:
        return SANDBOX[name]
    raise KeyError(name)


def _err(goal, rule, reason, detail=""):
    raise KernelError(Failure(goal, rule, reason, detail))


# ---------------------------------------------------------------------------
# rule applications


def apply_upto(C, H, g: Goal, f, witness) -> Goal:
    """Replace the goal quad by ``witness`` when ``g.quad`` lies in ``f({witness})``."""
    f = REGISTRY.get(f) if isinstance(f, str) else f
    if f is None or f.status != PROVEN or REGISTRY.get(f.name) is not f:
        _err(g, "upto", "not-registered", getattr(f, "name", "unknown function"))
    w = Quad(*witness)
    if not f.admits(C, H, g.quad, w):
        _err(g, f"upto {f.name}", "witness-mismatch", f"{g.quad!r} is not in f({{{w!r}}})")
    return g.replace(w)


def apply_leak_eq(side: str, T, g: Goal, replacement, proof: Optional[PairGraphVerdict] = None,
                  index: int = 1) -> Goal:
    """Replace contract (``side='c'``) or hardware component ``index`` by an equivalent state.

    The supplied certificate is not trusted: equality of traces is
    re-established by the oracle.
    """
    if side not in ("c", "h") or index not in (1, 2):
        raise ValueError("side must be 'c' or 'h' and index 1 or 2")
    rule = f"{side}-leak-eq"
    if proof is not None and not proof.equal:
        _err(g, rule, "equivalence-not-established", "certificate reports different traces")
    pos = (0 if side == "c" else 2) + index - 1
    old = g.quad[pos]
    if not traces_equal(T, old, replacement).equal:
        _err(g, rule, "equivalence-not-established", f"{old!r} and {replacement!r} differ")
    parts = list(g.quad)
    parts[pos] = replacement
    return g.replace(Quad(*parts))


def _side_checker(parent: Optional[Checker], C, H, lockstep: bool) -> Checker:
    if parent is None:
        return Checker(C, H, lockstep=lockstep)
    return Checker(C, H, parent.relations, None, parent.budget, parent.codec, lockstep)


def apply_reduce_contract_leakage(C, g: Goal, s1p, s2p, side_proof, _parent=None) -> Goal:
    """Swap the contract pair for (s1', s2') given a proof of (s1, s2, s1', s2')."""
    side_goal = Goal(Quad(g.quad.s1, g.quad.s2, s1p, s2p))
    node = side_proof.root if isinstance(side_proof, S.ProofScript) else side_proof
    chk = _side_checker(_parent, C, C, False)
    if isinstance(side_proof, S.ProofScript):
        chk.relations.update(side_proof.relations)
    try:
        chk.run(side_goal, node)
    except KernelError as e:
        _err(g, "reduce-c-leak", "side-proof-rejected", str(e.failure))
    return g.replace(Quad(s1p, s2p, g.quad.h1, g.quad.h2))


def _is_lockstep_script(node) -> bool:
    return isinstance(node, S.Lockstep)


def apply_augment_hardware_leakage(H, g: Goal, h1p, h2p, side_proof, _parent=None) -> Goal:
    """Swap the hardware pair for (h1', h2') given a lockstep proof of (h1', h2', h1, h2).

    The side proof must be a lockstep derivation, i.e. a ``(lockstep ...)``
    script; anything else is rejected before it is even looked at.
    """
    node = side_proof.root if isinstance(side_proof, S.ProofScript) else side_proof
    if not _is_lockstep_script(node):
        _err(g, "augment-h-leak", "non-lockstep-side-proof",
             "the hardware-side composition needs a lockstep derivation")
    side_goal = Goal(Quad(h1p, h2p, g.quad.h1, g.quad.h2))
    chk = _side_checker(_parent, H, H, True)
    if isinstance(side_proof, S.ProofScript):
        chk.relations.update(side_proof.relations)
    try:
        chk.run(side_goal, node.body)
    except KernelError as e:
        _err(g, "augment-h-leak", "side-proof-rejected", str(e.failure))
    return g.replace(Quad(g.quad.s1, g.quad.s2, h1p, h2p))


def check_node(checker: Checker, goal: Goal, node):
    """Kernel hook for the up-to script nodes."""
    C, H = checker.C, checker.H
    dec = checker.codec
    try:
        if isinstance(node, S.UpTo):
            name = node.function
            if name in ("c-swap", "h-swap"):
                if node.args:
                    _err(goal, f"upto {name}", "malformed", "swap takes no arguments")
                w = _swap_c(goal.quad) if name == "c-swap" else _swap_h(goal.quad)
                new = apply_upto(C, H, goal, name, w)
            elif name in ("c-leak-eq", "h-leak-eq"):
                if len(node.args) != 2:
                    _err(goal, f"upto {name}", "malformed", "expected INDEX STATE")
                idx = int(node.args[0])
                side = name[0]
                new = apply_leak_eq(side, C if side == "c" else H, goal,
                                    dec(node.args[1]), None, idx)
            elif name in REGISTRY:
                _err(goal, f"upto {name}", "malformed", f"use the ({name} ...) node form")
            else:
                _err(goal, f"upto {name}", "not-registered", name)
        elif isinstance(node, S.ReduceCLeak):
            w1, w2 = (dec(x) for x in node.witness)
            new = apply_reduce_contract_leakage(C, goal, w1, w2, node.side, checker)
        else:
            side = S.Lockstep(node.side) if node.lockstep_side else node.side
            w1, w2 = (dec(x) for x in node.witness)
            new = apply_augment_hardware_leakage(H, goal, w1, w2, side, checker)
    except (ValueError, SyntaxError) as e:
        _err(goal, "upto", "malformed", str(e))
    checker.check(new, node.body)


# ---------------------------------------------------------------------------
# lockstep proofs


def _lockstep_closure(H, q: Quad, budget: int = 100_000) -> list:
    out, seen = [], set()
    cur = Quad(*q)
    while cur not in seen:
        if len(seen) >= budget:
            raise RuntimeError("lockstep path exceeded budget")
        seen.add(cur)
        out.append(cur)
        cur = cur.lockstep(H, H)
    return out


def search_lockstep_proof(C, H, q, max_steps: int = 100_000) -> Optional[S.ProofScript]:
    """Find a lockstep derivation for ``q`` or return None.

    Lockstep derivations are single paths, so the search walks the
    lockstep successor chain: Leak ends it, Step continues, and a repeated
    quad closes it through an Invariant over the visited path.  The search
    is exhaustive: if it fails, no lockstep derivation exists.
    """
    path, seen = [], set()
    cur = Quad(*q)
    ends_in_leak = False
    while cur not in seen:
        if len(path) >= max_steps:
            return None
        seen.add(cur)
        path.append(cur)
        if C.leak(cur.s1) != C.leak(cur.s2):
            ends_in_leak = True
            break
        if H.leak(cur.h1) != H.leak(cur.h2):
            return None
        cur = cur.lockstep(C, H)
    if ends_in_leak and len(path) == 1:
        return S.ProofScript(S.Lockstep(S.Step("leak")))
    rel = QuadRelation.extensional("lockstep-path", path)
    cases = [S.Case("step", S.chain("step", "cycle"))]
    if ends_in_leak:
        cases.insert(0, S.Case("leak", S.Step("leak")))
    return S.ProofScript(S.Lockstep(S.Invariant(rel.name, tuple(cases))), {rel.name: rel})


# ---------------------------------------------------------------------------
# compatibility sampling


@dataclass
class CompatibilityReport:
    function: str
    samples: int
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def check_compatibility(f, C, H, universe, samples: int = 100, seed: int = 0,
                        ctx: Optional[UpToContext] = None) -> CompatibilityReport:
    """Sample random X and check f(rbisimF(X)) is contained in rbisimF(f(X)).

    The universe must be closed under both successor maps and under ``f``
    (the full product of finite systems is).  A pass is evidence only.
    """
    f = lookup(f) if isinstance(f, str) else f
    U = universe if isinstance(universe, QuadUniverse) else QuadUniverse(C, H, universe)
    ctx = ctx or UpToContext(C, H)
    rng = np.random.default_rng(seed)
    report = CompatibilityReport(f.name, samples)

    def apply_f(mask):
        X = [U.quads[i] for i in np.flatnonzero(mask)]
        img = f.transform(ctx, X)
        if img is None:
            return np.ones(len(U), dtype=bool)
        out = np.zeros(len(U), dtype=bool)
        for q in img:
            j = U.index.get(q)
            if j is not None:
                out[j] = True
        return out

    for k in range(samples):
        density = rng.uniform(0.05, 0.95)
        X = rng.random(len(U)) < density
        lhs = apply_f(rbisim_functional(U, X)[0])
        rhs = rbisim_functional(U, apply_f(X))[0]
        bad = lhs & ~rhs
        if bad.any():
            report.violations.append((k, U.quads[int(np.flatnonzero(bad)[0])]))
    return report
