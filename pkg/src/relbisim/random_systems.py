"""Seeded random finite systems and adversarial proof scripts for differential testing."""
from __future__ import annotations

import random
from itertools import product

from .lts import Obs, TransitionSystem
from .oracle import Quad, QuadRelation, full_product, traces_equal
from . import script as S


def random_system(rng: random.Random, n_states: int, n_obs: int, name: str = "T") -> TransitionSystem:
    states = list(range(n_states))
    nxt = {s: rng.randrange(n_states) for s in states}
    leak = {s: Obs("named", f"o{rng.randrange(n_obs)}") for s in states}
    return TransitionSystem.from_tables(nxt, leak, name)


def random_instance(rng: random.Random, max_states: int = 8, max_obs: int = 3):
    """A random contract/hardware pair with 1..max_states states and 1..max_obs observations."""
    nc = rng.randint(1, max_states)
    nh = rng.randint(1, max_states)
    C = random_system(rng, nc, rng.randint(1, max_obs), "C")
    H = random_system(rng, nh, rng.randint(1, max_obs), "H")
    return C, H


def trace_eq_table(T: TransitionSystem) -> dict:
    """traces_equal for every pair of states, by independent pair walks."""
    states = sorted(T.states)
    return {(a, b): traces_equal(T, a, b).equal for a, b in product(states, repeat=2)}


def oracle_table(C, H, quads) -> dict:
    """rel_trace_eq for every quad, computed from the pairwise trace tables."""
    ct, ht = trace_eq_table(C), trace_eq_table(H)
    return {q: (not ct[q.s1, q.s2]) or ht[q.h1, q.h2] for q in quads}


def random_quad(rng: random.Random, C, H) -> Quad:
    cs, hs = sorted(C.states), sorted(H.states)
    return Quad(rng.choice(cs), rng.choice(cs), rng.choice(hs), rng.choice(hs))


_BODY_RULES = ("cleak", "cstep", "cstep'", "hstep", "cycle", "guard")


def random_chain(rng: random.Random, max_len: int = 6) -> S.Step:
    """A random linear rule chain ending in a leaf rule."""
    n = rng.randint(0, max_len)
    rules = [rng.choice(("cstep", "cstep'", "hstep", "guard")) for _ in range(n)]
    rules.append(rng.choice(("cleak", "cycle")))
    return S.chain(*rules)


def random_script(rng: random.Random, C, H, root: Quad, universe=None) -> S.ProofScript:
    """An adversarial script: random rules, random invariants, often the vacuous top.

    The generator deliberately favours shapes that only an unsound kernel
    would accept, such as H-Step into Cycle over the top relation.
    """
    relations = {}
    kind = rng.random()
    if kind < 0.25:
        return S.ProofScript(random_chain(rng))
    if kind < 0.55:
        name = "top"
    else:
        uni = universe if universe is not None else full_product(C, H)
        k = rng.randint(1, min(len(uni), 12))
        members = set(rng.sample(list(uni), k)) | {root}
        rel = QuadRelation.extensional("R", members)
        relations["R"] = rel
        name = "R"
    cases = []
    for j in range(rng.randint(1, 3)):
        if rng.random() < 0.5:
            body = S.chain(*([rng.choice(("cstep", "cstep'")) for _ in range(rng.randint(0, 3))]
                             + ["hstep", "cycle"]))
        else:
            body = random_chain(rng)
        cases.append(S.Case(f"c{j}", body))
    return S.ProofScript(S.Invariant(name, tuple(cases)), relations)
