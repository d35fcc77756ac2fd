"""Relative trace equality, decided two ways.

A contract C and a hardware H are finite deterministic systems.  A quad
(s1, s2, h1, h2) is relatively trace-equal when equal contract traces
force equal hardware traces.  We decide it directly by walking state
pairs, and again as membership in the relative bisimilarity fixpoint,
and watch the two agree.
"""
import random

from relbisim.gallery import lockstep_incomplete, lockstep_instance
from relbisim.oracle import (
    compute_rbisim, compute_rbisim_lockstep, full_product, rel_trace_eq, traces_equal,
)
from relbisim.random_systems import random_instance

print("A small contract pair that agrees once and then splits:")
C, H, q = lockstep_instance()
print("  contract traces equal?", traces_equal(C, q.s1, q.s2))
print("  hardware traces equal?", traces_equal(H, q.h1, q.h2))
print("  relatively trace-equal?", rel_trace_eq(C, H, q))

U = full_product(C, H)
print("  in relative bisimilarity?", q in compute_rbisim(C, H, U))
print("  in the lockstep variant? ", q in compute_rbisim_lockstep(C, H, U))
print("The lockstep variant steps the hardware with every contract step, so it")
print("cannot wait for the contract split at step 1 when the hardware differs at step 0.\n")
print("\n".join(lockstep_incomplete().lines()))

print("\nNow 50 random instances, every quad of each:")
rng = random.Random(0)
quads = agree = 0
for _ in range(50):
    C, H = random_instance(rng)
    U = full_product(C, H)
    rb = compute_rbisim(C, H, U)
    for q in U:
        quads += 1
        agree += (q in rb) == rel_trace_eq(C, H, q)
print(f"  {agree} of {quads} quads agree")
