"""Writing proof scripts and watching the kernel check them.

Scripts are s-expressions naming one rule per node.  The kernel checks
every side condition and reports the first failing goal with its reason.
"""
import random

from relbisim import check_script, derive_proof, dumps, loads
from relbisim.gallery import augment_instance, lockstep_instance
from relbisim.oracle import Quad, rel_trace_eq
from relbisim.random_systems import random_instance, random_quad

C, H, q = lockstep_instance()
proof = loads("(cstep (cleak))")
print("quad", tuple(q))
print("script", dumps(proof).strip(), "->", check_script(C, H, q, proof))

print("\nH-Step needs the hardware leaks to agree here, so this is refused:")
print(" ", check_script(C, H, q, "(hstep (cycle))").failure)

C2, H2 = augment_instance()
bad = Quad("s", "s", "h1", "h2")
print("\nCycle right after a C-Step is not guarded; the kernel says no:")
print("  oracle:", rel_trace_eq(C2, H2, bad))
print(" ", check_script(C2, H2, bad, "(cstep (cycle))").failure)

print("\nEvery relatively trace-equal quad has a proof; derive_proof writes one:")
rng = random.Random(4)
C, H = random_instance(rng, max_states=4)
while True:
    q = random_quad(rng, C, H)
    if rel_trace_eq(C, H, q):
        break
script = derive_proof(C, H, q)
text = script.dumps()
print(text[:600] + ("..." if len(text) > 600 else ""))
print("accepted:", check_script(C, H, q, script).accepted)
