"""Up-to reasoning, and why augmenting hardware leakage needs a lockstep side proof.

The quad (s, s, h1, h2) is false: one contract state, but h1 and h2 leak
D and E.  Yet (s, s, h1', h2') is provable, and (h1', h2', h1, h2) holds
as a relative claim about H against itself.  Gluing the two would prove
the false quad, so the rule only takes a lockstep proof of the side claim.
"""
from relbisim.gallery import augment_unsound
from relbisim.kernel import Goal
from relbisim.oracle import Quad
from relbisim.gallery import augment_instance
from relbisim.upto import apply_upto, REGISTRY

print("registered up-to functions:", ", ".join(sorted(REGISTRY)))

C, H = augment_instance()
g = Goal(Quad("s", "s", "h1'", "h2'"))
swapped = apply_upto(C, H, g, "h-swap", Quad("s", "s", "h2'", "h1'"))
print("h-swap turns", tuple(g.quad), "into", tuple(swapped.quad))
print()
print("\n".join(augment_unsound().lines()))
