"""A bounds-check gadget under branch speculation.

The always-mispredict contract leaks every load address, including the
ones on the wrong path.  Against that contract the speculating hardware
leaks nothing extra, for any predictor.  We look at the traces of one
input, then let the workbench check every input at once.
"""
from pathlib import Path

from relbisim.isa import parse_program
from relbisim.lts import trace_prefix
from relbisim.speculation import JUMP, NEXT, Predictor, build_am_instance
from relbisim.workbench import InstanceConfig, run_case_study

P = parse_program((Path(__file__).parent / "data" / "gadget.s").read_text())
m, a = (2, 3, 1, 0), (0, 1)  # r1 = 0: the access is out of bounds
print("inputs m =", m, "a =", a)
for kind in (NEXT, JUMP):
    inst = build_am_instance(P, Predictor.constant(kind), 2)
    print(f"\npredictor always-{kind}:")
    print("  contract:", " ".join(map(str, trace_prefix(inst.C, inst.contract_state(m, a, 0), 7).observations)))
    print("  hardware:", " ".join(map(str, trace_prefix(inst.H, inst.hardware_state(m, a, 0), 7).observations)))

print("\nEvery input, both predictors, windows 1 and 2:")
for kind in (NEXT, JUMP):
    cfg = InstanceConfig(program=P, predictor=Predictor.constant(kind), windows=(1, 2))
    print("\n".join(run_case_study(cfg).lines()))
