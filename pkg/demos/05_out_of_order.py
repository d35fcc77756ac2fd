"""Out-of-order execution against the sequential contract.

Delaying an add past an independent load is invisible to an attacker who
already sees every load address.  Delaying a load past a load that reads
its result is not allowed; forcing it anyway gives a concrete leak.
"""
from relbisim.isa import parse_program
from relbisim.ooo import Scheduler
from relbisim.workbench import Instance, InstanceConfig, check_instance, run_case_study

good = parse_program("add r1 r1 1\nload r2 r2")
cfg = InstanceConfig(model="ooo-seq", program=good, scheduler=Scheduler(frozenset({0})))
print("\n".join(run_case_study(cfg).lines()))

race = parse_program("load r1 r2\nload r2 r1")
cfg = InstanceConfig(model="ooo-seq", program=race, scheduler=Scheduler(frozenset({0})))
r = check_instance(cfg, Instance(race, cfg.scheduler), checked=False)
print(f"\nforced delay on {r.label}: {r.refuted} of {r.quads} quads refuted, closure {r.closure}")
for k, v in r.counterexample.items():
    print(f"  {k}: {v}")
