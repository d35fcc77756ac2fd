"""Case-study runners, the differential fuzzer and report emission.

A case study fixes a model (always-mispredict contract against the
speculating hardware, or the sequential contract against out-of-order
hardware), enumerates programs and predictor/scheduler settings, and for
each instance checks two things over every initial quad of the shape
"same pc, same cache, not speculating, empty buffer":

* the oracle: relative trace equality of every such quad;
* the kernel: closure of the model's invariant under the bounded
  derivation shape (a few C-Steps, then C-Leak or an H-Step back into
  the invariant).

Both checks run over lazily enumerated initial states (see
:mod:`relbisim.symbolic`), and the leaf weights are summed against the
size of the full input space so that nothing is skipped silently.

The oracle side works per pc on one input at a time.  Hardware traces are
compared through the cache-stripped system that leaks what each step adds
to the cache; with a common initial cache this is the same as comparing
cache snapshots, and it also covers every initial cache at once.  A quad
is then relatively trace-equal unless two inputs have the same contract
trace and different hardware traces, so checking that the contract trace
determines the hardware trace decides every quad of the instance.
"""
from __future__ import annotations

import json
import random
import time
from collections import defaultdict
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Iterator, Optional

from . import kernel
from .isa import (
    REGISTERS, Beqz, Domain, Program, instruction_alphabet, locations, swap_registers,
)
from .kernel import check_script, closure_derivation, derive_proof, NotProvable
from .lts import BudgetExceeded, DEFAULT_BUDGET, trace_prefix
from .oracle import Quad, compute_rbisim, full_product, rel_trace_eq, traces_equal, ultimate_trace
from .ooo import OOO_INVARIANT, Scheduler, build_ooo_instance, valid_schedulers
from .random_systems import oracle_table, random_instance, random_quad, random_script
from .speculation import AM_INVARIANT, JUMP, NEXT, Predictor, build_am_instance
from .symbolic import CACHE_TAIL, Hole, complete, explore

SCHEMA = "relbisim-report/1"
MODELS = ("am-spec", "ooo-seq")
PREDICTOR_KINDS = ("always-next", "always-jump", "mixed")


class ConfigError(ValueError):
    pass


class WorkbenchBug(AssertionError):
    """The kernel proved something the oracle refutes."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class InstanceConfig:
    """What to enumerate.  ``None`` for program/predictor/scheduler means "all"."""

    model: str = "am-spec"
    program: Optional[Program] = None
    predictor: Optional[Predictor] = None
    scheduler: Optional[Scheduler] = None
    windows: tuple = (2,)
    M: int = 4
    values: tuple = (0, 1, 2)
    max_len: int = 3
    add_constants: tuple = (1,)
    c_step_budget: Optional[int] = None
    closure: bool = True
    symmetry: bool = True
    seed: int = 0
    budget: int = DEFAULT_BUDGET

    def validate(self) -> "InstanceConfig":
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.max_len < 1 or self.M < 1 or self.budget < 1:
            raise ConfigError("max_len, M and budget must be positive")
        if not self.values:
            raise ConfigError("value range is empty")
        if self.model == "am-spec":
            if not self.windows or any(w < 1 for w in self.windows):
                raise ConfigError("speculation windows must be at least 1")
            if self.scheduler is not None:
                raise ConfigError("a scheduler only applies to the ooo-seq model")
        elif self.predictor is not None:
            raise ConfigError("a predictor only applies to the am-spec model")
        if self.c_step_budget is not None and self.c_step_budget < 1:
            raise ConfigError("c_step_budget must be at least 1")
        try:
            self.domain
        except ValueError as e:
            raise ConfigError(str(e)) from None
        return self

    @property
    def domain(self) -> Domain:
        return Domain(self.M, tuple(self.values))


# ---------------------------------------------------------------------------
# enumeration


def enumerate_programs(max_len: int, add_constants=(1,)) -> Iterator[Program]:
    alphabet = []
    for k in add_constants:
        for i in instruction_alphabet(max_len, k):
            if i not in alphabet:
                alphabet.append(i)
    for n in range(1, max_len + 1):
        yield from product(alphabet, repeat=n)


def canonical_under_swap(P: Program) -> bool:
    """True for the representative of ``{P, P with r1 and r2 renamed}``.

    Renaming registers in the program and in every initial state is a
    bijection on initial quads that preserves all traces, so checking one
    program of each pair covers both.
    """
    return repr(P) <= repr(swap_registers(P))


def predictors_for(P: Program) -> list:
    return [Predictor.constant(NEXT), Predictor.constant(JUMP), Predictor.mixed(P)]


def _branch_profile(P: Program, phi: Predictor) -> tuple:
    # the hardware consults the predictor only at branches
    return tuple(phi(pc) for pc, i in enumerate(P) if type(i) is Beqz)


@dataclass(frozen=True)
class Instance:
    P: Program
    setting: object  # Predictor or Scheduler
    w: Optional[int] = None

    def label(self) -> str:
        prog = "; ".join(map(str, self.P))
        w = f" w={self.w}" if self.w is not None else ""
        return f"[{prog}] {self.setting}{w}"


def instances(cfg: InstanceConfig) -> tuple:
    """The instances to check and the number of enumerated instances they stand for.

    With ``cfg.symmetry`` (and no fixed program) only one program of each
    register-renaming pair is kept, and predictors that agree on every
    branch of the program are checked once.
    """
    fixed = cfg.program is not None
    programs = [cfg.program] if fixed else enumerate_programs(cfg.max_len, cfg.add_constants)
    reduce = cfg.symmetry and not fixed
    out, covered = [], 0
    for P in programs:
        if cfg.model == "am-spec":
            settings = [cfg.predictor] if cfg.predictor is not None else predictors_for(P)
            covered += len(settings) * len(cfg.windows)
            if reduce:
                by_profile = {}
                for phi in settings:
                    by_profile.setdefault(_branch_profile(P, phi), phi)
                settings = list(by_profile.values())
            chosen = [(phi, w) for w in cfg.windows for phi in settings]
        else:
            settings = [cfg.scheduler] if cfg.scheduler is not None else valid_schedulers(P)
            covered += len(settings)
            chosen = [(s, None) for s in settings]
        # the alphabet is closed under renaming, so the partner is enumerated too
        if reduce and not canonical_under_swap(P):
            continue
        out.extend(Instance(P, s, w) for s, w in chosen)
    return out, covered


def build(cfg: InstanceConfig, inst: Instance, checked: bool = True):
    if cfg.model == "am-spec":
        return build_am_instance(inst.P, inst.setting, inst.w, cfg.domain)
    return build_ooo_instance(inst.P, inst.setting, cfg.domain, checked=checked)


def invariant_for(model: str):
    return AM_INVARIANT if model == "am-spec" else OOO_INVARIANT


def default_c_step_budget(model: str, w: Optional[int]) -> int:
    """Enough contract steps to cover one speculation window plus the branch and its landing."""
    return w + 2 if model == "am-spec" else 3


# ---------------------------------------------------------------------------
# per-instance checks


@dataclass
class InstanceResult:
    label: str
    quads: int = 0
    refuted: int = 0
    proved: int = 0
    closure: Optional[bool] = None
    oracle_leaves: int = 0
    closure_leaves: int = 0
    counterexample: Optional[dict] = None
    closure_failure: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.refuted == 0 and self.closure is not False


def _hole_state(tag, M: int):
    m = tuple(Hole((tag, "m", j)) for j in range(M))
    a = tuple(Hole((tag, r)) for r in REGISTERS)
    return m, a


def oracle_check(inst_obj, dom: Domain, budget: int = DEFAULT_BUDGET) -> tuple:
    """Decide relative trace equality for every initial quad of the instance.

    Returns ``(quads, refuted, leaves, witness)`` where ``witness`` is a
    concrete refuted quad or None.
    """
    C = inst_obj.C
    D = inst_obj.delta_hardware()
    V = dom.values
    n_in = len(V) ** (dom.M + len(REGISTERS))
    pcs = locations(inst_obj.P)
    quads = refuted = leaves = 0
    witness = None
    for pc in pcs:
        m, a = _hole_state("x", dom.M)
        start = (m, a)

        def run(st):
            mm, aa = st
            ct = ultimate_trace(C, inst_obj.contract_state(mm, aa, pc), budget)
            ht = ultimate_trace(D, inst_obj.hardware_state(mm, aa, pc), budget)
            return ct, ht

        groups = defaultdict(lambda: defaultdict(int))
        sample = {}
        total = 0
        for leaf in explore(start, lambda k: V, run):
            wgt = leaf.weight(len(V))
            total += wgt
            leaves += 1
            ct, ht = leaf.result
            groups[ct][ht] += wgt
            sample.setdefault((ct, ht), complete(leaf.state, V[0]))
        if total != n_in:
            raise WorkbenchBug(f"lazy enumeration covered {total} of {n_in} inputs at pc {pc}")
        quads += n_in * n_in
        for ct, hs in groups.items():
            W = sum(hs.values())
            bad = W * W - sum(x * x for x in hs.values())
            refuted += bad
            if bad and witness is None:
                h_a, h_b = list(hs)[:2]
                (m1, a1), (m2, a2) = sample[ct, h_a], sample[ct, h_b]
                witness = inst_obj.initial_quad(m1, a1, m2, a2, pc)
    return quads, refuted, leaves, witness


def closure_check(inst_obj, R, dom: Domain, c_step_budget: int,
                  budget: int = DEFAULT_BUDGET) -> tuple:
    """Check that every member of ``R`` at every pc has a bounded derivation back into ``R``.

    Members are the quads of the invariant's shape over symbolic inputs and
    a symbolic common cache.  Returns ``(ok, leaves, failure)``.
    """
    C, H = inst_obj.C, inst_obj.H
    V = dom.values
    n_in = len(V) ** (2 * (dom.M + len(REGISTERS)))
    leaves = 0
    for pc in locations(inst_obj.P):
        m1, a1 = _hole_state(1, dom.M)
        m2, a2 = _hole_state(2, dom.M)
        q0 = inst_obj.initial_quad(m1, a1, m2, a2, pc, (CACHE_TAIL,))
        if q0 not in R:
            raise WorkbenchBug("initial quad shape is outside the invariant")

        def run(q):
            return closure_derivation(C, H, R, q, c_step_budget, max_nodes=budget)

        total = 0
        for leaf in explore(q0, lambda k: V, run):
            total += leaf.weight(len(V))
            leaves += 1
            tags, _, limited = leaf.result
            if tags is None:
                q = complete(leaf.state, V[0])
                note = " (cut by the C-Step budget)" if limited else ""
                return False, leaves, f"no derivation for {_show_quad(q)}{note}"
        if total != n_in:
            raise WorkbenchBug(f"lazy enumeration covered {total} of {n_in} member pairs at pc {pc}")
    return True, leaves, None


def isa_rel_trace_eq(inst_obj, q: Quad, budget: int = DEFAULT_BUDGET) -> bool:
    """Relative trace equality of one ISA quad.

    With a common initial cache the hardware traces are compared through
    the cache-growth system, which stays finite for looping programs whose
    concrete caches grow without bound.
    """
    if q.h1.s.c != q.h2.s.c:
        return rel_trace_eq(inst_obj.C, inst_obj.H, q, budget)
    return rel_trace_eq(inst_obj.C, inst_obj.delta_hardware(), q, budget)


def _show_quad(q) -> str:
    return repr(tuple(q)).replace("CACHE_TAIL", "...")


def describe_counterexample(inst_obj, q: Quad, budget: int = DEFAULT_BUDGET) -> dict:
    """Both trace pairs of ``q`` up to the first hardware divergence."""
    C, H = inst_obj.C, inst_obj.H
    v = traces_equal(H, q.h1, q.h2, budget)
    n = (v.witness_index or 0) + 1
    return {
        "quad": repr(tuple(q)),
        "diverges_at": v.witness_index,
        "contract_1": [str(o) for o in trace_prefix(C, q.s1, n).observations],
        "contract_2": [str(o) for o in trace_prefix(C, q.s2, n).observations],
        "hardware_1": [str(o) for o in trace_prefix(H, q.h1, n).observations],
        "hardware_2": [str(o) for o in trace_prefix(H, q.h2, n).observations],
    }


def check_instance(cfg: InstanceConfig, inst: Instance, checked: bool = True) -> InstanceResult:
    obj = build(cfg, inst, checked)
    res = InstanceResult(inst.label())
    res.quads, res.refuted, res.oracle_leaves, witness = oracle_check(obj, cfg.domain, cfg.budget)
    if witness is not None:
        res.counterexample = describe_counterexample(obj, witness, cfg.budget)
    if cfg.closure:
        k = cfg.c_step_budget or default_c_step_budget(cfg.model, inst.w)
        ok, res.closure_leaves, res.closure_failure = closure_check(
            obj, invariant_for(cfg.model), cfg.domain, k, cfg.budget)
        res.closure = ok
        if ok:
            res.proved = res.quads
            if res.refuted:
                raise WorkbenchBug(f"{res.label}: invariant closed but the oracle refutes {res.refuted} quads")
    return res


# ---------------------------------------------------------------------------
# reports


@dataclass
class Report:
    kind: str
    title: str
    verdicts: list = field(default_factory=list)
    checked: int = 0
    proved: int = 0
    refuted: int = 0
    rejected: int = 0
    seconds: float = 0.0
    counterexample: Optional[dict] = None
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.refuted == 0 and self.rejected == 0

    def consistent(self) -> bool:
        return (self.checked == sum(v.get("quads", v.get("checked", 0)) for v in self.verdicts)
                or not self.verdicts)

    def lines(self) -> list:
        out = [f"{self.title}",
               f"  checked {self.checked}, proved {self.proved}, refuted {self.refuted}, "
               f"rejected {self.rejected} in {self.seconds:.2f}s"]
        for k, v in self.notes.items():
            out.append(f"  {k}: {v}")
        if self.counterexample:
            out.append("  first counterexample:")
            for k, v in self.counterexample.items():
                out.append(f"    {k}: {v}")
        out.append(f"  => {'PASS' if self.passed else 'FAIL'}")
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = SCHEMA
        d["passed"] = self.passed
        d["verdicts"] = sorted(self.verdicts, key=lambda v: json.dumps(v, sort_keys=True))
        return d

    def dump_json(self, path: str):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True, default=str)


def run_case_study(cfg: InstanceConfig, progress=None) -> Report:
    cfg.validate()
    t0 = time.perf_counter()
    todo, covered = instances(cfg)
    rep = Report("casestudy", f"{cfg.model} case study")
    closure_fail = 0
    for n, inst in enumerate(todo):
        r = check_instance(cfg, inst)
        rep.checked += r.quads
        rep.proved += r.proved
        rep.refuted += r.refuted
        if r.closure is False:
            closure_fail += 1
        if not r.passed or cfg.program is not None:
            rep.verdicts.append(asdict(r))
        if r.counterexample and rep.counterexample is None:
            rep.counterexample = {"instance": r.label, **r.counterexample}
        if progress is not None:
            progress(n + 1, len(todo), r)
    rep.rejected = closure_fail
    rep.seconds = time.perf_counter() - t0
    rep.notes = {
        "instances checked": len(todo),
        "instances covered (before symmetry reduction)": covered,
        "closure failures": closure_fail,
        "closure": "on" if cfg.closure else "off",
        "domain": f"M={cfg.M}, values={list(cfg.values)}",
    }
    return rep


# ---------------------------------------------------------------------------
# differential fuzzing


def fuzz_differential(seed: int = 0, trials: int = 100, max_states: int = 8, max_obs: int = 3,
                      scripts_per_trial: int = 4, mutated: bool = False) -> Report:
    """Random systems checked against the oracle from three directions.

    Each trial compares the computed relation with the oracle on every quad
    of the full product, proves one oracle-true quad with derive_proof, and
    runs adversarial scripts (half of them rooted at oracle-false quads),
    requiring that nothing false is ever accepted.  ``mutated`` runs the
    kernel with the H-Step leak check switched off.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = random.Random(seed)
    rep = Report("fuzz", f"differential fuzzing, seed {seed}, {trials} trials"
                 + (" (mutated kernel)" if mutated else ""))
    t0 = time.perf_counter()
    ctx = kernel.mutation(kernel.NO_HSTEP_LEAK_CHECK) if mutated else nullcontext()
    with ctx:
        for t in range(trials):
            C, H = random_instance(rng, max_states, max_obs)
            U = full_product(C, H)
            rb = compute_rbisim(C, H, U)
            truth = oracle_table(C, H, U)
            for q in U:
                rep.checked += 1
                if (q in rb) != truth[q]:
                    rep.refuted += 1
                    rep.verdicts.append({"trial": t, "kind": "fixpoint-mismatch", "quad": repr(q)})
            true_q = [q for q in U if truth[q]]
            false_q = [q for q in U if not truth[q]]
            if true_q:
                q = rng.choice(true_q)
                try:
                    v = check_script(C, H, q, derive_proof(C, H, q, rbisim=rb), universe=U)
                    ok = v.accepted
                except NotProvable:
                    ok = False
                if ok:
                    rep.proved += 1
                else:
                    rep.rejected += 1
                    rep.verdicts.append({"trial": t, "kind": "completeness", "quad": repr(q)})
            for _ in range(scripts_per_trial):
                q = rng.choice(false_q) if false_q and rng.random() < 0.5 else random_quad(rng, C, H)
                s = random_script(rng, C, H, q)
                try:
                    v = check_script(C, H, q, s)
                except BudgetExceeded:
                    continue
                if v.accepted and not truth[q]:
                    rep.refuted += 1
                    finding = {"trial": t, "kind": "soundness", "quad": repr(q), "script": s.dumps()}
                    rep.verdicts.append(finding)
                    if rep.counterexample is None:
                        rep.counterexample = finding
    rep.seconds = time.perf_counter() - t0
    rep.notes = {"first violation at trial": rep.verdicts[0]["trial"] if rep.verdicts else None}
    return rep
