"""Command-line entry point.

Subcommands:

  oracle      decide relative trace equality of one quad
  prove       check a proof script against one quad
  closure     check that an invariant is closed under bounded derivations
  casestudy   run an exhaustive case study
  gallery     run the built-in counterexamples
  fuzz        differential fuzzing of the kernel against the oracle

Quads come either from a toy-ISA instance (``--program`` with ``--model``
and the initial inputs ``--m1 --a1 --m2 --a2 --pc --cache``) or from a
JSON file of two finite systems (``--systems`` and ``--quad``).  A systems
file maps every state to ``[next, observation]``::

    {"contract": {"s": ["s", "A"]},
     "hardware": {"h1": ["h1", "D"], "h2": ["h2", "E"]}}

Relation files list one quad per line as four whitespace-separated state
names; ``#`` starts a comment.

Exit status: 0 when every check passed, 1 when something was refuted or
rejected, 2 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from . import script as S
from .gallery import GALLERY, run_counterexample
from .isa import Domain, ParseError, parse_program
from .kernel import check_invariant_closure, check_script
from .lts import BudgetExceeded, TransitionSystem, named
from .oracle import Quad, QuadRelation, close_quads, rel_trace_eq
from .ooo import OOO_INVARIANT, InvalidScheduler, Scheduler
from .script import ScriptSyntaxError
from .speculation import AM_INVARIANT, JUMP, NEXT, Predictor
from .workbench import (
    ConfigError, Instance, InstanceConfig, build, closure_check, default_c_step_budget,
    describe_counterexample, fuzz_differential, isa_rel_trace_eq, run_case_study,
)

OK, REFUTED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# inputs


def _read(path: str) -> str:
    try:
        with open(path) as f:
            return f.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _ints(text: Optional[str], what: str) -> tuple:
    if text is None:
        raise UsageError(f"missing --{what}")
    if not text.strip():
        return ()
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--{what} expects comma-separated integers, got {text!r}") from None


def load_systems(path: str):
    """Read a pair of finite systems from JSON (see the module docstring)."""
    try:
        data = json.loads(_read(path))
        out = []
        for side in ("contract", "hardware"):
            table = data[side]
            nxt = {s: v[0] for s, v in table.items()}
            leak = {s: named(str(v[1])) for s, v in table.items()}
            out.append(TransitionSystem.from_tables(nxt, leak, side))
        return tuple(out)
    except (KeyError, IndexError, TypeError, ValueError) as e:
        raise UsageError(f"{path}: not a systems file ({e})") from None


def load_relation(path: str, name: str) -> QuadRelation:
    members = []
    for ln, raw in enumerate(_read(path).splitlines(), 1):
        toks = raw.split("#", 1)[0].split()
        if not toks:
            continue
        if len(toks) != 4:
            raise UsageError(f"{path}:{ln}: expected four state names")
        members.append(Quad(*toks))
    return QuadRelation.extensional(name, members)


def _predictor(args, P) -> Predictor:
    p = args.predictor or NEXT
    if p in ("always-next", NEXT):
        return Predictor.constant(NEXT)
    if p in ("always-jump", JUMP):
        return Predictor.constant(JUMP)
    if p == "mixed":
        return Predictor.mixed(P)
    try:
        return Predictor.parse(_read(p))
    except ValueError as e:
        raise UsageError(f"{p}: {e}") from None


def _scheduler(args) -> Scheduler:
    if not args.scheduler or args.scheduler == "in-order":
        return Scheduler()
    try:
        return Scheduler.parse(_read(args.scheduler))
    except ValueError as e:
        raise UsageError(f"{args.scheduler}: {e}") from None


def _config(args, program=None) -> InstanceConfig:
    values = _ints(args.values, "values")
    cfg = InstanceConfig(
        model=args.model, program=program, windows=tuple(args.window or [2]),
        M=args.mem_size, values=values, max_len=args.max_len, seed=args.seed,
        budget=args.budget,
    )
    if program is not None:
        if args.model == "am-spec":
            cfg.predictor = _predictor(args, program)
        else:
            cfg.scheduler = _scheduler(args)
    elif args.model == "am-spec" and args.predictor:
        raise UsageError("--predictor needs --program; without it every predictor kind is enumerated")
    elif args.model == "ooo-seq" and args.scheduler:
        raise UsageError("--scheduler needs --program; without it every valid scheduler is enumerated")
    return cfg.validate()


def _program(args):
    if not args.program:
        return None
    try:
        return parse_program(_read(args.program))
    except ParseError as e:
        raise UsageError(f"{args.program}:{e}") from None


def _isa_instance(args):
    P = _program(args)
    if P is None:
        raise UsageError("--program is required")
    cfg = _config(args, P)
    w = cfg.windows[0]
    inst = Instance(P, cfg.predictor if cfg.model == "am-spec" else cfg.scheduler, w if cfg.model == "am-spec" else None)
    return cfg, inst, build(cfg, inst)


def _isa_quad(args, obj, dom: Domain) -> Quad:
    m1, m2 = _ints(args.m1, "m1"), _ints(args.m2, "m2")
    a1, a2 = _ints(args.a1, "a1"), _ints(args.a2, "a2")
    for m in (m1, m2):
        if len(m) != dom.M:
            raise UsageError(f"memories need {dom.M} cells (--mem-size)")
    for a in (a1, a2):
        if len(a) != 2:
            raise UsageError("register files need two values (r1,r2)")
    return obj.initial_quad(m1, a1, m2, a2, args.pc, _ints(args.cache or "", "cache"))


def _target(args):
    """(C, H, quad, relations, extra) for the oracle and prove subcommands."""
    if args.systems:
        if not args.quad:
            raise UsageError("--systems needs --quad s1,s2,h1,h2")
        C, H = load_systems(args.systems)
        parts = args.quad.split(",")
        if len(parts) != 4:
            raise UsageError("--quad expects four comma-separated state names")
        q = Quad(*parts)
        for s, T in zip(q, (C, C, H, H)):
            if s not in T.states:
                raise UsageError(f"unknown state {s!r}")
        return C, H, q, {}, None
    cfg, inst, obj = _isa_instance(args)
    q = _isa_quad(args, obj, cfg.domain)
    return obj.C, obj.H, q, {"I-am": AM_INVARIANT, "I-ooo": OOO_INVARIANT}, obj


# ---------------------------------------------------------------------------
# subcommands


def _emit(args, payload: dict, lines: list):
    print("\n".join(lines))
    if getattr(args, "json", None):
        with open(args.json, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True, default=str)


def cmd_oracle(args) -> int:
    C, H, q, _, obj = _target(args)
    if obj is None:
        verdict = rel_trace_eq(C, H, q, args.budget)
    else:
        verdict = isa_rel_trace_eq(obj, q, args.budget)
    lines = [f"quad: {tuple(q)}", f"relative trace equality: {str(verdict).lower()}"]
    payload = {"quad": repr(tuple(q)), "rel_trace_eq": verdict}
    if not verdict:
        ce = describe_counterexample(obj or _Pair(C, H), q, args.budget)
        payload["counterexample"] = ce
        lines += [f"  {k}: {v}" for k, v in ce.items() if k != "quad"]
    _emit(args, payload, lines)
    return OK if verdict else REFUTED


class _Pair:
    def __init__(self, C, H):
        self.C, self.H = C, H


def cmd_prove(args) -> int:
    C, H, q, rels, _ = _target(args)
    try:
        proof = S.loads(_read(args.script))
    except ScriptSyntaxError as e:
        raise UsageError(f"{args.script}:{e}") from None
    for spec in args.relation or []:
        name, _, path = spec.partition("=")
        if not path:
            raise UsageError("--relation expects NAME=FILE")
        rels[name] = load_relation(path, name)
    universe = close_quads(C, H, [q], args.budget)
    v = check_script(C, H, q, proof, relations=rels, universe=universe, budget=args.budget)
    lines = [f"quad: {tuple(q)}", f"script: {'accepted' if v.accepted else 'rejected'}"]
    if v.failure:
        lines.append(f"  {v.failure}")
    _emit(args, {"quad": repr(tuple(q)), "accepted": v.accepted,
                 "failure": None if v.failure is None else str(v.failure)}, lines)
    return OK if v.accepted else REFUTED


def cmd_closure(args) -> int:
    if args.systems:
        C, H = load_systems(args.systems)
        R = load_relation(args.invariant, "R")
        v = check_invariant_closure(C, H, R, args.c_step_budget)
        lines = [f"invariant: {args.invariant} ({v.checked} members)",
                 f"closure: {'accepted' if v.accepted else 'rejected'}"]
        if v.failure:
            lines.append(f"  {v.failure}")
        payload = {"accepted": v.accepted, "checked": v.checked,
                   "failure": None if v.failure is None else str(v.failure)}
        _emit(args, payload, lines)
        return OK if v.accepted else REFUTED
    cfg, inst, obj = _isa_instance(args)
    builtin = {"I-am": AM_INVARIANT, "I-ooo": OOO_INVARIANT}
    name = args.invariant or ("I-am" if cfg.model == "am-spec" else "I-ooo")
    if name not in builtin:
        raise UsageError(f"ISA instances take a built-in invariant: {', '.join(builtin)}")
    k = args.c_step_budget or default_c_step_budget(cfg.model, inst.w)
    ok, leaves, failure = closure_check(obj, builtin[name], cfg.domain, k, cfg.budget)
    lines = [f"instance: {inst.label()}", f"invariant: {name}, C-Step budget {k}",
             f"closure: {'accepted' if ok else 'rejected'} ({leaves} symbolic members)"]
    if failure:
        lines.append(f"  {failure}")
    _emit(args, {"instance": inst.label(), "invariant": name, "accepted": ok,
                 "leaves": leaves, "failure": failure}, lines)
    return OK if ok else REFUTED


def cmd_casestudy(args) -> int:
    cfg = _config(args, _program(args))
    if args.no_closure:
        cfg.closure = False

    def progress(i, n, r):
        if args.verbose and (i % 200 == 0 or i == n):
            print(f"  {i}/{n} instances", file=sys.stderr)

    rep = run_case_study(cfg, progress)
    _emit(args, rep.to_dict(), rep.lines())
    return OK if rep.passed else REFUTED


def cmd_gallery(args) -> int:
    names = list(GALLERY) if args.name == "all" else [args.name]
    reports = [run_counterexample(n) for n in names]
    lines = [line for r in reports for line in r.lines()]
    payload = {r.name: {"claim": r.claim, "facts": r.facts, "passed": r.passed} for r in reports}
    _emit(args, payload, lines)
    return OK if all(r.passed for r in reports) else REFUTED


def cmd_fuzz(args) -> int:
    rep = fuzz_differential(args.seed, args.trials, args.max_states, args.max_obs,
                            mutated=args.mutated)
    _emit(args, rep.to_dict(), rep.lines())
    return OK if rep.passed else REFUTED


# ---------------------------------------------------------------------------
# argument parsing


def _instance_flags(p, quad: bool = False):
    p.add_argument("--program", help="assembly file")
    p.add_argument("--model", choices=("am-spec", "ooo-seq"), default="am-spec")
    p.add_argument("--predictor", help="always-next, always-jump, mixed or a predictor file")
    p.add_argument("--scheduler", help="in-order or a scheduler file")
    p.add_argument("--window", type=int, action="append", help="speculation window (repeatable)")
    p.add_argument("--mem-size", type=int, default=4)
    p.add_argument("--values", default="0,1,2", help="contiguous value range, e.g. 0,1,2")
    p.add_argument("--max-len", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=100_000)
    p.add_argument("--json", metavar="OUT", help="also write a JSON report")
    if quad:
        p.add_argument("--systems", help="JSON file with two finite systems")
        p.add_argument("--quad", help="s1,s2,h1,h2 for --systems")
        for f in ("m1", "a1", "m2", "a2"):
            p.add_argument(f"--{f}", help="comma-separated initial values")
        p.add_argument("--pc", type=int, default=0)
        p.add_argument("--cache", default="", help="comma-separated initial cache")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relbisim", description="Relative bisimulation workbench.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle", help="decide relative trace equality of one quad")
    _instance_flags(p, quad=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("prove", help="check a proof script against one quad")
    p.add_argument("script")
    p.add_argument("--relation", action="append", metavar="NAME=FILE", help="register a relation file")
    _instance_flags(p, quad=True)
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("closure", help="check invariant closure")
    p.add_argument("--invariant", help="relation file (with --systems) or I-am / I-ooo")
    p.add_argument("--c-step-budget", type=int)
    _instance_flags(p, quad=True)
    p.set_defaults(func=cmd_closure)

    p = sub.add_parser("casestudy", help="run an exhaustive case study")
    p.add_argument("--no-closure", action="store_true", help="oracle only")
    p.add_argument("-v", "--verbose", action="store_true")
    _instance_flags(p)
    p.set_defaults(func=cmd_casestudy)

    p = sub.add_parser("gallery", help="run the built-in counterexamples")
    p.add_argument("name", nargs="?", default="all", choices=["all", *GALLERY])
    p.add_argument("--json", metavar="OUT")
    p.set_defaults(func=cmd_gallery)

    p = sub.add_parser("fuzz", help="differential fuzzing against the oracle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--max-states", type=int, default=8)
    p.add_argument("--max-obs", type=int, default=3)
    p.add_argument("--mutated", action="store_true", help="disable the H-Step leak check (testing only)")
    p.add_argument("--json", metavar="OUT")
    p.set_defaults(func=cmd_fuzz)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, InvalidScheduler) as e:
        print(f"relbisim: error: {e}", file=sys.stderr)
        return USAGE
    except BudgetExceeded as e:
        print(f"relbisim: budget exceeded: {e}", file=sys.stderr)
        return USAGE
    except ValueError as e:
        print(f"relbisim: error: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
