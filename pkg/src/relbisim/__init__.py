"""Relative bisimulation workbench.

Deterministic transition systems, an exact oracle for relative trace
equality, a small proof kernel for relative bisimulation, up-to rules,
and the speculation and out-of-order case studies on a toy ISA.
"""
from .lts import Obs, TransitionSystem, trace_prefix, encode_termination, reachable_states
from .oracle import (
    Quad, QuadRelation, traces_equal, rel_trace_eq, compute_bisim, compute_rbisim,
    compute_rbisim_lockstep, compute_rbisim_relaxed, close_quads,
)
from .kernel import Goal, Rule, Verdict, apply_rule, check_script, check_invariant_closure, derive_proof
from .script import ProofScript, loads, dumps

__all__ = [
    "Obs", "TransitionSystem", "trace_prefix", "encode_termination", "reachable_states",
    "Quad", "QuadRelation", "traces_equal", "rel_trace_eq", "compute_bisim", "compute_rbisim",
    "compute_rbisim_lockstep", "compute_rbisim_relaxed", "close_quads",
    "Goal", "Rule", "Verdict", "apply_rule", "check_script", "check_invariant_closure", "derive_proof",
    "ProofScript", "loads", "dumps",
]

__version__ = "0.1.0"
