"""The trusted proof kernel.

Goals are proof quintuples: a quad, the accumulated coinduction hypothesis
and a guardedness flag.  :func:`apply_rule` and :func:`apply_lockstep_rule`
are the only places where rule side conditions are checked; the script
checker, the closure search and proof generation all go through them or
mirror them exactly.
"""
from __future__ import annotations

import ast
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional

from .lts import DEFAULT_BUDGET, BudgetExceeded, TransitionSystem
from .oracle import EMPTY, TOP, Quad, QuadRelation, close_quads, compute_rbisim, rel_trace_eq
from . import script as S


class NotProvable(ValueError):
    """The requested quad is not relatively bisimilar, so no proof exists."""


# ---------------------------------------------------------------------------
# test-only mutations

NO_HSTEP_LEAK_CHECK = "no-hstep-leak-check"
_MUTATIONS: set = set()


@contextmanager
def mutation(name: str):
    """Disable a kernel check for the duration of the block (tests only)."""
    if name != NO_HSTEP_LEAK_CHECK:
        raise ValueError(f"unknown mutation {name!r}")
    _MUTATIONS.add(name)
    try:
        yield
    finally:
        _MUTATIONS.discard(name)


def _hleak_equal(H: TransitionSystem, q: Quad) -> bool:
    if NO_HSTEP_LEAK_CHECK in _MUTATIONS:
        return True
    return H.leak(q.h1) == H.leak(q.h2)


# ---------------------------------------------------------------------------
# goals, rules, verdicts


@dataclass(frozen=True)
class Goal:
    """A proof quintuple.  ``hypothesis`` is a tuple of relations read as their union."""

    quad: Quad
    hypothesis: tuple = ()
    guarded: bool = True

    def __post_init__(self):
        object.__setattr__(self, "quad", Quad(*self.quad))
        object.__setattr__(self, "hypothesis", tuple(self.hypothesis))

    def in_hypothesis(self, q: Optional[Quad] = None) -> bool:
        q = self.quad if q is None else q
        return any(q in r for r in self.hypothesis)

    def replace(self, quad) -> "Goal":
        return Goal(quad, self.hypothesis, self.guarded)


class Rule(NamedTuple):
    tag: str
    relation: Optional[QuadRelation] = None


C_LEAK = Rule("cleak")
C_STEP = Rule("cstep")
C_STEP_PRIME = Rule("cstep'")
H_STEP = Rule("hstep")
CYCLE = Rule("cycle")
GUARD = Rule("guard")
L_LEAK = Rule("leak")
L_STEP = Rule("step")


def invariant(rel: QuadRelation) -> Rule:
    return Rule("invariant", rel)


@dataclass(frozen=True)
class Failure:
    goal: object
    rule: str
    reason: str
    detail: str = ""

    def __str__(self) -> str:
        where = f"at {self.goal.quad!r}" if isinstance(self.goal, Goal) else ""
        extra = f": {self.detail}" if self.detail else ""
        return f"{self.reason} ({self.rule}) {where}{extra}"


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    failure: Optional[Failure] = None

    def __post_init__(self):
        if self.accepted != (self.failure is None):
            raise ValueError("a verdict carries a failure exactly when it rejects")

    def __bool__(self) -> bool:
        return self.accepted


class KernelError(Exception):
    def __init__(self, failure: Failure):
        super().__init__(str(failure))
        self.failure = failure


def _violated(g, rule, detail):
    raise KernelError(Failure(g, rule, "side-condition-violated", detail))


def _invariant_goals(g: Goal, r: Rule, universe) -> list:
    rel = r.relation
    if rel is None:
        raise ValueError("Invariant rule needs a relation")
    if not g.guarded:
        _violated(g, "invariant", "goal is unguarded")
    if g.quad not in rel:
        _violated(g, "invariant", f"quad not in {rel.name}")
    hyp = g.hypothesis if any(h is rel for h in g.hypothesis) else g.hypothesis + (rel,)
    return [Goal(m, hyp, True) for m in rel.enumerate(None if rel.is_extensional else universe)]


def _shared_rule(g: Goal, r: Rule, universe):
    if r.tag == "invariant":
        return _invariant_goals(g, r, universe)
    if r.tag == "cycle":
        if g.guarded:
            _violated(g, "cycle", "hypothesis is guarded")
        if not g.in_hypothesis():
            _violated(g, "cycle", "quad not in hypothesis")
        return []
    if r.tag == "guard":
        if g.guarded:
            _violated(g, "guard", "goal is already guarded")
        return [Goal(g.quad, g.hypothesis, True)]
    raise KernelError(Failure(g, r.tag, "unknown-rule"))


def apply_rule(C: TransitionSystem, H: TransitionSystem, g: Goal, r: Rule,
               universe: Optional[Iterable] = None) -> list:
    """Apply one core rule to a goal and return its subgoals.

    Raises :class:`KernelError` (reason ``side-condition-violated``) when the
    rule does not apply.  ``universe`` is needed only to enumerate
    intensional Invariant relations.
    """
    q = g.quad
    if r.tag == "cleak":
        if not g.guarded:
            _violated(g, "cleak", "goal is unguarded")
        if C.leak(q.s1) == C.leak(q.s2):
            _violated(g, "cleak", "contract leaks are equal")
        return []
    if r.tag in ("cstep", "cstep'"):
        if not g.guarded:
            _violated(g, r.tag, "goal is unguarded")
        if r.tag == "cstep'" and C.leak(q.s1) != C.leak(q.s2):
            return []
        return [Goal(q.cstep(C), g.hypothesis, True)]
    if r.tag == "hstep":
        if not g.guarded:
            _violated(g, "hstep", "goal is unguarded")
        if not _hleak_equal(H, q):
            _violated(g, "hstep", "hardware leaks differ")
        return [Goal(q.hstep(H), g.hypothesis, False)]
    return _shared_rule(g, r, universe)


def apply_lockstep_rule(C: TransitionSystem, H: TransitionSystem, g: Goal, r: Rule,
                        universe: Optional[Iterable] = None) -> list:
    """Rules of the lockstep quintuples: Leak, Step, Invariant, Cycle, Guard.

    For the hardware-side composition both systems are the hardware system
    and the quad is ``(h1', h2', h1, h2)``.
    """
    q = g.quad
    if r.tag == "leak":
        if not g.guarded:
            _violated(g, "leak", "goal is unguarded")
        if C.leak(q.s1) == C.leak(q.s2):
            _violated(g, "leak", "left leaks are equal")
        return []
    if r.tag == "step":
        if not g.guarded:
            _violated(g, "step", "goal is unguarded")
        if H.leak(q.h1) != H.leak(q.h2):
            _violated(g, "step", "right leaks differ")
        return [Goal(q.lockstep(C, H), g.hypothesis, False)]
    if r.tag in ("cleak", "cstep", "cstep'", "hstep"):
        raise KernelError(Failure(g, r.tag, "non-lockstep-rule",
                                  "only leak/step/invariant/cycle/guard are lockstep rules"))
    return _shared_rule(g, r, universe)


# ---------------------------------------------------------------------------
# script checking


def literal_codec(text: str):
    """Default state-literal decoder: a Python literal."""
    return ast.literal_eval(text)


BUILTIN_RELATIONS = {"top": TOP, "empty": EMPTY}


class Checker:
    """Walks a script tree against a goal, raising :class:`KernelError` on failure."""

    def __init__(self, C, H, relations=None, universe=None, budget: int = 1_000_000,
                 codec: Callable = literal_codec, lockstep: bool = False,
                 memo: Optional[dict] = None):
        self.C, self.H = C, H
        self.memo = memo
        self.relations = dict(BUILTIN_RELATIONS)
        self.relations.update(relations or {})
        self._universe = None if universe is None else list(universe)
        self.budget = budget
        self.codec = codec
        self.lockstep = lockstep
        self.steps = 0
        self.root: Optional[Goal] = None

    def universe(self) -> list:
        if self._universe is None:
            seeds = [self.root.quad] if self.root is not None else []
            self._universe = close_quads(self.C, self.H, seeds)
        return self._universe

    def fail(self, goal, rule, reason, detail=""):
        raise KernelError(Failure(goal, rule, reason, detail))

    def relation(self, name: str, goal) -> QuadRelation:
        rel = self.relations.get(name)
        if rel is None:
            self.fail(goal, "invariant", "unknown-relation", name)
        return rel

    def apply(self, goal: Goal, rule: Rule) -> list:
        needs = rule.relation is not None and not rule.relation.is_extensional
        uni = self.universe() if needs else None
        if self.lockstep:
            return apply_lockstep_rule(self.C, self.H, goal, rule, uni)
        return apply_rule(self.C, self.H, goal, rule, uni)

    def sub(self, C, H, lockstep: bool) -> "Checker":
        return Checker(C, H, self.relations, None, self.budget, self.codec, lockstep)

    def run(self, goal: Goal, node):
        self.root = goal
        return self.check(goal, node)

    def check(self, goal: Goal, node):
        self.steps += 1
        if self.steps > self.budget:
            self.fail(goal, "-", "budget-exceeded", f"more than {self.budget} nodes")
        if isinstance(node, S.Step):
            subs = self.apply(goal, Rule(node.rule))
            if not subs:
                return
            if node.child is None:
                self.fail(goal, node.rule, "malformed", "rule leaves a subgoal but has no sub-node")
            self.check(subs[0], node.child)
        elif isinstance(node, S.Invariant):
            rel = self.relation(node.relation, goal)
            if self.memo is not None:
                # The obligation set depends only on the relation, the
                # hypothesis and the node, never on the quad being proved.
                if goal.quad not in rel or not goal.guarded:
                    self.apply(goal, invariant(rel))
                key = (self.lockstep, id(rel), tuple(map(id, goal.hypothesis)), id(node))
                if key in self.memo:
                    return
            subs = self.apply(goal, invariant(rel))
            for sg in subs:
                self._match_case(sg, node)
            if self.memo is not None:
                self.memo[key] = (rel, goal.hypothesis, node)
        elif isinstance(node, S.Lockstep):
            if self.lockstep:
                self.fail(goal, "lockstep", "malformed", "nested lockstep node")
            self.sub(self.C, self.H, True).check_from(self, goal, node.body)
        elif isinstance(node, (S.UpTo, S.ReduceCLeak, S.AugmentHLeak)):
            if self.lockstep:
                self.fail(goal, "upto", "non-lockstep-rule", "up-to rules are not lockstep rules")
            from . import upto
            upto.check_node(self, goal, node)
        else:
            self.fail(goal, "-", "malformed", f"unexpected node {type(node).__name__}")

    def check_from(self, parent: "Checker", goal: Goal, node):
        self.root = parent.root
        self._universe = parent._universe
        self.steps = parent.steps
        try:
            self.check(goal, node)
        finally:
            parent.steps = self.steps

    def _match_case(self, sg: Goal, node: S.Invariant):
        last = None
        for case in node.cases:
            try:
                self.check(sg, case.body)
                return
            except KernelError as e:
                if e.failure.reason == "budget-exceeded":
                    raise
                last = (case.label, e.failure)
        label, f = last
        self.fail(sg, "invariant", "unmatched-obligation",
                  f"no case of {node.relation} discharges it; last tried {label}: {f}")


def check_script(C, H, root, script, relations=None, universe=None,
                 budget: int = 1_000_000, codec: Callable = literal_codec,
                 lockstep: bool = False, memo: Optional[dict] = None) -> Verdict:
    """Check a proof script against a root goal (a :class:`Goal` or a bare quad).

    ``script`` may be a :class:`~relbisim.script.ProofScript`, a node or the
    script text.  Relations named in the script are looked up in
    ``relations`` (plus the script's own registry and the built-ins).

    ``memo`` may be shared between calls on the same systems and universe
    to avoid re-checking identical Invariant obligation sets.
    """
    if isinstance(script, str):
        script = S.loads(script)
    rels = {}
    if isinstance(script, S.ProofScript):
        rels.update(script.relations)
        script = script.root
    rels.update(relations or {})
    goal = root if isinstance(root, Goal) else Goal(Quad(*root))
    checker = Checker(C, H, rels, universe, budget, codec, lockstep, memo)
    try:
        checker.run(goal, script)
    except KernelError as e:
        return Verdict(False, e.failure)
    except BudgetExceeded as e:
        return Verdict(False, Failure(goal, "-", "budget-exceeded", str(e)))
    return Verdict(True)


# ---------------------------------------------------------------------------
# invariant closure


@dataclass
class ClosureVerdict:
    accepted: bool
    failure: Optional[Failure] = None
    derivations: dict = field(default_factory=dict)
    budget_limited: bool = False
    checked: int = 0

    def __bool__(self) -> bool:
        return self.accepted

    def script(self, relation_name: str) -> S.Invariant:
        """The accepted closure as an Invariant node, one case per derivation shape."""
        shapes = sorted(set(self.derivations.values()), key=lambda t: (len(t), t))
        cases = tuple(S.Case(_shape_label(t), S.chain(*t)) for t in shapes)
        return S.Invariant(relation_name, cases)


def _shape_label(tags: tuple) -> str:
    parts = []
    for t in tags:
        t = t.replace("'", "p")
        if parts and parts[-1][0] == t:
            parts[-1][1] += 1
        else:
            parts.append([t, 1])
    return ".".join(t if n == 1 else f"{t}{n}" for t, n in parts)


def closure_derivation(C, H, R, q: Quad, c_step_budget: Optional[int] = None,
                       strict: bool = False, max_nodes: int = DEFAULT_BUDGET):
    """Search a guarded derivation of ``q`` under hypothesis ``R``.

    The derivation shape is a path of C-Step, H-Step(+Guard) moves with at
    most ``c_step_budget`` consecutive C-Steps, ending in C-Leak or in an
    H-Step whose landing quad lies in ``R`` (then Cycle).  With ``strict``
    every H-Step must land in ``R``.  Rules are tried in the order C-Leak,
    H-Step, C-Step and the search is breadth-first, so the shortest
    derivation is returned.

    Returns ``(tags, landing, limited)`` where ``tags`` is None if no
    derivation exists, ``landing`` is the quad closed by Cycle (or None) and
    ``limited`` says whether the C-Step budget or ``max_nodes`` cut the search.
    """
    if c_step_budget is not None and c_step_budget < 0:
        raise ValueError("c_step_budget must be non-negative")
    limit = float("inf") if c_step_budget is None else c_step_budget
    start = (Quad(*q), 0)
    parent = {start: None}
    best = {start[0]: 0}
    todo = deque([start])
    limited = False

    def path(node, tail):
        tags = list(tail)
        while parent[node] is not None:
            prev, moves = parent[node]
            tags[:0] = moves
            node = prev
        return tuple(tags)

    while todo:
        node = todo.popleft()
        cur, k = node
        if C.leak(cur.s1) != C.leak(cur.s2):
            return path(node, ("cleak",)), None, limited
        succ = []
        if _hleak_equal(H, cur):
            nxt = cur.hstep(H)
            if nxt in R:
                return path(node, ("hstep", "cycle")), nxt, limited
            if not strict:
                succ.append(((nxt, 0), ("hstep", "guard")))
        if k < limit:
            succ.append(((cur.cstep(C), k + 1), ("cstep",)))
        else:
            limited = True
        for child, moves in succ:
            if child[1] < best.get(child[0], float("inf")):
                if len(parent) >= max_nodes:
                    return None, None, True
                best[child[0]] = child[1]
                parent[child] = (node, moves)
                todo.append(child)
    return None, None, limited


def check_invariant_closure(C, H, R: QuadRelation, c_step_budget: Optional[int] = None,
                            universe: Optional[Iterable] = None, strict: bool = False,
                            max_nodes: int = DEFAULT_BUDGET) -> ClosureVerdict:
    """Check that every member of ``R`` has a bounded derivation back into ``R``.

    ``c_step_budget=None`` lets the C-Step run continue until the contract
    pair repeats, which is the same as the bound |S_C|^2 + 1.
    """
    if c_step_budget is not None and c_step_budget < 1:
        raise ValueError("c_step_budget must be at least 1")
    members = R.enumerate(None if R.is_extensional else universe)
    out = ClosureVerdict(True)
    for q in members:
        tags, _, limited = closure_derivation(C, H, R, q, c_step_budget, strict, max_nodes)
        out.checked += 1
        if tags is None:
            note = " (search was cut by the budget)" if limited else ""
            out.accepted = False
            out.budget_limited = limited
            out.failure = Failure(Goal(q, (R,)), "closure", "closure-failed",
                                  f"no bounded derivation back into {R.name}{note}")
            return out
        out.derivations[q] = tags
    return out


# ---------------------------------------------------------------------------
# completeness witnesses


def _rbisim_path(C, rb, q: Quad) -> tuple:
    tags = []
    while True:
        kind, _ = rb.justification[q]
        if kind == "cleak":
            tags.append("cleak")
            return tuple(tags)
        if kind == "hstep":
            tags += ["hstep", "cycle"]
            return tuple(tags)
        tags.append("cstep")
        q = q.cstep(C)


def derive_proof(C, H, q, universe: Optional[Iterable] = None,
                 budget: int = DEFAULT_BUDGET, rbisim=None) -> S.ProofScript:
    """Emit a script proving ``q`` with the relative bisimilarity relation as invariant.

    Every member gets the path recorded by the inner least fixpoint:
    contract steps down to rank zero, then C-Leak or H-Step and Cycle.
    A previously computed relation can be passed as ``rbisim``; the
    emitted script is then shared by all quads of that relation.
    """
    q = Quad(*q)
    if not rel_trace_eq(C, H, q, budget):
        raise NotProvable(f"{q!r}: equal contract traces but different hardware traces")
    rb = rbisim
    if rb is None:
        if universe is None:
            universe = close_quads(C, H, [q], budget)
        rb = compute_rbisim(C, H, universe)
    if q not in rb:
        raise NotProvable(f"{q!r} is outside the computed relation")
    cached = getattr(rb, "_proof_script", None)
    if cached is not None:
        return cached
    shapes = {_rbisim_path(C, rb, m) for m in rb.members}
    ordered = sorted(shapes, key=lambda t: (len(t), t))
    cases = tuple(S.Case(_shape_label(t), S.chain(*t)) for t in ordered)
    script = S.ProofScript(S.Invariant("rbisim", cases), {"rbisim": rb})
    rb._proof_script = script
    return script
