"""Proof scripts: a small tree AST and its s-expression text format.

Grammar (whitespace-insensitive, ``;`` starts a comment)::

    node   := (cleak) | (cstep node) | (cstep' node) | (hstep node)
            | (cycle) | (guard node)
            | (invariant NAME case+)
            | (upto FUNC arg* node)
            | (reduce-c-leak (witness STATE STATE) (side node) node)
            | (augment-h-leak (witness STATE STATE) (lockstep-side lnode) node)
            | (lockstep lnode)
    case   := (case LABEL node)
    lnode  := (leak) | (step lnode) | (cycle) | (guard lnode)
            | (invariant NAME lcase+)
    lcase  := (case LABEL lnode)

``STATE`` and ``arg`` are double-quoted strings (state literals are decoded
by a model-specific codec) or bare integers.  :func:`dumps` emits the
canonical layout, one node per line, and ``dumps(loads(t)) == t`` for any
canonical ``t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

STEP_RULES = ("cleak", "cstep", "cstep'", "hstep", "cycle", "guard")
LOCKSTEP_RULES = ("leak", "step", "cycle", "guard")
LEAVES = ("cleak", "cycle", "leak")


class ScriptSyntaxError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line, self.col = line, col


@dataclass(frozen=True)
class Step:
    rule: str
    child: Optional["Node"] = None


@dataclass(frozen=True)
class Case:
    label: str
    body: "Node"


@dataclass(frozen=True)
class Invariant:
    relation: str
    cases: tuple


@dataclass(frozen=True)
class UpTo:
    function: str
    args: tuple
    body: "Node"


@dataclass(frozen=True)
class ReduceCLeak:
    witness: tuple
    side: "Node"
    body: "Node"


@dataclass(frozen=True)
class AugmentHLeak:
    witness: tuple
    side: "Node"
    body: "Node"
    lockstep_side: bool = True


@dataclass(frozen=True)
class Lockstep:
    body: "Node"


Node = Union[Step, Invariant, UpTo, ReduceCLeak, AugmentHLeak, Lockstep]


@dataclass
class ProofScript:
    """A script tree plus the relations its Invariant nodes refer to."""

    root: Node
    relations: dict = field(default_factory=dict)

    def dumps(self) -> str:
        return dumps(self.root)


def chain(*rules: str) -> Step:
    """Build a linear chain of step rules, e.g. ``chain('cstep', 'cleak')``."""
    node = None
    for r in reversed(rules):
        node = Step(r, node)
    return node


def node_size(node) -> int:
    if node is None:
        return 0
    if isinstance(node, Step):
        return 1 + node_size(node.child)
    if isinstance(node, Invariant):
        return 1 + sum(node_size(c.body) for c in node.cases)
    if isinstance(node, (UpTo, Lockstep)):
        return 1 + node_size(node.body)
    return 1 + node_size(node.side) + node_size(node.body)


# ---------------------------------------------------------------------------
# reading


def _tokenize(text: str):
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
        elif ch.isspace():
            i, col = i + 1, col + 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield ch, ch, line, col
            i, col = i + 1, col + 1
        elif ch == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    j += 1
                buf.append(text[j])
                j += 1
            if j >= n:
                raise ScriptSyntaxError("unterminated string", line, col)
            yield "str", "".join(buf), line, col
            col += j + 1 - i
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '();"':
                j += 1
            yield "sym", text[i:j], line, col
            col += j - i
            i = j


def _read_sexprs(text: str):
    stack: list = [[]]
    pos: list = [(1, 1)]
    for kind, val, line, col in _tokenize(text):
        if kind == "(":
            stack.append([])
            pos.append((line, col))
        elif kind == ")":
            if len(stack) == 1:
                raise ScriptSyntaxError("unbalanced ')'", line, col)
            items = stack.pop()
            start = pos.pop()
            stack[-1].append(("list", items, start))
        else:
            stack[-1].append((kind, val, (line, col)))
    if len(stack) != 1:
        line, col = pos[-1]
        raise ScriptSyntaxError("unbalanced '('", line, col)
    return stack[0]


def _expect_list(item, what):
    if item[0] != "list" or not item[1]:
        raise ScriptSyntaxError(f"expected {what}", *item[2])
    head = item[1][0]
    if head[0] != "sym":
        raise ScriptSyntaxError(f"expected {what}", *item[2])
    return head[1], item[1][1:]


def _atom(item, what):
    if item[0] not in ("sym", "str"):
        raise ScriptSyntaxError(f"expected {what}", *item[2])
    return item[1]


def _parse_node(item, lockstep: bool = False):
    head, rest = _expect_list(item, "a proof node")
    where = item[2]
    rules = LOCKSTEP_RULES if lockstep else STEP_RULES
    if head in rules:
        if head in LEAVES:
            if rest:
                raise ScriptSyntaxError(f"({head}) takes no arguments", *where)
            return Step(head)
        if len(rest) != 1:
            at = rest[1][2] if len(rest) > 1 else where
            raise ScriptSyntaxError(f"({head} ...) takes exactly one sub-node", *at)
        return Step(head, _parse_node(rest[0], lockstep))
    if head == "invariant":
        if len(rest) < 2:
            raise ScriptSyntaxError("(invariant NAME case+) needs at least one case", *where)
        name = _atom(rest[0], "a relation name")
        cases = []
        for c in rest[1:]:
            chead, crest = _expect_list(c, "(case LABEL node)")
            if chead != "case" or len(crest) != 2:
                raise ScriptSyntaxError("expected (case LABEL node)", *c[2])
            cases.append(Case(_atom(crest[0], "a case label"), _parse_node(crest[1], lockstep)))
        return Invariant(name, tuple(cases))
    if lockstep:
        raise ScriptSyntaxError(f"rule {head!r} is not a lockstep rule", *item[1][0][2])
    if head == "upto":
        if len(rest) < 2:
            raise ScriptSyntaxError("(upto FUNC arg* node)", *where)
        fname = _atom(rest[0], "an up-to function name")
        args = tuple(_atom(a, "an argument") for a in rest[1:-1])
        return UpTo(fname, args, _parse_node(rest[-1]))
    if head in ("reduce-c-leak", "augment-h-leak"):
        if len(rest) != 3:
            raise ScriptSyntaxError(f"({head} (witness ..) (side ..) node)", *where)
        whead, wargs = _expect_list(rest[0], "(witness STATE STATE)")
        if whead != "witness" or len(wargs) != 2:
            raise ScriptSyntaxError("expected (witness STATE STATE)", *rest[0][2])
        witness = tuple(_atom(a, "a state literal") for a in wargs)
        shead, sargs = _expect_list(rest[1], "a side proof")
        if len(sargs) != 1:
            raise ScriptSyntaxError("side proof takes one node", *rest[1][2])
        body = _parse_node(rest[2])
        if head == "reduce-c-leak":
            if shead != "side":
                raise ScriptSyntaxError("expected (side node)", *rest[1][2])
            return ReduceCLeak(witness, _parse_node(sargs[0]), body)
        if shead == "lockstep-side":
            return AugmentHLeak(witness, _parse_node(sargs[0], lockstep=True), body, True)
        if shead == "side":
            return AugmentHLeak(witness, _parse_node(sargs[0]), body, False)
        raise ScriptSyntaxError("expected (lockstep-side lnode)", *rest[1][2])
    if head == "lockstep":
        if len(rest) != 1:
            raise ScriptSyntaxError("(lockstep lnode)", *where)
        return Lockstep(_parse_node(rest[0], lockstep=True))
    raise ScriptSyntaxError(f"unknown rule {head!r}", *item[1][0][2])


def loads(text: str) -> Node:
    items = _read_sexprs(text)
    if not items:
        raise ScriptSyntaxError("empty script", 1, 1)
    if len(items) > 1:
        raise ScriptSyntaxError(f"expected exactly one top-level node, got {len(items)}", *items[1][2])
    return _parse_node(items[0])


# ---------------------------------------------------------------------------
# writing


def _atom_text(a) -> str:
    a = str(a)
    if a and all(ch.isalnum() or ch in "-_'+.*/<>=!?" for ch in a):
        return a
    return '"' + a.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _emit(node, depth: int, out: list):
    pad = "  " * depth
    if isinstance(node, Step):
        if node.child is None:
            out.append(f"{pad}({node.rule})")
        else:
            out.append(f"{pad}({node.rule}")
            _emit(node.child, depth + 1, out)
            out[-1] += ")"
    elif isinstance(node, Invariant):
        out.append(f"{pad}(invariant {_atom_text(node.relation)}")
        for c in node.cases:
            out.append(f"{pad}  (case {_atom_text(c.label)}")
            _emit(c.body, depth + 2, out)
            out[-1] += ")"
        out[-1] += ")"
    elif isinstance(node, UpTo):
        args = "".join(" " + _atom_text(a) for a in node.args)
        out.append(f"{pad}(upto {_atom_text(node.function)}{args}")
        _emit(node.body, depth + 1, out)
        out[-1] += ")"
    elif isinstance(node, (ReduceCLeak, AugmentHLeak)):
        head = "reduce-c-leak" if isinstance(node, ReduceCLeak) else "augment-h-leak"
        side = "lockstep-side" if getattr(node, "lockstep_side", False) else "side"
        w = " ".join(_atom_text(x) for x in node.witness)
        out.append(f"{pad}({head} (witness {w})")
        out.append(f"{pad}  ({side}")
        _emit(node.side, depth + 2, out)
        out[-1] += ")"
        _emit(node.body, depth + 1, out)
        out[-1] += ")"
    elif isinstance(node, Lockstep):
        out.append(f"{pad}(lockstep")
        _emit(node.body, depth + 1, out)
        out[-1] += ")"
    else:
        raise TypeError(f"not a script node: {node!r}")


def dumps(node) -> str:
    out: list = []
    _emit(node, 0, out)
    return "\n".join(out) + "\n"
