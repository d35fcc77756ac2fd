import random

import pytest
from hypothesis import given, settings, strategies as st

from relbisim import script as S
from relbisim.random_systems import random_chain


CANONICAL = """\
(invariant I-am
  (case load
    (cstep'
      (hstep
        (cycle))))
  (case add
    (cstep
      (hstep
        (cycle)))))
"""


def test_canonical_text_round_trips_byte_for_byte():
    assert S.dumps(S.loads(CANONICAL)) == CANONICAL


def test_one_line_form_parses_to_same_tree():
    flat = "(invariant I-am (case load (cstep' (hstep (cycle)))) (case add (cstep (hstep (cycle)))))"
    assert S.loads(flat) == S.loads(CANONICAL)


def test_comments_are_ignored():
    assert S.loads("; a proof\n(cstep ; step once\n (cleak))") == S.chain("cstep", "cleak")


def test_upto_forms_round_trip():
    text = """\
(upto c-swap
  (reduce-c-leak (witness 'a' 'b')
    (side
      (cleak))
    (augment-h-leak (witness 'x' 'y')
      (lockstep-side
        (step
          (cycle)))
      (upto c-leak-eq 1 "a b"
        (lockstep
          (leak))))))
"""
    node = S.loads(text)
    assert S.dumps(node) == text
    assert isinstance(node, S.UpTo) and isinstance(node.body, S.ReduceCLeak)


@pytest.mark.parametrize("bad, where", [
    ("(cstep", (1, 1)),
    ("(cstep (cleak)))", (1, 16)),
    ("(frobnicate)", (1, 2)),
    ("(cleak) (cleak)", (1, 9)),
    ("(invariant R)", (1, 1)),
    ("", (1, 1)),
    ('(upto c-swap "open', (1, 14)),
    ("(cstep\n  (cycle) (cycle))", (2, 11)),
])
def test_syntax_errors_carry_positions(bad, where):
    with pytest.raises(S.ScriptSyntaxError) as e:
        S.loads(bad)
    assert (e.value.line, e.value.col) == where


def test_lockstep_rules_only_inside_lockstep():
    with pytest.raises(S.ScriptSyntaxError):
        S.loads("(step (cycle))")
    assert S.loads("(lockstep (step (cycle)))") == S.Lockstep(S.chain("step", "cycle"))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_random_chains_round_trip(seed):
    node = random_chain(random.Random(seed), 8)
    text = S.dumps(node)
    assert S.loads(text) == node
    assert S.dumps(S.loads(text)) == text
