import random

import pytest

from relbisim.lts import TransitionSystem, named


def system(edges, leaks, name="T"):
    """Finite system from successor and observation-name tables."""
    return TransitionSystem.from_tables(edges, {s: named(o) for s, o in leaks.items()}, name)


@pytest.fixture
def rng():
    return random.Random(1234)
