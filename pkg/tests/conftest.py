from fractions import Fraction
from typing import List, Tuple

import numpy as np
import pytest

from src.benchmarks import load_benchmark
from src.dsl import Program, parse
from src.learn import sample_state
from src.partition import sympar
from src.solver import SolverConfig

TWO_ACTIONS = """
env clamp_walk
state x: real in [0, 10]
actions d
action left = -1
action right = 1
body
  x = x + d
  if x < 0: x = 0 end
  if x > 10: x = 10 end
  if x >= 9:
    reward = 1
    done = 1
  end
end
"""

ONE_BRANCH = """
env one_branch
state x: real in [0, 10]
action stay
body
  if x < 5: reward = 1 else: reward = 0 end
end
"""


@pytest.fixture(scope="session")
def cfg() -> SolverConfig:
    return SolverConfig()


@pytest.fixture
def clamp_walk() -> Program:
    return parse(TWO_ACTIONS)


@pytest.fixture
def one_branch() -> Program:
    return parse(ONE_BRANCH)


@pytest.fixture(scope="session")
def navigation() -> Program:
    return load_benchmark("navigation")[0]


@pytest.fixture(scope="session")
def navigation_partition(navigation, cfg):
    return sympar(navigation, 8, cfg)


def random_states(program: Program, n: int, seed: int = 0) -> List[Tuple[Fraction, ...]]:
    rng = np.random.default_rng(seed)
    return [sample_state(program, rng) for _ in range(n)]
