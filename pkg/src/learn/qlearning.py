"""Tabular Q-learning over an observation function.

The observation is anything with ``size``, ``locate(state)`` and
``witnesses()``: a SymPar ``Partition`` or the tile-coding baseline.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Literal, Optional, Protocol, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field, model_validator

from ..config import get_settings
from ..dsl.ast import Program
from ..dsl.interpreter import Interpreter
from .metrics import Outcome, RunMetrics

logger = structlog.get_logger()

State = Tuple[Fraction, ...]


class Observation(Protocol):
    @property
    def size(self) -> int: ...

    def locate(self, state: Sequence) -> int: ...

    def witnesses(self) -> List[Tuple[int, State]]: ...


class TrainConfig(BaseModel):
    episodes: int = Field(default=500, gt=0)
    max_steps: int = Field(default=200, gt=0)
    alpha: float = Field(default=0.1, gt=0, le=1)
    gamma: float = Field(default=0.99, ge=0, le=1)
    epsilon_start: float = Field(default=1.0, ge=0, le=1)
    epsilon_end: float = Field(default=0.05, ge=0, le=1)
    epsilon_decay: float = Field(default=0.8, gt=0, le=1)  # fraction of episodes the decay spans
    seed: int = 0
    seeding_mode: Literal["witness_first", "random"] = "witness_first"
    start: Optional[List[float]] = None
    success_threshold: float = 0.0

    @model_validator(mode="after")
    def _epsilon_order(self) -> "TrainConfig":
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must not exceed epsilon_start")
        return self

    @classmethod
    def from_settings(cls, **overrides) -> "TrainConfig":
        settings = get_settings()
        values = dict(
            episodes=settings.episodes,
            max_steps=settings.max_steps,
            alpha=settings.alpha,
            gamma=settings.gamma,
            epsilon_start=settings.epsilon_start,
            epsilon_end=settings.epsilon_end,
            epsilon_decay=settings.epsilon_decay,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def epsilon(self, episode: int) -> float:
        span = self.epsilon_decay * self.episodes
        progress = min(1.0, episode / span) if span > 0 else 1.0
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * progress


@dataclass
class QTable:
    values: np.ndarray
    visits: np.ndarray

    @classmethod
    def zeros(cls, n_obs: int, n_actions: int) -> "QTable":
        return cls(np.zeros((n_obs, n_actions)), np.zeros((n_obs, n_actions), dtype=np.int64))

    def greedy(self, obs: int) -> int:
        # np.argmax returns the first maximum: ties go to the lowest action index.
        return int(np.argmax(self.values[obs]))

    def update(self, obs: int, action: int, reward: float, next_obs: int, done: bool, alpha: float, gamma: float):
        future = 0.0 if done else gamma * float(self.values[next_obs].max())
        self.values[obs, action] += alpha * (reward + future - self.values[obs, action])
        self.visits[obs, action] += 1

    @property
    def part_visits(self) -> np.ndarray:
        return self.visits.sum(axis=1)

    def policy(self) -> List[int]:
        return [self.greedy(o) for o in range(self.values.shape[0])]


def sample_state(program: Program, rng: np.random.Generator) -> State:
    """Uniform random state of the box; integer-valued variables get integers."""
    state = []
    for var in program.state_vars:
        if var.discrete:
            state.append(Fraction(int(rng.integers(int(var.lower), int(var.upper) + 1))))
        else:
            state.append(Fraction(float(rng.uniform(float(var.lower), float(var.upper)))))
    return tuple(state)


def classify(done: bool, reward: Fraction, threshold: float) -> Outcome:
    if not done:
        return "timeout"
    return "success" if reward >= Fraction(str(threshold)) else "failure"


def train(program: Program, obs: Observation, cfg: TrainConfig) -> Tuple[QTable, RunMetrics]:
    """Episodic epsilon-greedy Q-learning; deterministic for a given ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    interpreter = Interpreter(program)
    q = QTable.zeros(obs.size, program.n_actions)
    metrics = RunMetrics()
    seeds = obs.witnesses() if cfg.seeding_mode == "witness_first" else []
    fixed = tuple(Fraction(str(v)) for v in cfg.start) if cfg.start is not None else None

    for episode in range(cfg.episodes):
        if episode < len(seeds):
            state = seeds[episode][1]
        else:
            state = fixed if fixed is not None else sample_state(program, rng)
        epsilon = cfg.epsilon(episode)
        o = obs.locate(state)
        total = Fraction(0)
        outcome: Outcome = "timeout"
        steps = 0

        for steps in range(1, cfg.max_steps + 1):
            if rng.random() < epsilon:
                action = int(rng.integers(program.n_actions))
            else:
                action = q.greedy(o)
            result = interpreter.step(state, action, rng)
            next_o = obs.locate(result.next_state)
            q.update(o, action, float(result.reward), next_o, result.done, cfg.alpha, cfg.gamma)
            total += result.reward
            state, o = result.next_state, next_o
            if result.done:
                outcome = classify(True, result.reward, cfg.success_threshold)
                break

        metrics.record(float(total), outcome, steps)

    logger.info(
        "Training finished",
        program=program.name,
        observations=obs.size,
        episodes=cfg.episodes,
        succ=round(metrics.succ, 2),
        fail=round(metrics.fail, 2),
        t_out=round(metrics.t_out, 2),
    )
    return q, metrics


def rollout(
    program: Program,
    obs: Observation,
    q: QTable,
    start: Sequence,
    max_steps: int,
    rng: np.random.Generator,
    interpreter: Optional[Interpreter] = None,
) -> Tuple[float, bool, Fraction, int]:
    """One greedy episode; returns accumulated reward, done flag, last reward and steps."""
    interpreter = interpreter or Interpreter(program)
    state = tuple(Fraction(v) for v in start)
    total = Fraction(0)
    last = Fraction(0)
    for steps in range(1, max_steps + 1):
        result = interpreter.step(state, q.greedy(obs.locate(state)), rng)
        total += result.reward
        last = result.reward
        state = result.next_state
        if result.done:
            return float(total), True, last, steps
    return float(total), False, last, max_steps


def evaluate_policy(
    program: Program,
    obs: Observation,
    q: QTable,
    starts: Sequence[Sequence],
    episodes_per_start: int = 1,
    max_steps: int = 200,
    seed: int = 0,
) -> List[float]:
    """Mean accumulated reward of greedy rollouts from each start state."""
    interpreter = Interpreter(program)
    means = []
    for i, start in enumerate(starts):
        rng = np.random.default_rng([seed, i])
        totals = [rollout(program, obs, q, start, max_steps, rng, interpreter)[0] for _ in range(episodes_per_start)]
        means.append(float(np.mean(totals)))
    return means
