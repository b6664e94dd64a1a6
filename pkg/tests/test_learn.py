from fractions import Fraction

import numpy as np
import pytest

from src.benchmarks import load_benchmark
from src.dsl.ast import StateVar
from src.errors import ExperimentConfigError, PartitionInvariantError
from src.learn import (
    QTable,
    RunMetrics,
    TrainConfig,
    evaluate_policy,
    group_statistics,
    make_tiling,
    tiles_per_dimension,
    train,
)
from src.partition import sympar

GAMMA = 0.99


@pytest.fixture(scope="module")
def chain(cfg):
    program, entry = load_benchmark("synthetic_chain")
    return program, entry, sympar(program, entry.depth, cfg)


def chain_q_star(gamma: float) -> np.ndarray:
    """Value iteration on the two-state chain, written out by hand."""
    # (state, action) -> (next state, reward, done)
    model = {
        (0, 0): (0, -1.0, False),
        (0, 1): (1, 0.0, False),
        (1, 0): (0, 0.0, False),
        (1, 1): (1, 10.0, True),
    }
    q = np.zeros((2, 2))
    for _ in range(5000):
        new = np.zeros_like(q)
        for (s, a), (nxt, r, done) in model.items():
            new[s, a] = r + (0.0 if done else gamma * q[nxt].max())
        q = new
    return q


class TestQTable:
    def test_single_update(self):
        q = QTable.zeros(2, 2)
        q.update(0, 0, reward=1.0, next_obs=1, done=True, alpha=0.5, gamma=GAMMA)
        assert q.values[0, 0] == 0.5
        assert q.visits[0, 0] == 1

    def test_bootstraps_when_not_done(self):
        q = QTable.zeros(2, 2)
        q.values[1] = [2.0, 4.0]
        q.update(0, 1, reward=0.0, next_obs=1, done=False, alpha=1.0, gamma=0.5)
        assert q.values[0, 1] == 2.0

    def test_ties_go_to_the_first_action(self):
        assert QTable.zeros(1, 3).greedy(0) == 0


class TestTiling:
    @pytest.mark.parametrize("budget, dimension, expected", [(51, 2, 8), (33, 2, 6), (36, 2, 7), (5, 1, 6), (73, 2, 9)])
    def test_tiles_exceed_budget(self, budget, dimension, expected):
        assert tiles_per_dimension(budget, dimension) == expected

    def test_bad_budget(self):
        with pytest.raises(ExperimentConfigError):
            tiles_per_dimension(0, 2)

    def test_edges(self):
        tiles = make_tiling([StateVar("x", Fraction(0), Fraction(10))], 3)
        assert tiles.size == 4
        assert tiles.locate((Fraction(0),)) == 0
        assert tiles.locate((Fraction(5, 2),)) == 1
        assert tiles.locate((Fraction(10),)) == 3
        assert tiles.witnesses() == []

    def test_flat_index(self):
        box = [StateVar("x", Fraction(0), Fraction(10)), StateVar("y", Fraction(0), Fraction(10))]
        tiles = make_tiling(box, 51)
        assert tiles.size == 64
        assert tiles.locate((0, 0)) == 0
        assert tiles.locate((10, 10)) == 63
        assert tiles.locate((0, 10)) == 7

    def test_outside(self):
        tiles = make_tiling([StateVar("x", Fraction(0), Fraction(10))], 3)
        with pytest.raises(PartitionInvariantError):
            tiles.locate((11,))


class TestTraining:
    def test_chain_policy_is_optimal(self, chain):
        program, entry, partition = chain
        cfg = TrainConfig(episodes=500, max_steps=entry.max_steps, gamma=GAMMA, seed=0, success_threshold=10)
        q, metrics = train(program, partition, cfg)
        q_star = chain_q_star(GAMMA)
        optimal = [int(np.argmax(q_star[s])) for s in (0, 1)]
        learned = [q.policy()[partition.locate((s,))] for s in (0, 1)]
        assert learned == optimal == [1, 1]
        # Starting from zero, Q-learning on a deterministic chain never overshoots Q*.
        for s in (0, 1):
            assert np.all(q.values[partition.locate((s,))] <= q_star[s] + 1e-9)

    def test_witness_seeding_visits_every_part(self, navigation, navigation_partition):
        witnesses = navigation_partition.witnesses()
        cfg = TrainConfig(episodes=len(witnesses), max_steps=1, seed=0)
        q, _ = train(navigation, navigation_partition, cfg)
        for pid, _ in witnesses:
            assert q.part_visits[pid] > 0

    def test_same_seed_same_run(self, chain):
        program, entry, partition = chain
        cfg = TrainConfig(episodes=50, max_steps=entry.max_steps, seed=7)
        q1, m1 = train(program, partition, cfg)
        q2, m2 = train(program, partition, cfg)
        assert m1.rewards == m2.rewards
        assert np.array_equal(q1.values, q2.values)

    def test_outcomes_add_up(self, chain):
        program, entry, partition = chain
        _, metrics = train(program, partition, TrainConfig(episodes=40, max_steps=3, seed=1, success_threshold=10))
        assert metrics.episodes == 40
        assert metrics.succ + metrics.fail + metrics.t_out == pytest.approx(100.0)

    def test_tiling_baseline_trains(self, navigation):
        tiles = make_tiling(navigation.state_vars, 51)
        q, metrics = train(navigation, tiles, TrainConfig(episodes=20, max_steps=50, seed=0, start=[1, 1]))
        assert q.values.shape == (64, 4)
        assert metrics.episodes == 20

    def test_epsilon_schedule(self):
        cfg = TrainConfig(episodes=100, epsilon_start=1.0, epsilon_end=0.0, epsilon_decay=0.5)
        assert cfg.epsilon(0) == 1.0
        assert cfg.epsilon(25) == pytest.approx(0.5)
        assert cfg.epsilon(80) == 0.0

    def test_epsilon_order(self):
        with pytest.raises(ValueError):
            TrainConfig(epsilon_start=0.1, epsilon_end=0.5)


class TestEvaluation:
    def test_identical_starts_give_identical_rewards(self, chain):
        program, entry, partition = chain
        q, _ = train(program, partition, TrainConfig(episodes=300, max_steps=entry.max_steps, seed=0))
        rewards = evaluate_policy(program, partition, q, [(0,), (0,)], max_steps=entry.max_steps)
        assert rewards[0] == rewards[1] == 10.0

    def test_group_statistics(self):
        frame = group_statistics({0: [5.0, 5.0, 5.0], 1: [1.0, 3.0]})
        row = frame.set_index("part").loc[0]
        assert row["std"] == 0.0 and row["normalized_std"] == 0.0
        assert frame.set_index("part").loc[1, "mean"] == 2.0


class TestMetrics:
    def test_percentages(self):
        m = RunMetrics()
        for reward, outcome in [(10, "success"), (10, "success"), (-1, "failure"), (0, "timeout")]:
            m.record(reward, outcome, 3)
        assert m.succ == 50.0 and m.fail == 25.0 and m.t_out == 25.0
        assert m.opt == 50.0
        assert m.summary(4)["|S|"] == 4

    def test_csv(self, tmp_path):
        m = RunMetrics()
        m.record(1.0, "success", 2)
        m.write_csv(tmp_path / "run.csv", n_parts=3)
        assert (tmp_path / "run.csv").read_text().splitlines()[0] == "episode,accumulated_reward,outcome,steps"
        assert (tmp_path / "run_summary.csv").exists()


def test_q_sweeps_contract_on_the_chain():
    model = {(0, 0): (0, -1.0, False), (0, 1): (1, 0.0, False), (1, 0): (0, 0.0, False), (1, 1): (1, 10.0, True)}
    q = QTable.zeros(2, 2)
    changes = []
    for _ in range(2000):
        before = q.values.copy()
        for (s, a), (nxt, r, done) in model.items():
            q.update(s, a, r, nxt, done, alpha=1.0, gamma=GAMMA)
        changes.append(float(np.abs(q.values - before).max()))
    assert changes[-1] < changes[0]
    assert changes[-1] < 1e-6
    assert np.allclose(q.values, chain_q_star(GAMMA), atol=1e-4)


def test_tiling_is_total_and_disjoint(navigation):
    tiles = make_tiling(navigation.state_vars, 51)
    rng = np.random.default_rng(0)
    seen = set()
    for _ in range(10_000):
        state = tuple(Fraction(float(v)) for v in rng.uniform(0, 10, size=2))
        seen.add(tiles.locate(state))
    assert seen <= set(range(tiles.size))
    assert len(seen) == tiles.size
