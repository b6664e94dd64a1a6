from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from src.errors import ExperimentConfigError
from src.experiments import (
    compare,
    depth_sweep,
    less_likely_starts,
    load_spec,
    parse_overrides,
    sample_in_part,
    scale_consistent,
    similarity,
    write_frame,
)
from src.formula import eval_at
from src.partition import sympar


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("BENCHMARK=braking_car\nDEPTHS=1,2\nSEEDS=3,4\nEPISODES=10\n", encoding="utf-8")
    return path


class TestSpec:
    def test_defaults(self):
        spec = load_spec()
        assert spec.benchmark == "navigation"
        assert spec.seeds == [0]

    def test_file(self, spec_file):
        spec = load_spec(spec_file)
        assert spec.benchmark == "braking_car"
        assert spec.depths == [1, 2]
        assert spec.seeds == [3, 4]
        assert spec.episodes == 10

    def test_flags_win(self, spec_file):
        spec = load_spec(spec_file, depths="5", episodes=None)
        assert spec.depths == [5]
        assert spec.episodes == 10

    def test_duplicate_seeds(self):
        with pytest.raises(ExperimentConfigError, match="distinct"):
            load_spec(seeds="1,1")

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.env"
        path.write_text("DEPTH=3\n", encoding="utf-8")
        with pytest.raises(ExperimentConfigError, match="unknown spec keys: depth"):
            load_spec(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ExperimentConfigError, match="not found"):
            load_spec(tmp_path / "nope.env")

    def test_train_config_uses_the_entry(self):
        from src.benchmarks import get_entry

        cfg = load_spec(episodes="7").train_config(get_entry("wumpus"), seed=2)
        assert cfg.episodes == 7
        assert cfg.max_steps == 400
        assert cfg.success_threshold == 1000
        assert cfg.start == [0, 0]
        assert cfg.seed == 2


class TestOverrides:
    def test_parse(self):
        assert parse_overrides(["W=20", "V = 1/2"]) == {"W": Fraction(20), "V": Fraction(1, 2)}

    @pytest.mark.parametrize("item", ["W", "=3", "W=abc"])
    def test_bad(self, item):
        with pytest.raises(ExperimentConfigError):
            parse_overrides([item])


class TestDrivers:
    def test_depth_sweep(self):
        spec = load_spec(benchmark="braking_car", depths="1,2", episodes="5", eval_starts="3")
        frame = depth_sweep(spec)
        assert list(frame["k"]) == [1, 2]
        assert frame["parts"].iloc[0] == 5
        assert frame["bounds_hold"].all()
        assert list(frame.columns) == ["k", "parts", "complete", "bounds_hold", "best_reward", "eval_reward", "elapsed_s"]

    def test_sample_in_part(self, clamp_walk, cfg):
        partition = sympar(clamp_walk, 8, cfg)
        rng = np.random.default_rng(0)
        part = partition.locate((Fraction(4),))
        states = sample_in_part(partition, part, 10, rng)
        assert len(states) == 10
        assert all(eval_at(partition.parts[part].formula, partition.program.state_env(s)) for s in states)

    def test_less_likely_starts_prefer_small_parts(self, clamp_walk, cfg):
        partition = sympar(clamp_walk, 8, cfg)
        starts = less_likely_starts(partition, 1, 500, seed=0)
        # x == 10 has zero volume, so its witness comes first.
        assert starts == [(Fraction(10),)]

    def test_similarity(self):
        spec = load_spec(benchmark="braking_car", depths="2", episodes="20", parts="3", states_per_part="2")
        frame = similarity(spec)
        assert 1 <= len(frame) <= 3
        assert (frame["n"] == 2).all()

    def test_similarity_with_unreachable_sample_size(self):
        spec = load_spec(benchmark="synthetic_unbranched", depths="1", episodes="2", states_per_part="30000")
        with pytest.raises(ExperimentConfigError, match="no part could be sampled"):
            similarity(spec)

    def test_compare(self):
        spec = load_spec(benchmark="synthetic_chain", depths="2", seeds="0,1", episodes="50", eval_starts="2")
        frame = compare(spec)
        assert len(frame) == 2 * 2 * 2
        assert set(frame["observation"]) == {"sympar", "tiling"}
        assert frame["normalized_reward"].between(0, 1).all()
        assert set(frame.loc[frame["observation"] == "tiling", "parts"]) == {3}

    def test_scale_consistent(self):
        good = pd.DataFrame({"benchmark": ["a", "a", "b"], "parts": [3, 3, 7]})
        bad = pd.DataFrame({"benchmark": ["a", "a"], "parts": [3, 4]})
        assert scale_consistent(good)
        assert not scale_consistent(bad)

    def test_write_frame(self, tmp_path):
        path = write_frame(pd.DataFrame({"a": [1]}), tmp_path / "nested" / "out.csv")
        assert path.read_text().startswith("a\n1")


@pytest.mark.slow
class TestTrends:
    def test_sympar_succeeds_at_least_as_often_as_tiling(self):
        spec = load_spec(benchmark="navigation", depths="8", seeds="0,1,2,3,4")
        succ = compare(spec).groupby("observation")["succ"].mean()
        assert succ["sympar"] >= succ["tiling"]

    def test_braking_car_improves_with_depth(self):
        frame = depth_sweep(load_spec(benchmark="braking_car", depths="1,2,3,4"))
        assert list(frame["parts"]) == sorted(frame["parts"])
        assert frame["best_reward"].iloc[-1] >= frame["best_reward"].iloc[0]

    def test_states_of_one_part_earn_similar_rewards(self):
        frame = similarity(load_spec(benchmark="braking_car", depths="3", parts="5", states_per_part="5"))
        assert (frame["normalized_std"] <= 0.05).all()
