from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from src.benchmarks import list_benchmarks, load_benchmark
from src.dsl import Interpreter, parse
from src.formula import box_formula, conjoin, disjoin, eval_at, negate, parse_formula, variables
from src.solver import check_sat
from src.symexec import project_and_disjointify, sample_name, sym_execute

from .conftest import random_states

COIN = """
env coin
state x: real in [0, 10]
action flip
body
  c ~ bernoulli(0.25)
  if c == 1: x = 0 else: x = 10 end
end
"""


def holds(pcs, env):
    return [i for i, pc in enumerate(pcs) if eval_at(pc, env)]


def assert_exclusive(pcs, cfg):
    for a, b in combinations(pcs, 2):
        assert check_sat(conjoin([a, b]), cfg).is_unsat


def assert_cover(pcs, program, cfg):
    box = box_formula(program.state_vars)
    assert check_sat(conjoin([box, negate(disjoin(pcs))]), cfg).is_unsat


class TestPathConditions:
    def test_clamp_walk(self, clamp_walk, cfg):
        left = sym_execute(clamp_walk, 0, depth=8)
        assert left.complete
        expected = [
            parse_formula("x < 1"),
            parse_formula("x >= 1 and x > 11"),
            parse_formula("x >= 1 and x <= 11 and x >= 10"),
            parse_formula("x >= 1 and x <= 11 and x < 10"),
        ]
        assert list(left.pcs) == expected

    def test_folded_guards_do_not_branch(self):
        p = parse("env t\nparam K = 3\nstate x: real in [0, 1]\naction s\nbody\n  if K > 2: x = 0 else: x = 1 end\nend\n")
        result = sym_execute(p, 0, depth=1)
        assert result.complete and len(result) == 1

    def test_depth_truncates_with_prefix(self, clamp_walk):
        left = sym_execute(clamp_walk, 0, depth=1)
        assert not left.complete
        assert left.truncated == 1
        assert list(left.pcs) == [parse_formula("x < 1"), parse_formula("x >= 1")]

    def test_fuel_truncates_loops(self):
        p = parse("env t\nstate x: real in [0, 1]\naction s\nbody\n  while true: skip end\nend\n")
        result = sym_execute(p, 0, depth=4, fuel=50)
        assert not result.complete and len(result) == 1

    def test_symbolic_loop_consumes_depth(self):
        p = parse("env t\nstate x: real in [0, 10]\naction s\nbody\n  while x > 0: x = x - 4 end\nend\n")
        result = sym_execute(p, 0, depth=3)
        assert not result.complete
        # x <= 0, 0 < x <= 4, 4 < x <= 8, and the cut prefix x > 8.
        assert len(result) == 4

    def test_prune_drops_infeasible_prefixes(self, cfg):
        p = parse("env t\nstate x: real in [0, 10]\naction s\nbody\n  if x < 1: if x > 2: reward = 1 end end\nend\n")
        plain = sym_execute(p, 0, depth=8)
        pruned = sym_execute(p, 0, depth=8, prune=True, cfg=cfg)
        assert len(plain) == 3
        assert len(pruned) == 2
        assert all(check_sat(pc, cfg).is_sat for pc in pruned.pcs)

    def test_bad_depth(self, clamp_walk):
        with pytest.raises(ValueError):
            sym_execute(clamp_walk, 0, depth=0)


class TestSampling:
    def test_bernoulli_branches_on_the_sample(self):
        result = sym_execute(parse(COIN), 0, depth=4)
        assert result.sampling_vars == frozenset({sample_name(0)})
        assert len(result) == 2
        y = sample_name(0)
        assert eval_at(result.pcs[0], {"x": Fraction(5), y: Fraction(1, 10)})
        assert eval_at(result.pcs[1], {"x": Fraction(5), y: Fraction(1, 2)})

    def test_projection_removes_sampling_variables(self, cfg):
        walk, _ = load_benchmark("random_walk")
        for action in range(walk.n_actions):
            raw = sym_execute(walk, action, depth=8)
            projected = project_and_disjointify(raw, cfg, walk.state_vars)
            assert projected.sampling_vars == frozenset()
            for pc in projected.pcs:
                assert all(not v.startswith("_") for v in variables(pc))
            assert_exclusive(projected.pcs, cfg)
            assert_cover(projected.pcs, walk, cfg)

    def test_coin_projects_to_one_condition(self, cfg):
        coin = parse(COIN)
        projected = project_and_disjointify(sym_execute(coin, 0, depth=4), cfg, coin.state_vars)
        assert len(projected) == 1
        assert check_sat(negate(projected.pcs[0]), cfg).is_unsat


class TestConcreteAgreement:
    @pytest.mark.parametrize(
        "name", ["navigation", "simple_maze", "wumpus", "braking_car", "mountain_car", "random_walk", "synthetic_chain"]
    )
    def test_each_trace_satisfies_exactly_one_path_condition(self, name):
        program, entry = load_benchmark(name)
        sets = [sym_execute(program, a, depth=16) for a in range(program.n_actions)]
        assert all(s.complete for s in sets)
        interpreter = Interpreter(program)
        rng = np.random.default_rng(11)
        for i, state in enumerate(random_states(program, 1000, seed=5)):
            action = i % program.n_actions
            result = interpreter.step(state, action, rng)
            env = program.state_env(state)
            env.update({sample_name(k): v for k, v in enumerate(result.samples)})
            assert len(holds(sets[action].pcs, env)) == 1

    def test_sets_are_mutually_exclusive(self, navigation, cfg):
        for action in range(navigation.n_actions):
            pcs = project_and_disjointify(sym_execute(navigation, action, depth=8), cfg, navigation.state_vars)
            assert_exclusive(pcs.pcs, cfg)
            assert_cover(pcs.pcs, navigation, cfg)

    @pytest.mark.slow
    @pytest.mark.parametrize("name", list_benchmarks())
    def test_every_benchmark_is_mutually_exclusive(self, name, cfg):
        program, entry = load_benchmark(name)
        rng = np.random.default_rng(0)
        for action in range(program.n_actions):
            pcs = project_and_disjointify(sym_execute(program, action, entry.depth), cfg, program.state_vars).pcs
            pairs = list(combinations(range(len(pcs)), 2))
            if len(pairs) > 100:
                pairs = [pairs[i] for i in rng.choice(len(pairs), size=100, replace=False)]
            for i, j in pairs:
                assert not check_sat(conjoin([pcs[i], pcs[j]]), cfg).is_sat, (name, action, i, j)


@pytest.mark.parametrize("name", ["braking_car", "clamp_walk"])
def test_more_depth_never_means_fewer_conditions(name, clamp_walk):
    program = clamp_walk if name == "clamp_walk" else load_benchmark(name)[0]
    for action in range(program.n_actions):
        counts = [len(sym_execute(program, action, depth=k)) for k in (1, 2, 3, 4)]
        assert counts == sorted(counts)
