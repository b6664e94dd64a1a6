from fractions import Fraction

import numpy as np
import pytest

from src.benchmarks import list_benchmarks, load_benchmark
from src.dsl import concrete_step, parse, print_program
from src.dsl.ast import Assign, If
from src.errors import EvaluationError, FuelExhaustedError, InterpreterError, ParseError, ProgramValidationError

HEADER = """
env t
state x: real in [0, 10]
actions d
action left = -1
action right = 1
"""


def program(body: str, header: str = HEADER):
    return parse(header + "body\n" + body + "\nend\n")


class TestParser:
    def test_header(self, clamp_walk):
        assert clamp_walk.name == "clamp_walk"
        assert clamp_walk.state_names == ("x",)
        assert clamp_walk.dimension == 1
        assert [a.name for a in clamp_walk.actions] == ["left", "right"]
        assert clamp_walk.action_env(0) == {"d": Fraction(-1)}

    def test_params_and_overrides(self):
        source = "env p\nparam W = 10\nparam H = W / 2\nstate x: real in [0, H]\naction stay\nbody\n  skip\nend\n"
        assert parse(source).state_vars[0].upper == 5
        assert parse(source, {"W": 40}).state_vars[0].upper == 20
        with pytest.raises(ProgramValidationError, match="undeclared param"):
            parse(source, {"Z": 1})

    def test_elif_chain_nests_in_else(self):
        p = program("if x < 1: reward = 1\nelif x < 2: reward = 2\nelse: reward = 3\nend")
        outer = p.body.stmts[0]
        assert isinstance(outer, If)
        inner = outer.orelse.stmts[0]
        assert isinstance(inner, If)
        assert isinstance(inner.orelse.stmts[0], Assign)

    def test_semicolons_and_comments(self):
        p = program("x = x + d; reward = -1  # step cost")
        assert len(p.body.stmts) == 2

    def test_parenthesized_condition(self):
        p = program("if (x < 1 or x > 9) and not (x == 5): reward = 1 end")
        assert isinstance(p.body.stmts[0], If)

    def test_syntax_error_has_position(self):
        with pytest.raises(ParseError) as info:
            program("if x < 1 x = 2 end")
        assert info.value.line is not None
        assert "expected ':'" in str(info.value)

    def test_unexpected_character(self):
        with pytest.raises(ParseError, match="unexpected character"):
            program("x = x $ 1")


class TestValidator:
    @pytest.mark.parametrize(
        "body, message",
        [
            ("reward = t", "unbound variable t"),
            ("_x = 1", "reserved"),
            ("d = 2", "cannot assign to constant d"),
            ("y ~ uniform(2, 1)", "alpha < beta"),
            ("y ~ bernoulli(2)", "0 <= p <= 1"),
            ("y ~ uniform(0, x)", "non-constant x"),
            ("reward = tan(x)", "unknown function tan"),
            ("if x < 1: t = 1 end\nreward = t", "unbound variable t"),
        ],
    )
    def test_rejects(self, body, message):
        with pytest.raises(ProgramValidationError, match=message):
            program(body)

    def test_assigned_on_both_branches_is_defined(self):
        program("if x < 1: t = 1 else: t = 2 end\nreward = t")

    def test_arity_mismatch(self):
        header = "env t\nstate x: real in [0, 1]\nactions a, b\naction go = 1\n"
        with pytest.raises(ProgramValidationError, match="arity mismatch"):
            program("skip", header)

    def test_degenerate_bounds(self):
        with pytest.raises(ProgramValidationError, match="degenerate bounds"):
            parse("env t\nstate x: real in [3, 3]\naction s\nbody\n  skip\nend\n")

    def test_no_actions(self):
        with pytest.raises(ProgramValidationError, match="no actions"):
            parse("env t\nstate x: real in [0, 1]\nbody\n  skip\nend\n")

    def test_error_carries_line(self):
        with pytest.raises(ProgramValidationError) as info:
            program("x = 1\nreward = nope")
        assert info.value.line is not None


class TestPrinter:
    @pytest.mark.parametrize("name", list_benchmarks())
    def test_benchmarks_print_back_to_the_same_program(self, name):
        p, _ = load_benchmark(name)
        assert parse(print_program(p)) == p

    def test_elif_is_printed(self):
        p = program("if x < 1: reward = 1\nelif x < 2: reward = 2\nend")
        assert "elif x < 2:" in print_program(p)


class TestInterpreter:
    def test_clamp(self, clamp_walk):
        rng = np.random.default_rng(0)
        result = concrete_step(clamp_walk, (Fraction(0),), 0, rng)
        assert result.next_state == (Fraction(0),)
        assert result.reward == 0 and not result.done

    def test_reward_and_done(self, clamp_walk):
        result = concrete_step(clamp_walk, (Fraction(9),), 1, np.random.default_rng(0))
        assert result.next_state == (Fraction(10),)
        assert result.reward == 1 and result.done

    def test_braking_car_stop_and_crash(self):
        car, _ = load_benchmark("braking_car")
        rng = np.random.default_rng(0)
        stop = concrete_step(car, (Fraction(20), Fraction(5)), 3, rng)  # P5
        assert stop.next_state == (Fraction(20), Fraction(0))
        assert stop.reward == 975 and stop.done
        crash = concrete_step(car, (Fraction(3), Fraction(5)), 0, rng)  # P0
        assert crash.next_state == (Fraction(0), Fraction(5))
        assert crash.reward == -1000 and crash.done

    def test_samples_are_recorded(self):
        walk, _ = load_benchmark("random_walk")
        result = concrete_step(walk, (Fraction(10),), 1, np.random.default_rng(3))
        assert len(result.samples) == 1
        assert Fraction(-1, 2) <= result.samples[0] <= Fraction(1, 2)
        assert result.next_state == (10 + 1 + result.samples[0],)

    def test_fuel(self):
        p = program("while true: skip end")
        with pytest.raises(FuelExhaustedError):
            concrete_step(p, (Fraction(1),), 0, np.random.default_rng(0), fuel=10)

    def test_division_by_zero(self):
        p = program("reward = 1 / (x - x)")
        with pytest.raises(EvaluationError, match="division by zero"):
            concrete_step(p, (Fraction(1),), 0, np.random.default_rng(0))

    def test_bad_action(self, clamp_walk):
        with pytest.raises(InterpreterError):
            concrete_step(clamp_walk, (Fraction(1),), 5, np.random.default_rng(0))
