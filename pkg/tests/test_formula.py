from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.errors import FormulaError
from src.expr import LinearTerm
from src.formula import (
    FALSE,
    TRUE,
    Atom,
    Negation,
    compare,
    conjoin,
    disjoin,
    eval_at,
    format_formula,
    is_linear,
    make_atom,
    negate,
    normalize,
    parse_formula,
    variables,
)

VARS = ("x", "y", "z")


def term(coeffs, const=0):
    return LinearTerm.build({k: Fraction(v) for k, v in coeffs.items()}, Fraction(const))


x = LinearTerm.variable("x")
y = LinearTerm.variable("y")


def const(v):
    return LinearTerm.constant(Fraction(v))


coefficients = st.integers(min_value=-4, max_value=4)
atoms_ = st.builds(
    lambda cs, c, rel: make_atom(term(dict(zip(VARS, cs)), c), rel),
    st.tuples(coefficients, coefficients, coefficients),
    st.integers(min_value=-6, max_value=6),
    st.sampled_from(["<", "<=", "=="]),
)
formulas = st.recursive(
    atoms_,
    lambda children: st.one_of(
        st.lists(children, min_size=1, max_size=3).map(conjoin),
        st.lists(children, min_size=1, max_size=3).map(disjoin),
        children.map(negate),
    ),
    max_leaves=6,
)
points = st.fixed_dictionaries({v: st.fractions(min_value=-5, max_value=5, max_denominator=4) for v in VARS})


class TestAtoms:
    def test_constant_atoms_fold(self):
        assert make_atom(const(-1), "<") == TRUE
        assert make_atom(const(0), "<") == FALSE
        assert make_atom(const(0), "==") == TRUE

    def test_leading_coefficient_is_scaled(self):
        atom = make_atom(term({"x": 2, "y": 4}, 6), "<=")
        assert atom == Atom(term({"x": 1, "y": 2}, 3), "<=")

    def test_inequality_keeps_direction(self):
        atom = make_atom(term({"x": -2}, 4), "<")
        assert atom == Atom(term({"x": -1}, 2), "<")

    def test_equality_is_monic(self):
        assert make_atom(term({"x": -3}, 6), "==") == Atom(term({"x": 1}, -2), "==")

    @pytest.mark.parametrize(
        "op, value, expected",
        [("<", 4, True), ("<=", 5, True), (">", 5, False), (">=", 5, True), ("==", 5, True), ("!=", 5, False)],
    )
    def test_compare(self, op, value, expected):
        assert eval_at(compare(x, op, const(5)), {"x": Fraction(value)}) is expected

    def test_disequality_is_negated_equality(self):
        f = compare(x, "!=", const(5))
        assert isinstance(f, Negation)
        assert negate(f) == compare(x, "==", const(5))


class TestNegation:
    def test_strict_and_weak_swap(self):
        assert negate(compare(x, "<", const(5))) == compare(x, ">=", const(5))
        assert negate(compare(x, "<=", const(5))) == compare(x, ">", const(5))

    def test_de_morgan(self):
        a, b = compare(x, "<", const(1)), compare(y, "<", const(2))
        assert negate(conjoin([a, b])) == disjoin([negate(a), negate(b)])

    def test_double_negation(self):
        eq = compare(x, "==", y)
        assert normalize(Negation(Negation(eq))) == eq

    @given(formulas, points)
    def test_negation_flips_truth(self, f, point):
        assert eval_at(negate(f), point) is not eval_at(f, point)

    @given(formulas, points)
    def test_normalize_preserves_truth(self, f, point):
        assert eval_at(normalize(f), point) is eval_at(f, point)


class TestConnectives:
    def test_units_and_zeros(self):
        a = compare(x, "<", const(1))
        assert conjoin([]) == TRUE
        assert disjoin([]) == FALSE
        assert conjoin([a, TRUE]) == a
        assert conjoin([a, FALSE]) == FALSE
        assert disjoin([a, TRUE]) == TRUE

    def test_flatten_and_dedup(self):
        a, b = compare(x, "<", const(1)), compare(y, "<", const(2))
        assert conjoin([a, conjoin([b, a])]) == conjoin([a, b])


class TestEvaluation:
    def test_free_variable(self):
        with pytest.raises(FormulaError):
            eval_at(compare(x, "<", y), {"x": Fraction(1)})

    def test_nonlinear(self):
        f = parse_formula("x * x < 2")
        assert not is_linear(f)
        assert variables(f) == frozenset({"x"})
        assert eval_at(f, {"x": Fraction(1)})
        assert not eval_at(f, {"x": Fraction(2)})


class TestText:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("x >= 5", "x >= 5"),
            ("not (x < 5)", "x >= 5"),
            ("x != 3", "x != 3"),
            ("2 * x + 4 <= 0", "x <= -2"),
            ("x < 1 and (y > 2 or y < -1)", "x < 1 and (y > 2 or y < -1)"),
            ("x + y / 3 < 1/2", "x + (1/3) * y < 0.5"),
        ],
    )
    def test_format(self, text, expected):
        assert format_formula(parse_formula(text)) == expected

    @given(formulas)
    def test_printed_formula_parses_back(self, f):
        assert parse_formula(format_formula(f)) == normalize(f)
