import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fjcert.expr import (Add, Call, Const, DomainError, ExprSyntaxError, Mul,
                         Neg, Pow, UndeclaredVariableError, Var,
                         directional_derivative, evaluate, fd_directional,
                         frechet_probe, gradient, parse_expression, to_string)

from generators import VARS, expression_corpus, random_expr, random_point


class TestParse:
    def test_sum_of_power(self):
        assert parse_expression("x^2 + y", ["x", "y"]) == Add(Pow(Var("x"), 2), Var("y"))

    def test_unary_minus_binds_looser_than_power(self):
        assert parse_expression("-x^2", ["x"]) == Neg(Pow(Var("x"), 2))

    def test_incomplete_input_reports_offset(self):
        with pytest.raises(ExprSyntaxError) as info:
            parse_expression("x + ", ["x"])
        assert info.value.offset == 4

    def test_undeclared_variable(self):
        with pytest.raises(UndeclaredVariableError) as info:
            parse_expression("x + z", ["x", "y"])
        assert info.value.name == "z"

    @pytest.mark.parametrize("text, expected", [
        ("2*x*y", Mul(Mul(Const(2.0), Var("x")), Var("y"))),
        ("x^-2", Pow(Var("x"), -2)),
        ("x^(-1)", Pow(Var("x"), -1)),
        ("sin(x)*-y", Mul(Call("sin", Var("x")), Neg(Var("y")))),
        ("1.5e-3", Const(1.5e-3)),
    ])
    def test_grammar(self, text, expected):
        assert parse_expression(text, ["x", "y"]) == expected

    @pytest.mark.parametrize("text", ["x ^ y", "foo(x)", "(x", "x )", "x $ y", "x^1.5", ""])
    def test_syntax_errors(self, text):
        with pytest.raises(ExprSyntaxError):
            parse_expression(text, ["x", "y"])

    def test_round_trip_on_corpus(self):
        for e in expression_corpus(60):
            assert parse_expression(to_string(e), VARS) == e


class TestEvaluate:
    def test_arithmetic(self):
        assert evaluate(parse_expression("x^2+y", ["x", "y"]), {"x": 3, "y": 2}) == 11

    def test_log_domain(self):
        with pytest.raises(DomainError) as info:
            evaluate(parse_expression("1 + log(x)", ["x"]), {"x": -1.0})
        assert "log" in info.value.subtree

    def test_sin_zero(self):
        assert evaluate(parse_expression("sin(x)*y", ["x", "y"]), {"x": 0.0, "y": 5.0}) == 0.0

    @pytest.mark.parametrize("text, point", [
        ("1/x", {"x": 0.0}),
        ("sqrt(x)", {"x": -1e-3}),
        ("x^-1", {"x": 0.0}),
        ("exp(x)", {"x": 1e4}),
    ])
    def test_other_domain_errors(self, text, point):
        with pytest.raises(DomainError):
            evaluate(parse_expression(text, ["x"]), point)


class TestDerivatives:
    def test_directional(self):
        e = parse_expression("x^2+y", ["x", "y"])
        assert directional_derivative(e, {"x": 3.0, "y": 2.0}, [1, 0]) == 6.0

    def test_zero_direction(self):
        e = parse_expression("x*y", ["x", "y"])
        assert directional_derivative(e, {"x": 1.7, "y": -0.3}, [0, 0]) == 0.0

    def test_gradients(self):
        assert gradient(parse_expression("x^2+y", ["x", "y"]), {"x": 3.0, "y": 2.0}) == (6.0, 1.0)
        assert gradient(parse_expression("sin(x)*y", ["x", "y"]), {"x": 0.0, "y": 5.0}) == (5.0, 0.0)

    def test_sqrt_not_differentiable_at_zero(self):
        with pytest.raises(DomainError):
            gradient(parse_expression("sqrt(x)", ["x"]), {"x": 0.0})

    def test_fd_quadratic(self):
        e = parse_expression("x^2", ["x"])
        assert fd_directional(e, {"x": 3.0}, [1.0], 1e-5) == pytest.approx(6.0, abs=1e-9)

    def test_fd_even_function(self):
        # |x| written within the grammar
        e = parse_expression("sqrt(x^2)", ["x"])
        assert fd_directional(e, {"x": 0.0}, [1.0], 1e-5) == 0.0

    def test_fd_exp(self):
        e = parse_expression("exp(x)", ["x"])
        assert fd_directional(e, {"x": 0.0}, [1.0], 1e-4) == pytest.approx(1.0, abs=1e-8)

    def test_ad_matches_fd_on_random_expressions(self):
        rng = random.Random(42)
        for e in expression_corpus(40, seed=3):
            p = random_point(rng)
            v = [rng.uniform(-1, 1) for _ in VARS]
            fd = fd_directional(e, p, v, 1e-5)
            assert abs(directional_derivative(e, p, v) - fd) <= 1e-6 * (1 + abs(fd))


@st.composite
def expr_point_dirs(draw):
    seed = draw(st.integers(0, 10**6))
    rng = random.Random(seed)
    e = random_expr(rng, 3)
    p = random_point(rng)
    u = [rng.uniform(-1, 1) for _ in VARS]
    v = [rng.uniform(-1, 1) for _ in VARS]
    return e, p, u, v


@settings(max_examples=150, deadline=None)
@given(expr_point_dirs(), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity_in_direction(data, alpha, beta):
    e, p, u, v = data
    w = [alpha * a + beta * b for a, b in zip(u, v)]
    lhs = directional_derivative(e, p, w)
    rhs = alpha * directional_derivative(e, p, u) + beta * directional_derivative(e, p, v)
    scale = abs(alpha) * abs(directional_derivative(e, p, u)) + \
        abs(beta) * abs(directional_derivative(e, p, v))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, scale)


@settings(max_examples=150, deadline=None)
@given(expr_point_dirs())
def test_gradient_dot_direction(data):
    e, p, u, _ = data
    g = gradient(e, p)
    dd = directional_derivative(e, p, u)
    dot = sum(a * b for a, b in zip(g, u))
    scale = sum(abs(a * b) for a, b in zip(g, u))
    assert abs(dot - dd) <= 1e-12 * max(1.0, scale)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_parse_print_round_trip(seed):
    e = random_expr(random.Random(seed), 4)
    once = parse_expression(to_string(e), VARS)
    assert parse_expression(to_string(once), VARS) == once == e


class TestFrechetProbe:
    def test_quadratic(self):
        e = parse_expression("x^2", ["x"])
        rep = frechet_probe(e, {"x": 0.0}, [0.0], [1e-2, 1e-3, 1e-4])
        assert rep.passed
        assert rep.ratios == pytest.approx([1e-2, 1e-3, 1e-4], rel=1e-9)

    def test_linear_exact(self):
        e = parse_expression("x", ["x"])
        rep = frechet_probe(e, {"x": 0.0}, [1.0], [1e-2, 1e-3, 1e-4])
        assert rep.passed and rep.ratios == (0.0, 0.0, 0.0)

    def test_wrong_gradient_fails(self):
        e = parse_expression("x", ["x"])
        rep = frechet_probe(e, {"x": 0.0}, [0.0], [1e-2, 1e-3, 1e-4])
        assert not rep.passed
        assert rep.ratios == pytest.approx([1.0, 1.0, 1.0])

    def test_leaving_domain(self):
        e = parse_expression("log(x)", ["x"])
        with pytest.raises(DomainError):
            frechet_probe(e, {"x": 1e-300}, [1e300], [1e-2])

    def test_deterministic(self):
        e = parse_expression("sin(x)*y + exp(y)", ["x", "y"])
        p = {"x": 0.3, "y": -0.2}
        g = gradient(e, p)
        assert frechet_probe(e, p, g, seed=5) == frechet_probe(e, p, g, seed=5)

    @pytest.mark.parametrize("radii", [[1e-3, 1e-2], [0.0], []])
    def test_bad_radii(self, radii):
        with pytest.raises(ValueError):
            frechet_probe(parse_expression("x", ["x"]), {"x": 0.0}, [1.0], radii)


def test_finite_results_only():
    e = parse_expression("exp(x)", ["x"])
    assert math.isfinite(evaluate(e, {"x": 700.0}))
