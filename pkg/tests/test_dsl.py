"""Parser, printer, and derivative checks for the warp-function language."""

import math

import numpy as np
import pytest

from warpgeo import warpfn
from warpgeo.errors import DslEvaluationError, DslNameError, DslSyntaxError

FD_STEP = 1e-5


def _fd_gradient(expr, point, h=FD_STEP):
    grad = np.empty(point.size)
    for axis in range(point.size):
        hi = point.copy()
        lo = point.copy()
        hi[axis] += h
        lo[axis] -= h
        grad[axis] = (warpfn.evaluate(expr, hi) - warpfn.evaluate(expr, lo)) / (2 * h)
    return grad


def _fd_hessian(expr, point, h=FD_STEP):
    n = point.size
    hess = np.empty((n, n))
    for axis in range(n):
        hi = point.copy()
        lo = point.copy()
        hi[axis] += h
        lo[axis] -= h
        _, ghi = warpfn.value_and_gradient(expr, hi)
        _, glo = warpfn.value_and_gradient(expr, lo)
        hess[:, axis] = (ghi - glo) / (2 * h)
    return hess


def _rel(got, want):
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    return np.max(np.abs(got - want) / np.maximum(1.0, np.abs(want)))


# ---------------------------------------------------------------------------
# frozen evaluations


def test_shifted_sine_at_zero():
    expr = warpfn.parse("2 + sin(t)", 1)
    value, grad, hess = warpfn.eval2(expr, np.array([0.0]))
    assert value == 2.0
    np.testing.assert_allclose(grad, [1.0], atol=1e-15)
    np.testing.assert_allclose(hess, [[0.0]], atol=1e-15)


def test_shifted_sine_at_quarter_turn():
    expr = warpfn.parse("2 + sin(t)", 1)
    value, grad, hess = warpfn.eval2(expr, np.array([math.pi / 2]))
    assert value == pytest.approx(3.0, abs=1e-15)
    np.testing.assert_allclose(grad, [0.0], atol=1e-15)
    np.testing.assert_allclose(hess, [[-1.0]], atol=1e-15)


def test_bilinear_product():
    expr = warpfn.parse("x1*x2", 2)
    value, grad, hess = warpfn.eval2(expr, np.array([3.0, 5.0]))
    assert value == 15.0
    assert np.array_equal(grad, [5.0, 3.0])
    assert np.array_equal(hess, [[0.0, 1.0], [1.0, 0.0]])


def test_negative_integer_exponent():
    expr = warpfn.parse("x1^-2", 1)
    value, grad, hess = warpfn.eval2(expr, np.array([2.0]))
    assert value == 0.25
    np.testing.assert_allclose(grad, [-0.25], rtol=1e-15)
    np.testing.assert_allclose(hess, [[0.375]], rtol=1e-15)


def test_time_alias_matches_first_coordinate():
    by_alias = warpfn.parse("1 + t^2", 1)
    by_name = warpfn.parse("1 + x1^2", 1)
    for x in (-1.5, 0.0, 0.25, 3.0):
        p = np.array([x])
        assert warpfn.evaluate(by_alias, p) == warpfn.evaluate(by_name, p)


def test_precedence():
    # Unary minus binds looser than the power; products pick up a signed factor.
    assert warpfn.evaluate(warpfn.parse("-x1^2", 1), np.array([3.0])) == -9.0
    assert warpfn.evaluate(warpfn.parse("2 - -3", 1), np.array([0.0])) == 5.0
    assert warpfn.evaluate(warpfn.parse("2*-3", 1), np.array([0.0])) == -6.0
    assert warpfn.evaluate(warpfn.parse("2 + 3*4", 1), np.array([0.0])) == 14.0
    assert warpfn.evaluate(warpfn.parse("8/4/2", 1), np.array([0.0])) == 1.0


# ---------------------------------------------------------------------------
# printing


def test_print_parse_is_a_fixed_point_on_hand_cases():
    texts = [
        "2 + sin(x1)",
        "x1*x2",
        "1 - (x1 - 2)",
        "(x1 + x2)^3",
        "sqrt(0.5 + x1^2)/cos(x2)",
        "-(x1/x2)",
        "exp(-(x1)) + log(1.5 + x2^2)",
        "2^-3 * x1",
    ]
    for text in texts:
        expr = warpfn.parse(text, 2)
        printed = warpfn.format_expression(expr)
        again = warpfn.format_expression(warpfn.parse(printed, 2))
        assert printed == again
        # The printed form must mean the same thing as the original.
        p = np.array([0.7, -1.3])
        assert warpfn.evaluate(warpfn.parse(printed, 2), p) == pytest.approx(
            warpfn.evaluate(expr, p), rel=1e-15, abs=1e-15
        )


def test_print_parse_is_a_fixed_point_on_random_corpus(dsl_cases):
    for expr, _ in dsl_cases[:200]:
        printed = warpfn.format_expression(expr)
        assert warpfn.format_expression(warpfn.parse(printed, 3)) == printed


def test_str_delegates_to_formatter():
    expr = warpfn.parse("1 + x1 * x2", 2)
    assert str(expr) == warpfn.format_expression(expr)


# ---------------------------------------------------------------------------
# derivatives against finite differences


def test_gradients_match_finite_differences(dsl_cases):
    worst = 0.0
    for expr, point in dsl_cases:
        _, grad = warpfn.value_and_gradient(expr, point)
        worst = max(worst, _rel(grad, _fd_gradient(expr, point)))
    assert worst <= 1e-6


def test_hessians_match_differenced_gradients(dsl_cases):
    worst = 0.0
    for expr, point in dsl_cases:
        _, _, hess = warpfn.eval2(expr, point)
        worst = max(worst, _rel(hess, _fd_hessian(expr, point)))
    assert worst <= 1e-6


def test_hessian_is_exactly_symmetric(dsl_cases):
    for expr, point in dsl_cases:
        _, _, hess = warpfn.eval2(expr, point)
        assert np.array_equal(hess, hess.T)


def test_value_and_gradient_agrees_with_full_evaluation(dsl_cases):
    for expr, point in dsl_cases[:100]:
        value, grad = warpfn.value_and_gradient(expr, point)
        value2, grad2, _ = warpfn.eval2(expr, point)
        assert value == value2
        np.testing.assert_allclose(grad, grad2, rtol=1e-13, atol=1e-13)


def test_evaluate_many_matches_scalar_loop(dsl_cases):
    for expr, point in dsl_cases[:60]:
        rows = [point]
        for delta in (1e-4, -1e-4):
            shifted = point + delta
            try:
                warpfn.evaluate(expr, shifted)
            except DslEvaluationError:
                continue
            rows.append(shifted)
        batch = np.array(rows)
        got = warpfn.evaluate_many(expr, batch)
        want = np.array([warpfn.evaluate(expr, row) for row in rows])
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------------------
# rejection: syntax


MALFORMED = [
    ("2 + sin(", 1, 8),
    ("2 +", 1, 3),
    ("(1 + 2", 1, 6),
    ("1 + * 2", 1, 4),
    ("x3", 2, 0),
    ("t", 2, 0),
    ("foo(1)", 1, 0),
    ("sin 1", 1, 4),
    ("sin(x1", 1, 6),
    ("1 ^ x1", 1, 4),
    ("2^1.5", 1, 2),
    ("2 ** 3", 1, 3),
    ("1 + $", 1, 4),
    (")", 1, 0),
    ("1 2", 1, 2),
    ("", 1, 0),
    ("x0", 2, 0),
    ("sin()", 1, 4),
    ("1 / / 2", 1, 4),
    ("--", 1, 2),
]


@pytest.mark.parametrize("text,dim,offset", MALFORMED)
def test_malformed_input_reports_exact_offset(text, dim, offset):
    with pytest.raises(DslSyntaxError) as err:
        warpfn.parse(text, dim)
    assert err.value.offset == offset
    assert f"offset {offset}" in str(err.value)


def test_unknown_identifiers_raise_the_name_error_subclass():
    for text, dim in [("x3", 2), ("t", 2), ("foo(1)", 1), ("x0", 2)]:
        with pytest.raises(DslNameError):
            warpfn.parse(text, dim)
    # Plain syntax damage is not a name problem.
    with pytest.raises(DslSyntaxError) as err:
        warpfn.parse("2 +", 1)
    assert not isinstance(err.value, DslNameError)


# ---------------------------------------------------------------------------
# rejection: evaluation domain


def test_division_by_zero_is_reported():
    expr = warpfn.parse("1/x1", 1)
    with pytest.raises(DslEvaluationError, match="division by zero"):
        warpfn.evaluate(expr, np.array([0.0]))


def test_log_of_non_positive_value_is_reported():
    expr = warpfn.parse("log(x1)", 1)
    for x in (0.0, -2.0):
        with pytest.raises(DslEvaluationError, match="log of non-positive"):
            warpfn.evaluate(expr, np.array([x]))


def test_sqrt_domain_rules():
    expr = warpfn.parse("sqrt(x1)", 1)
    with pytest.raises(DslEvaluationError, match="square root of negative"):
        warpfn.evaluate(expr, np.array([-1.0]))
    # The field must stay twice differentiable, so the branch point itself
    # is rejected as well.
    with pytest.raises(DslEvaluationError, match="derivative undefined at zero"):
        warpfn.evaluate(expr, np.array([0.0]))
    assert warpfn.evaluate(expr, np.array([4.0])) == 2.0


def test_domain_error_names_the_offending_subexpression():
    expr = warpfn.parse("1 + 2/(x1 - 1)", 1)
    with pytest.raises(DslEvaluationError) as err:
        warpfn.evaluate(expr, np.array([1.0]))
    assert "x1 - 1" in str(err.value)
