"""Shared test fixtures.

The expensive piece is the random warp-function corpus: a seeded stream of
syntactically valid expressions paired with evaluation points at which the
expression and its first two derivatives are finite and of moderate size.
Moderate size matters because the corpus is checked against central finite
differences, and a pole sitting a hair away from the sample point would turn
the comparison into a test of floating-point noise rather than of the
derivative code.  Rejection sampling against magnitude caps keeps the stream
deterministic: same seed, same corpus, every run.
"""

import numpy as np
import pytest

from warpgeo import warpfn

_FUNCS = ("sin", "cos", "exp", "log", "sqrt")
_MAG_CAP = 1e3
_PROBE = 2e-5


def _rand_text(rng, dim, depth):
    roll = rng.random()
    if depth == 0 or roll < 0.25:
        if rng.random() < 0.4:
            return f"{rng.uniform(-2.5, 2.5):.3f}"
        return f"x{rng.integers(1, dim + 1)}"
    if roll < 0.45:
        fn = _FUNCS[rng.integers(0, len(_FUNCS))]
        arg = _rand_text(rng, dim, depth - 1)
        if fn in ("log", "sqrt"):
            # Keep the argument strictly positive so the case stays inside
            # the function's domain in a neighbourhood of the sample point.
            return f"{fn}(0.5 + ({arg})^2)"
        return f"{fn}({arg})"
    if roll < 0.55:
        return f"-({_rand_text(rng, dim, depth - 1)})"
    if roll < 0.65:
        return f"({_rand_text(rng, dim, depth - 1)})^{rng.integers(2, 4)}"
    op = "+-*/"[rng.integers(0, 4)]
    left = _rand_text(rng, dim, depth - 1)
    right = _rand_text(rng, dim, depth - 1)
    return f"({left}) {op} ({right})"


def _tame_at(expr, point):
    try:
        value, grad, hess = warpfn.eval2(expr, point)
    except warpfn.DslEvaluationError:
        return False
    scale = max(abs(value), np.max(np.abs(grad)), np.max(np.abs(hess)))
    return np.isfinite(scale) and scale <= _MAG_CAP


def _admissible(expr, point):
    if not _tame_at(expr, point):
        return False
    # The derivative checks difference the expression a step away from the
    # sample point; insist the whole probed neighbourhood is tame too.
    for axis in range(point.size):
        for sign in (-1.0, 1.0):
            shifted = point.copy()
            shifted[axis] += sign * _PROBE
            if not _tame_at(expr, shifted):
                return False
    return True


@pytest.fixture(scope="session")
def dsl_cases():
    """1000 deterministic (expression, point) pairs safe to difference."""
    rng = np.random.default_rng(118625)
    cases = []
    while len(cases) < 1000:
        dim = int(rng.integers(1, 4))
        text = _rand_text(rng, dim, 3)
        point = rng.uniform(-1.5, 1.5, dim)
        expr = warpfn.parse(text, dim)
        if _admissible(expr, point):
            cases.append((expr, point))
    return cases
