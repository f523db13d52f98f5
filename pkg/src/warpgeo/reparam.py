"""Rebuilding mixed-signature geodesics from rescaled-metric ones.

Given a geodesic ``mu`` of the rescaled base metric and a geodesic ``nu``
of the fiber, suitable reparametrizations of each produce the two legs of
a geodesic for the full warped metric of signature ``(+, -)``:

* the base map ``phi`` solves ``phi' = a (1 + r k)/k`` along ``mu``, with
  the constant ``a`` fixed by ``phi(0) = 0``, ``phi(1) = 1``; it is built
  by inverting the explicitly integrable inverse map;
* the fiber map ``psi`` satisfies ``psi' = b / k`` along the
  reparametrized base leg, again normalized to fix the constant ``b``.

The module also hosts the compatibility condition coupling the two initial
tangents, the tangent-vector transformation between the two descriptions,
and the classifier that recovers the rescaling parameter from a
mixed-signature initial condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from ._num import (
    GAUSS5_NODES as _GL_NODES, GAUSS5_WEIGHTS as _GL_WEIGHTS,
    composite_simpson, cumulative_simpson, solve_monotone,
)
from .errors import CompatibilityError, InputError, NumericalError
from .integrate import Curve, coupled_residual
from .manifold import MetricChart, TangentVector, metric_eval
from .warp import WarpField, admissible_range, values_along

__all__ = [
    "MonotoneMap", "RiemannianGeodesic", "compute_a_and_phi",
    "compute_b_and_psi", "reparametrize", "check_compatibility", "riemannize",
    "tangent_transform", "classify_riemannian", "phi_constant_from_trace",
    "norm_identity_errors",
]


@dataclass
class MonotoneMap:
    """A strictly increasing map of ``[0, 1]`` onto itself, sampled on a grid.

    ``constant`` is the normalization constant of the defining relation
    (``a`` for base maps, ``b`` for fiber maps); ``derivative_values`` hold
    the analytic derivative of the map at the grid nodes.
    """

    grid: np.ndarray
    values: np.ndarray
    constant: float
    derivative_values: Optional[np.ndarray] = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape or self.grid.ndim != 1:
            raise InputError("map grid and values must be 1-d arrays of equal length")
        if np.any(np.diff(self.values) <= 0.0):
            raise NumericalError("map values are not strictly increasing")
        self._spline = None

    def __call__(self, t):
        if self._spline is None:
            self._spline = PchipInterpolator(self.grid, self.values)
        return self._spline(t)

    def derivative_at(self, t):
        if self.derivative_values is None:
            if self._spline is None:
                self._spline = PchipInterpolator(self.grid, self.values)
            return self._spline.derivative()(t)
        return PchipInterpolator(self.grid, self.derivative_values)(t)


def _uniform_grid_step(curve: Curve) -> float:
    h = np.diff(curve.params)
    if not np.allclose(h, h[0], rtol=1e-9, atol=1e-15):
        raise InputError("reparametrization maps require a uniform grid")
    if (curve.params.shape[0] - 1) % 2:
        raise InputError("reparametrization maps require an even panel count")
    return float(h[0])


def _warp_along(w: WarpField, points: np.ndarray) -> np.ndarray:
    return values_along(w, points)


def _refine_inverse(mu: Curve, w: WarpField, r: float, accum: np.ndarray,
                    targets: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Newton-polish bisection output for the inverse reparametrization map.

    The bisection solves against a monotone interpolant of the node table,
    whose between-node error oscillates at the grid scale; differentiating
    anything downstream of that amplifies it by a grid factor.  Re-solving
    each node against the locally re-integrated forward map (running
    integral up to the nearest node plus a Gauss panel to the query point)
    leaves only the smooth quadrature error of the table itself.
    """
    u = values.copy()
    n = mu.params.shape[0] - 1
    goal = accum[-1] * targets

    def integrand_at(pos):
        k = _warp_along(w, np.atleast_2d(mu.point_at(pos)))
        return k / (1.0 + r * k)

    for _ in range(2):
        idx = np.clip(np.searchsorted(mu.params, u[1:-1], side="right") - 1,
                      0, n - 1)
        left = mu.params[idx]
        halfw = 0.5 * (u[1:-1] - left)
        sigma = (0.5 * (u[1:-1] + left))[:, None] + halfw[:, None] * _GL_NODES
        panel = halfw * (
            integrand_at(sigma.ravel()).reshape(sigma.shape) @ _GL_WEIGHTS
        )
        defect = accum[idx] + panel - goal[1:-1]
        step = -defect / integrand_at(u[1:-1])
        # Near a pole of the integrand the interpolant can be off by more
        # than a node spacing; cap each move at just under half the gap to
        # either neighbour so the polished nodes stay strictly ordered.
        gaps = np.diff(u)
        u[1:-1] += np.clip(step, -0.45 * gaps[:-1], 0.45 * gaps[1:])
    return u


def compute_a_and_phi(mu: Curve, w: WarpField, r: float) -> MonotoneMap:
    """Base-leg reparametrization along a rescaled-metric geodesic.

    Integrates ``k/(1 + r k)`` along ``mu``, which yields the constant
    ``a`` (the full integral) and samples of the *inverse* map; the map
    itself is recovered by monotone interpolation of those samples,
    bisection, and a Newton polish against the locally re-integrated
    forward relation.
    """
    admissible_range(w).require(r)
    h = _uniform_grid_step(mu)
    k = _warp_along(w, mu.points)
    integrand = k / (1.0 + r * k)
    accum = cumulative_simpson(integrand, h)
    a = accum[-1]
    inverse_values = accum / a
    inverse_values[0], inverse_values[-1] = 0.0, 1.0
    interp = PchipInterpolator(mu.params, inverse_values)
    targets = mu.params
    values = solve_monotone(interp, targets, 0.0, 1.0)
    values = _refine_inverse(mu, w, r, accum, targets, values)
    values[0], values[-1] = 0.0, 1.0
    k_at_phi = _warp_along(w, np.atleast_2d(mu.point_at(values)))
    derivative = a * (1.0 + r * k_at_phi) / k_at_phi
    return MonotoneMap(targets, values, a, derivative)


def compute_b_and_psi(gamma: Curve, w: WarpField) -> MonotoneMap:
    """Fiber-leg reparametrization along a (reparametrized) base curve.

    ``psi(s) = b * integral of 1/k along gamma up to s`` with ``b`` chosen
    so that ``psi(1) = 1``.  No inversion is needed: the running integral
    is the map.
    """
    h = _uniform_grid_step(gamma)
    k = _warp_along(w, gamma.points)
    accum = cumulative_simpson(1.0 / k, h)
    b = 1.0 / accum[-1]
    values = b * accum
    values[0], values[-1] = 0.0, 1.0
    return MonotoneMap(gamma.params, values, b, b / k)


def phi_constant_from_trace(gamma: Curve, w: WarpField, r: float) -> float:
    """The base-map constant computed from the *reparametrized* leg.

    Chain rule on the defining relation gives
    ``1/a = integral of (1 + r k)/k along gamma``; this recovers ``a``
    without access to the rescaled-metric curve, which is what the
    classifier needs when it starts from a mixed-signature geodesic.
    """
    admissible_range(w).require(r)
    h = _uniform_grid_step(gamma)
    k = _warp_along(w, gamma.points)
    return 1.0 / composite_simpson((1.0 + r * k) / k, h)


def reparametrize(curve: Curve, m: MonotoneMap) -> Curve:
    """The curve composed with a monotone map, velocities chain-ruled."""
    s = np.asarray(m.values, dtype=float)
    if s[0] < curve.params[0] - 1e-12 or s[-1] > curve.params[-1] + 1e-12:
        raise InputError("map range exceeds the curve's parameter interval")
    points = np.atleast_2d(curve.point_at(s))
    velocities = np.atleast_2d(curve.velocity_at(s))
    deriv = (
        m.derivative_values if m.derivative_values is not None
        else m.derivative_at(m.grid)
    )
    velocities = velocities * np.asarray(deriv, dtype=float)[:, None]
    points[0], points[-1] = curve.points[0], curve.points[-1]
    return Curve(m.grid.copy(), points, velocities, span=curve.span)


def check_compatibility(x0, X0, Y0: TangentVector, a_r: float, b_r: float,
                        w: WarpField, r: float, g1: MetricChart,
                        g2: MetricChart, tol: float = 1e-8
                        ) -> tuple[bool, float]:
    """The coupling identity between the two initial tangents.

    Checks ``a^2 (1 + r k(x0))/k(x0) * |X0|^2 = b^2 * |Y0|^2`` and returns
    ``(ok, defect)`` with the defect measured relative to the larger side
    (floored at one, so near-zero tangents are judged absolutely).
    """
    x0 = np.asarray(x0, dtype=float)
    k0x = w.value_at(x0)
    lhs = a_r * a_r * (1.0 + r * k0x) / k0x * metric_eval(g1, x0, X0, X0)
    rhs = b_r * b_r * metric_eval(g2, Y0.base, Y0, Y0)
    defect = abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))
    return defect <= tol, defect


@dataclass
class RiemannianGeodesic:
    """A mixed-signature geodesic rebuilt from rescaled-factor legs.

    ``base`` holds the input pair ``(mu, nu)``; ``gamma`` and ``tau`` are
    the reparametrized legs forming the actual geodesic; ``phi`` and
    ``psi`` the maps that produced them.
    """

    r: float
    base: tuple[Curve, Curve]
    gamma: Curve
    tau: Curve
    a_r: float
    b_r: float
    initial_tangents: tuple[TangentVector, TangentVector]
    residuals: tuple[float, float]
    phi: MonotoneMap
    psi: MonotoneMap

    def to_dict(self) -> dict:
        Xt, Yt = self.initial_tangents
        return {
            "r": None if math.isnan(self.r) else self.r,
            "a_r": None if math.isnan(self.a_r) else self.a_r,
            "b_r": None if math.isnan(self.b_r) else self.b_r,
            "initial_base_tangent": Xt.components.tolist(),
            "initial_fiber_tangent": Yt.components.tolist(),
            "residual_base": self.residuals[0],
            "residual_fiber": self.residuals[1],
        }


def riemannize(mu: Curve, nu: Curve, w: WarpField, r: float,
               g1: MetricChart, g2: MetricChart, *,
               compat_tol: float = 1e-8,
               residual_tol: Optional[float] = 1e-4) -> RiemannianGeodesic:
    """Assemble the mixed-signature geodesic from a pair of factor geodesics.

    ``mu`` must be a geodesic of the rescaled base metric for this ``r``
    and ``nu`` a geodesic of the fiber; their initial tangents must pass
    the compatibility check.  The base map is computed from ``mu``, the
    fiber map from the already reparametrized base leg, matching the
    defining relation of the fiber equation.

    Residuals of the coupled system are always measured on the result and
    stored; if ``residual_tol`` is given they must stay below it.
    """
    if mu.steps != nu.steps:
        raise InputError("factor curves must share one grid")
    phi = compute_a_and_phi(mu, w, r)
    gamma = reparametrize(mu, phi)
    psi = compute_b_and_psi(gamma, w)
    a_r, b_r = phi.constant, psi.constant
    x0 = mu.points[0]
    Y0 = TangentVector(nu.points[0], nu.velocities[0])
    ok, defect = check_compatibility(
        x0, mu.velocities[0], Y0, a_r, b_r, w, r, g1, g2, tol=compat_tol
    )
    if not ok:
        raise CompatibilityError(defect, compat_tol)
    tau = reparametrize(nu, psi)
    residuals = coupled_residual(g1, g2, w, gamma, tau)
    if residual_tol is not None and max(residuals) > residual_tol:
        raise NumericalError(
            f"coupled-system residuals {residuals} exceed {residual_tol:g}"
        )
    tangents = (
        TangentVector(gamma.points[0], gamma.velocities[0]),
        TangentVector(tau.points[0], tau.velocities[0]),
    )
    return RiemannianGeodesic(
        r=r, base=(mu, nu), gamma=gamma, tau=tau, a_r=a_r, b_r=b_r,
        initial_tangents=tangents, residuals=residuals, phi=phi, psi=psi,
    )


def tangent_transform(X_r, Y_r: TangentVector, x0, a_r: float, b_r: float,
                      w: WarpField, r: float
                      ) -> tuple[TangentVector, TangentVector]:
    """Initial tangents of the rebuilt geodesic from the rescaled ones.

    ``X -> a (1 + r k(x0))/k(x0) X`` on the base, ``Y -> b/k(x0) Y`` on
    the fiber.
    """
    x0 = np.asarray(x0, dtype=float)
    k0x = w.value_at(x0)
    X = X_r.components if isinstance(X_r, TangentVector) else np.asarray(X_r, dtype=float)
    Xt = TangentVector(x0, a_r * (1.0 + r * k0x) / k0x * X)
    Yt = TangentVector(Y_r.base, b_r / k0x * Y_r.components)
    return Xt, Yt


def classify_riemannian(x0, Xt: TangentVector, Yt: TangentVector,
                        w: WarpField, g1: MetricChart, g2: MetricChart
                        ) -> Optional[float]:
    """Recover the rescaling parameter from mixed-signature initial data.

    For a nonzero fiber tangent, returns

        r = |Xt|^2 / (k(x0)^2 |Yt|^2) - 1/k(x0)

    when the strict inequality guaranteeing admissibility holds
    (``|Xt|^2 > k(x0)|Yt|^2 (K0 - k(x0))/K0``, with the last factor read
    as 1 for an unbounded field), and ``None`` otherwise.
    """
    x0 = np.asarray(x0, dtype=float)
    q1 = metric_eval(g1, x0, Xt, Xt)
    q2 = metric_eval(g2, Yt.base, Yt, Yt)
    if q2 <= 0.0:
        raise InputError("fiber tangent must be nonzero to classify")
    k0x = w.value_at(x0)
    if math.isinf(w.K0):
        threshold = k0x * q2
    else:
        threshold = k0x * q2 * (w.K0 - k0x) / w.K0
    if not q1 > threshold:
        return None
    return q1 / (k0x * k0x * q2) - 1.0 / k0x


def norm_identity_errors(geo: RiemannianGeodesic, w: WarpField,
                         g1: MetricChart, g2: MetricChart) -> dict:
    """Worst-case violation of the two closed-form norm identities.

    Along the rebuilt geodesic the base speed satisfies

        |gamma'|^2 = a^2 (1+r k(x0)) (1+r k)/(k(x0) k) |X_r|^2

    and the fiber speed satisfies ``k^2 |tau'|^2 = b^2 |Y_0|^2`` (in
    particular that product is a first integral).  Returns the max-norm
    errors of both, plus the drift of the first integral itself.
    """
    mu, nu = geo.base
    x0 = mu.points[0]
    k0x = w.value_at(x0)
    X2 = metric_eval(g1, x0, mu.velocities[0], mu.velocities[0])
    Y2 = metric_eval(g2, nu.points[0], nu.velocities[0], nu.velocities[0])
    r, a, b = geo.r, geo.a_r, geo.b_r
    base_err = 0.0
    fiber_err = 0.0
    products = np.empty(geo.gamma.steps + 1)
    for i in range(geo.gamma.steps + 1):
        x, u = geo.gamma.points[i], geo.gamma.velocities[i]
        y, v = geo.tau.points[i], geo.tau.velocities[i]
        k = w.value_at(x)
        base_pred = a * a * (1.0 + r * k0x) * (1.0 + r * k) / (k0x * k) * X2
        base_err = max(base_err, abs(metric_eval(g1, x, u, u) - base_pred))
        fiber_speed2 = metric_eval(g2, y, v, v)
        products[i] = k * k * fiber_speed2
        fiber_err = max(fiber_err, abs(products[i] - b * b * Y2))
    return {
        "base_norm_error": base_err,
        "fiber_norm_error": fiber_err,
        "first_integral_drift": float(np.max(np.abs(products - products[0]))),
    }
