"""Boundary connection: shooting, the fiber-distance dial, line-base solver."""

import math

import numpy as np
import pytest

import warpgeo as wg
from warpgeo.connect import _beta_from_mu, _flrw_mu, _restricted, _shoot
from warpgeo.errors import BracketingError, InputError, ShootingError
from warpgeo.manifold import metric_eval

CFG = wg.IntegratorConfig(steps=256)
FAST = wg.IntegratorConfig(steps=64)


# ---------------------------------------------------------------------------
# boundary shooting on a single chart


def test_flat_shooting_recovers_the_chord():
    V = wg.shoot_boundary(wg.euclidean(2), np.zeros(2), np.array([1.0, 2.0]), FAST)
    np.testing.assert_allclose(V.components, [1.0, 2.0], atol=1e-10)


def test_vertical_hyperbolic_shot_has_logarithmic_speed():
    chart = wg.poincare_half_plane()
    x0 = np.array([0.0, 1.0])
    x1 = np.array([0.0, 2.0])
    V = wg.shoot_boundary(chart, x0, x1, CFG)
    np.testing.assert_allclose(V.components, [0.0, np.log(2.0)], atol=1e-8)
    hit = wg.integrate_geodesic(chart, x0, V.components, CFG)
    assert np.max(np.abs(hit.endpoint() - x1)) <= 1e-8


def test_shooting_is_unchanged_by_constant_rescaling():
    base = wg.poincare_half_plane()
    chart = wg.conformal_metric(base, wg.WarpField.constant(1.0, 2), 3.0)
    x0 = np.array([0.0, 1.0])
    x1 = np.array([1.5, 0.8])
    V_base = wg.shoot_boundary(base, x0, x1, CFG)
    V_scaled = wg.shoot_boundary(chart, x0, x1, CFG)
    np.testing.assert_allclose(V_scaled.components, V_base.components, atol=1e-10)


def test_starved_newton_raises_a_shooting_error():
    chart = wg.poincare_half_plane()
    with pytest.raises(ShootingError) as err:
        _shoot(chart, np.array([0.0, 1.0]), np.array([2.0, 2.0]), FAST, max_iter=1)
    payload = err.value.payload()
    assert payload["iterations"] == 1
    assert payload["residual"] > 0.0


# ---------------------------------------------------------------------------
# the fiber-distance dial


def test_dial_closed_form_for_trivial_warp():
    g1 = wg.euclidean(1)
    g2 = wg.euclidean(1)
    one = wg.WarpField.constant(1.0, 1)
    for r in (0.0, 3.0, 8.0, 99.0):
        beta, X_r, a_r, b_r = wg.beta_of_r(
            g1, g2, one, np.zeros(1), np.ones(1), r, CFG
        )
        assert abs(beta - 1.0 / np.sqrt(1.0 + r)) <= 1e-8
        assert a_r == pytest.approx(1.0 / (1.0 + r), rel=1e-10)
        assert b_r == pytest.approx(1.0, rel=1e-10)


def test_connect_points_solves_the_trivial_warp_closed_form():
    g1 = wg.euclidean(1)
    g2 = wg.euclidean(1)
    one = wg.WarpField.constant(1.0, 1)
    report = wg.connect_points(
        g1, g2, one, (np.zeros(1), np.zeros(1)), (np.ones(1), np.array([0.5])), CFG
    )
    # beta(r) = 1/sqrt(1+r) equals 0.5 exactly at r = 3.
    assert abs(report.r - 3.0) <= 1e-6
    assert report.beta == pytest.approx(0.5, abs=1e-9)
    assert report.endpoint_error <= 1e-6
    assert max(report.geodesic.residuals) <= 1e-5
    doc = report.to_dict()
    assert doc["r"] == report.r
    assert doc["target_beta"] == 0.5


def test_coinciding_fiber_endpoints_short_circuit():
    g1 = wg.euclidean(1)
    g2 = wg.euclidean(1)
    one = wg.WarpField.constant(1.0, 1)
    report = wg.connect_points(
        g1, g2, one, (np.zeros(1), np.array([0.4])), (np.ones(1), np.array([0.4])), FAST
    )
    assert report.r is None
    assert report.beta == 0.0
    assert np.max(np.abs(report.geodesic.tau.velocities)) <= 1e-12
    assert max(report.geodesic.residuals) <= 1e-5


def test_coinciding_base_endpoints_cannot_move_the_fiber():
    g1 = wg.euclidean(1)
    g2 = wg.euclidean(1)
    one = wg.WarpField.constant(1.0, 1)
    with pytest.raises(BracketingError, match="coinciding base endpoints"):
        wg.connect_points(
            g1, g2, one, (np.zeros(1), np.zeros(1)), (np.zeros(1), np.ones(1)), FAST
        )


def test_unreachable_targets_raise_after_walking_to_the_threshold():
    g1 = wg.euclidean(1)
    g2 = wg.euclidean(1)
    grow = wg.WarpField.from_expression("exp(x1)", 1, 1.0)  # unbounded above
    with pytest.raises(BracketingError, match="not reached"):
        wg.connect_points(
            g1, g2, grow, (np.zeros(1), np.zeros(1)), (np.ones(1), np.array([1e6])), FAST
        )


def test_targets_below_the_reachable_range_raise():
    g1 = wg.euclidean(1)
    g2 = wg.euclidean(1)
    one = wg.WarpField.constant(1.0, 1)
    with pytest.raises(BracketingError, match="stayed above"):
        wg.connect_points(
            g1, g2, one, (np.zeros(1), np.zeros(1)), (np.ones(1), np.array([0.05])),
            FAST, r_max=10.0, samples=6,
        )


def test_dial_blows_up_toward_the_admissibility_threshold():
    g1 = wg.euclidean(1)
    g2 = wg.euclidean(1)
    w = wg.WarpField.from_expression("2 + sin(x1)", 1, 1.0, 3.0)
    lower = wg.admissible_range(w).lower
    betas = []
    for offset in (0.5, 0.2, 0.05, 0.02):
        res = wg.beta_of_r(g1, g2, w, np.zeros(1), np.array([math.pi]),
                           lower + offset, CFG)
        assert np.isfinite(res.beta) and res.beta > 0.0
        betas.append(res.beta)
    assert all(b < c for b, c in zip(betas, betas[1:]))


def test_connect_line_base_with_circle_fiber():
    w = wg.WarpField.from_expression("2 + sin(x1)", 1, 1.0, 3.0)
    rep = wg.connect_points(
        wg.euclidean(1), wg.circle(1.0), w,
        (np.zeros(1), np.zeros(1)), (np.array([math.pi]), np.ones(1)), CFG,
    )
    assert rep.endpoint_error <= 1e-6
    assert max(rep.geodesic.residuals) <= 1e-5
    assert rep.beta == pytest.approx(1.0, abs=1e-8)  # circle arc from 0 to 1


def test_dial_bounds_sandwich_the_square():
    g1 = wg.euclidean(1)
    g2 = wg.euclidean(1)
    w = wg.WarpField.from_expression("2 + sin(x1)", 1, 1.0, 3.0)
    doc = wg.beta_bounds(g1, g2, w, np.zeros(1), np.array([1.5]), 0.7, CFG)
    assert doc["lower_ok"] and doc["upper_ok"]
    assert doc["lower"] <= doc["beta_squared"] <= doc["upper"]


# ---------------------------------------------------------------------------
# restricted traversals and the fiber dial map


def _unit_speed_pair(r, steps=256):
    g1 = wg.euclidean(1)
    one = wg.WarpField.constant(1.0, 1)
    chart = wg.conformal_metric(g1, one, r)
    cfg = wg.IntegratorConfig(steps=steps)
    mu = wg.integrate_geodesic(chart, np.zeros(1), np.ones(1), cfg)
    beta = _beta_from_mu(mu, one, r, g1, np.ones(1), 0).beta
    nu = wg.integrate_geodesic(wg.euclidean(1), np.zeros(1), np.array([beta]), cfg)
    return mu, nu, one


def test_partial_traversal_closed_form():
    r = 3.0
    mu, nu, one = _unit_speed_pair(r)
    plus, minus = wg.partial_connect((mu, nu), 0.7, one, r)
    assert plus == pytest.approx(0.35, rel=1e-9)
    assert minus == pytest.approx(-0.35, rel=1e-9)
    assert wg.partial_connect((mu, nu), 0.0, one, r) == (0.0, 0.0)


def test_partial_traversal_joins_with_a_residual_checked_geodesic():
    # Non-constant warp: the two-sided fiber distances from the restriction
    # formula must agree with the dial of the restricted leg, and the
    # geodesic rebuilt over that restriction must satisfy the coupled system.
    g1 = wg.euclidean(1)
    g2 = wg.euclidean(1)
    w = wg.WarpField.from_expression("2 + sin(x1)", 1, 1.0, 3.0)
    r = 0.0
    chart = wg.conformal_metric(g1, w, r)
    mu = wg.integrate_geodesic(chart, np.zeros(1), np.ones(1), CFG)
    unit_fiber = wg.integrate_geodesic(g2, np.zeros(1), np.ones(1), CFG)
    alpha = 0.5
    plus, minus = wg.partial_connect((mu, unit_fiber), alpha, w, r)
    assert minus == -plus
    restricted = _restricted(mu, alpha)
    res = _beta_from_mu(restricted, w, r, g1, restricted.velocities[0], 0)
    assert res.beta == pytest.approx(plus, rel=1e-9)
    nu = wg.integrate_geodesic(g2, np.zeros(1), np.array([plus]), CFG)
    geo = wg.riemannize(restricted, nu, w, r, g1, g2, residual_tol=None)
    assert max(geo.residuals) <= 1e-5
    assert geo.tau.points[-1][0] == pytest.approx(plus, abs=1e-9)


def test_partial_traversal_rejects_parameters_outside_the_leg():
    mu, nu, one = _unit_speed_pair(1.0)
    with pytest.raises(InputError):
        wg.partial_connect((mu, nu), 1.2, one, 1.0)
    with pytest.raises(InputError):
        wg.partial_connect((mu, nu), -0.3, one, 1.0)


def test_fiber_dial_map_for_trivial_warp_is_uniform():
    for r in (0.0, 3.0):
        mu, nu, one = _unit_speed_pair(r)
        np.testing.assert_allclose(
            wg.theta_map(mu, nu, one, r, 0.0), nu.points[0], atol=1e-12
        )
        for t in (0.25, 0.6, 1.0):
            np.testing.assert_allclose(
                wg.theta_map(mu, nu, one, r, t), nu.point_at(t), atol=1e-9
            )


def test_fiber_dial_readings_disagree_by_the_square_root():
    r = 3.0
    mu, nu, one = _unit_speed_pair(r)
    doc = wg.theta_consistency(mu, nu, one, r, 0.5)
    # Linear reading t, compatibility reading t/sqrt(1+r): gap 1 - 1/2.
    assert doc["beta_displayed"] == pytest.approx(0.5, rel=1e-9)
    assert doc["beta_compat"] == pytest.approx(0.25, rel=1e-9)
    assert doc["relative_gap"] == pytest.approx(0.5, rel=1e-6)


def test_fiber_dial_on_a_hyperbolic_base():
    # Non-trivial warp on the half-plane with a unit-speed circle fiber:
    # the compatibility reading of the dial must agree with the two-sided
    # traversal formula at every queried parameter.
    g1 = wg.poincare_half_plane()
    w = wg.WarpField.from_expression("2 + 0.5*sin(2*x1)", 2, 1.5, 2.5)
    r = 1.0
    chart = wg.conformal_metric(g1, w, r)
    mu = wg.integrate_geodesic(chart, np.array([0.0, 1.0]),
                               np.array([1.0, 0.0]), CFG)
    s = np.linspace(0.0, 3.0, CFG.steps + 1)
    nu = wg.Curve(s, s[:, None], np.ones((CFG.steps + 1, 1)))
    for t in (0.25, 0.5, 0.9):
        doc = wg.theta_consistency(mu, nu, w, r, t)
        plus, _ = wg.partial_connect((mu, nu), t, w, r)
        assert doc["beta_compat"] == pytest.approx(plus, rel=1e-9)
        assert doc["point_displayed"][0] == pytest.approx(
            doc["beta_displayed"], abs=1e-9
        )
        assert doc["beta_displayed"] > doc["beta_compat"] > 0.0


def test_fiber_dial_needs_enough_fiber_coverage():
    g1 = wg.euclidean(1)
    g2 = wg.euclidean(1)
    half = wg.WarpField.constant(0.5, 1)
    r = 1.0
    chart = wg.conformal_metric(g1, half, r)
    mu = wg.integrate_geodesic(chart, np.zeros(1), np.ones(1), CFG)
    beta = _beta_from_mu(mu, half, r, g1, np.ones(1), 0).beta
    nu = wg.integrate_geodesic(g2, np.zeros(1), np.array([beta]), CFG)
    with pytest.raises(InputError, match="dial asks"):
        wg.theta_consistency(mu, nu, half, r, 0.9)


def test_fiber_dial_rejects_self_intersecting_traces():
    t = np.linspace(0.0, 1.0, 257)
    loop = wg.Curve(
        t,
        np.column_stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)]),
        np.column_stack([-2 * np.pi * np.sin(2 * np.pi * t), 2 * np.pi * np.cos(2 * np.pi * t)]),
    )
    nu = wg.Curve(t, t[:, None], np.ones((257, 1)))
    one = wg.WarpField.constant(1.0, 2)
    with pytest.raises(InputError, match="self-intersects"):
        wg.theta_consistency(loop, nu, one, 0.0, 0.5)


# ---------------------------------------------------------------------------
# the line-base fast path


def test_line_base_trace_and_constant_for_trivial_warp():
    one = wg.WarpField.constant(1.0, 1)
    for r in (0.0, 3.0):
        mu, c = _flrw_mu(one, 0.0, 2.0, r, CFG)
        assert c == pytest.approx(2.0 * np.sqrt(1.0 + r), rel=1e-12)
        np.testing.assert_allclose(mu.points[:, 0], 2.0 * mu.params, atol=1e-10)
        np.testing.assert_allclose(mu.velocities[:, 0], 2.0, atol=1e-10)


def test_line_base_dial_closed_form():
    one = wg.WarpField.constant(1.0, 1)
    for r in (0.0, 3.0, 15.0):
        res = wg.flrw_beta(one, 0.0, 2.0, r, CFG)
        assert res.beta == pytest.approx(2.0 / np.sqrt(1.0 + r), rel=1e-10)
        assert res.a_r == pytest.approx(1.0 / (1.0 + r), rel=1e-10)
        np.testing.assert_allclose(res.X_r.components, [2.0], rtol=1e-10)


def test_line_base_connection_matches_the_general_path():
    g2 = wg.euclidean(1)
    one = wg.WarpField.constant(1.0, 1)
    fast = wg.flrw_connect(one, 0.0, 2.0, np.zeros(1), np.ones(1), g2, CFG)
    assert fast.r == pytest.approx(3.0, abs=1e-9)
    assert fast.first_integral_residual is not None
    assert fast.first_integral_residual <= 1e-8
    assert max(fast.geodesic.residuals) <= 1e-5

    general = wg.connect_points(
        wg.euclidean(1), g2, one, (np.zeros(1), np.zeros(1)), (np.array([2.0]), np.ones(1)), CFG
    )
    assert abs(general.r - fast.r) <= 1e-8


def test_first_integral_solve_against_direct_quadrature():
    # The endpoint condition pins the first-integral constant to the full
    # slowness integral, which an adaptive quadrature reproduces without
    # any of this module's machinery.
    from scipy.integrate import quad

    w = wg.WarpField.from_expression("2 + sin(x1)", 1, 1.0, 3.0)
    mu, c = _flrw_mu(w, 0.0, math.pi, 0.0, CFG)
    want, _ = quad(lambda x: 1.0 / math.sqrt(2.0 + math.sin(x)), 0.0, math.pi)
    assert c == pytest.approx(want, rel=1e-10)
    drift = max(
        abs(mu.velocities[i, 0] - c * math.sqrt(2.0 + math.sin(mu.points[i, 0])))
        for i in range(mu.steps + 1)
    )
    assert drift <= 1e-8


def test_weighted_line_base_closed_form():
    # k = 1 with weight (1+t)^2: the slowness is sqrt(1+r)(1+t), so the
    # cumulative integral inverts to mu(s) = sqrt(1 + s (2 t1 + t1^2)) - 1.
    one = wg.WarpField.constant(1.0, 1)
    mu, c = _flrw_mu(one, 0.0, 2.0, 3.0, CFG, weight_chart=wg.weighted_line("(1 + t)^2"))
    assert c == pytest.approx(8.0, rel=1e-12)
    assert mu.point_at(0.5)[0] == pytest.approx(np.sqrt(5.0) - 1.0, abs=1e-9)
    assert mu.point_at(1.0)[0] == pytest.approx(2.0, abs=1e-12)


def test_line_base_solver_object_delegates():
    g2 = wg.euclidean(1)
    one = wg.WarpField.constant(1.0, 1)
    problem = wg.FlrwProblem(one, 0.0, 2.0, np.zeros(1), np.ones(1))
    report = problem.solve(g2, CFG)
    assert report.r == pytest.approx(3.0, abs=1e-9)


def test_line_base_rejects_an_empty_interval():
    one = wg.WarpField.constant(1.0, 1)
    with pytest.raises(InputError):
        _flrw_mu(one, 1.0, 1.0, 0.0, CFG)
    g2 = wg.euclidean(1)
    with pytest.raises(BracketingError):
        wg.flrw_connect(one, 1.0, 1.0, np.zeros(1), np.ones(1), g2, CFG)


def test_line_base_dial_survives_the_admissibility_threshold():
    w = wg.WarpField.from_expression("2 + sin(x1)", 1, 1.0, 3.0)
    lower = wg.admissible_range(w).lower
    r = lower + 1e-3 * (1.0 + abs(lower))
    res = wg.flrw_beta(w, 0.0, 6.0, r, CFG)
    assert np.isfinite(res.beta) and res.beta > 0.0
    assert np.all(np.diff(res.mu.points[:, 0]) > 0.0)
