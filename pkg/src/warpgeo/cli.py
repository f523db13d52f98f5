"""Command-line driver: run one task described by a YAML config file.

Usage: ``warpgeo --config task.yaml [--out DIR] [--steps N] [--quiet]``

Exit codes: 0 on success, 2 for configuration or input problems, 3 for
numerical failures; in both failure cases the error payload is written to
``error.json`` in the output directory when that directory is writable.
A run clears the opposite outcome's status files, so ``report.json`` and
``error.json`` never coexist and the directory reflects the latest run.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .connect import (
    beta_of_r, connect_points, flrw_beta, flrw_connect, partial_connect,
    theta_consistency,
)
from .errors import InputError, NumericalError, WarpGeoError
from .integrate import (
    Curve, IntegratorConfig, curve_to_csv, geodesic_residual,
    integrate_coupled_oracle, integrate_geodesic, speed_drift,
)
from .manifold import (
    MetricChart, circle, euclidean, poincare_ball, poincare_half_plane,
    sphere, weighted_line,
)
from .reparam import norm_identity_errors, riemannize, tangent_transform
from .warp import (
    WarpField, admissible_range, conformal_metric, negativity_check,
    sectional_curvature_conformal,
)

TASKS = {}


def task(name):
    def register(fn):
        TASKS[name] = fn
        return fn
    return register


# ---------------------------------------------------------------------------
# config handling


def _get(section: dict, key: str, where: str, required=True, default=None):
    if key not in section:
        if required:
            raise InputError(f"missing config key {where}.{key}")
        return default
    return section[key]


def _vector(section, key, where, dim=None, required=True, default=None):
    raw = _get(section, key, where, required, default)
    if raw is None:
        return None
    try:
        vec = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}.{key} must be a list of numbers: {exc}") from None
    if vec.ndim != 1:
        raise InputError(f"{where}.{key} must be a flat list of numbers")
    if dim is not None and vec.shape[0] != dim:
        raise InputError(f"{where}.{key} must have {dim} entries, got {vec.shape[0]}")
    return vec


def _number(section, key, where, required=True, default=None):
    raw = _get(section, key, where, required, default)
    if raw is None:
        return None
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise InputError(f"{where}.{key} must be a number, got {raw!r}")
    return float(raw)


def build_chart(section: dict, where: str) -> MetricChart:
    name = _get(section, "name", where)
    if name == "euclidean":
        return euclidean(int(_number(section, "dim", where, default=2, required=False)))
    if name == "poincare_half_plane":
        return poincare_half_plane()
    if name == "poincare_ball":
        return poincare_ball(int(_number(section, "dim", where, default=2, required=False)))
    if name == "sphere":
        return sphere(
            int(_number(section, "dim", where, default=2, required=False)),
            _number(section, "radius", where, default=1.0, required=False),
        )
    if name == "circle":
        return circle(_number(section, "radius", where, default=1.0, required=False))
    if name == "weighted_line":
        return weighted_line(_get(section, "weight", where))
    raise InputError(
        f"{where}.name: unknown chart {name!r}; choose from euclidean, "
        "poincare_half_plane, poincare_ball, sphere, circle, weighted_line"
    )


def build_warp(section: dict, dim: int) -> WarpField:
    text = _get(section, "expression", "warp")
    k0 = _number(section, "k0", "warp")
    K0 = _number(section, "K0", "warp", required=False)
    return WarpField.from_expression(
        text, dim, k0=k0, K0=math.inf if K0 is None else K0
    )


class TaskConfig:
    """Validated contents of one config file."""

    def __init__(self, doc: dict, steps_override=None):
        if not isinstance(doc, dict):
            raise InputError("config root must be a mapping")
        self.task = _get(doc, "task", "config")
        if self.task not in TASKS:
            raise InputError(
                f"unknown task {self.task!r}; choose from {', '.join(sorted(TASKS))}"
            )
        integ = doc.get("integrator") or {}
        steps = int(_number(integ, "steps", "integrator", default=1024, required=False))
        if steps_override is not None:
            steps = steps_override
        self.cfg = IntegratorConfig(
            steps=steps,
            tolerance=_number(integ, "tolerance", "integrator",
                              default=1e-6, required=False),
        )
        self.seed = int(_number(doc, "seed", "config", default=0, required=False))
        self.base = build_chart(_get(doc, "base_chart", "config"), "base_chart")
        fiber = doc.get("fiber_chart")
        self.fiber = build_chart(fiber, "fiber_chart") if fiber else None
        warp_section = doc.get("warp")
        self.warp = build_warp(warp_section, self.base.dim) if warp_section else None
        self.params = doc.get(self.task.replace("-", "_"), {}) or {}
        if not isinstance(self.params, dict):
            raise InputError(f"section {self.task!r} must be a mapping")

    def require_fiber(self) -> MetricChart:
        if self.fiber is None:
            raise InputError(f"task {self.task!r} needs a fiber_chart section")
        return self.fiber

    def require_warp(self) -> WarpField:
        if self.warp is None:
            raise InputError(f"task {self.task!r} needs a warp section")
        return self.warp


# ---------------------------------------------------------------------------
# tasks


@task("integrate")
def run_integrate(tc: TaskConfig, out: Path) -> dict:
    p = tc.params
    which = _get(p, "chart", "integrate", required=False, default="base")
    if which == "base":
        chart = tc.base
    elif which == "fiber":
        chart = tc.require_fiber()
    elif which == "rescaled":
        chart = conformal_metric(tc.base, tc.require_warp(),
                                 _number(p, "r", "integrate"))
    else:
        raise InputError("integrate.chart must be base, fiber, or rescaled")
    point = _vector(p, "point", "integrate", dim=chart.dim)
    velocity = _vector(p, "velocity", "integrate", dim=chart.dim)
    curve = integrate_geodesic(chart, point, velocity, tc.cfg)
    curve_to_csv(curve, out / "curve.csv")
    report = {
        "chart": chart.name,
        "endpoint": curve.endpoint().tolist(),
        "geodesic_residual": geodesic_residual(chart, curve),
        "speed_drift": speed_drift(chart, curve),
    }
    lines = [
        f"integrated {chart.name} geodesic, {tc.cfg.steps} steps",
        f"endpoint: {curve.endpoint()}",
        f"residual: {report['geodesic_residual']:.3e}  "
        f"speed drift: {report['speed_drift']:.3e}",
    ]
    return {"report": report, "summary": lines}


def _integrate_pair(tc: TaskConfig, p: dict, where: str):
    w = tc.require_warp()
    g2 = tc.require_fiber()
    r = _number(p, "r", where)
    x0 = _vector(p, "x0", where, dim=tc.base.dim)
    X0 = _vector(p, "X0", where, dim=tc.base.dim)
    y0 = _vector(p, "y0", where, dim=g2.dim)
    Y0 = _vector(p, "Y0", where, dim=g2.dim)
    rescaled = conformal_metric(tc.base, w, r)
    mu = integrate_geodesic(rescaled, x0, X0, tc.cfg)
    nu = integrate_geodesic(g2, y0, Y0, tc.cfg)
    return w, g2, r, mu, nu


@task("riemannize")
def run_riemannize(tc: TaskConfig, out: Path) -> dict:
    p = tc.params
    w, g2, r, mu, nu = _integrate_pair(tc, p, "riemannize")
    if p.get("fit_fiber_speed"):
        # rescale the fiber velocity so the coupling identity holds exactly
        from .connect import _beta_from_mu  # shared dial computation

        res = _beta_from_mu(mu, w, r, tc.base, mu.velocities[0], 0)
        from .manifold import metric_eval

        speed = math.sqrt(metric_eval(g2, nu.points[0], nu.velocities[0],
                                      nu.velocities[0]))
        if speed == 0.0:
            raise InputError("riemannize.Y0 must be nonzero to fit its speed")
        Y0 = nu.velocities[0] * (res.beta / speed)
        nu = integrate_geodesic(g2, nu.points[0], Y0, tc.cfg)
    geo = riemannize(mu, nu, w, r, tc.base, g2, residual_tol=None)
    for name, curve in (("mu", mu), ("nu", nu), ("gamma", geo.gamma),
                        ("tau", geo.tau)):
        curve_to_csv(curve, out / f"{name}.csv")
    report = geo.to_dict()
    report["norm_identities"] = norm_identity_errors(geo, w, tc.base, g2)
    if p.get("oracle_check", True):
        Xt, Yt = geo.initial_tangents
        ob, of = integrate_coupled_oracle(
            tc.base, g2, w, (mu.points[0], nu.points[0]),
            (Xt.components, Yt.components), tc.cfg,
        )
        report["oracle_deviation"] = max(
            float(np.max(np.abs(ob.points - geo.gamma.points))),
            float(np.max(np.abs(of.points - geo.tau.points))),
        )
    lines = [
        f"rebuilt geodesic at r={r:g}: a={geo.a_r:.12g} b={geo.b_r:.12g}",
        f"residuals: base {geo.residuals[0]:.3e}, fiber {geo.residuals[1]:.3e}",
    ]
    if "oracle_deviation" in report:
        lines.append(f"deviation from directly integrated system: "
                     f"{report['oracle_deviation']:.3e}")
    return {"report": report, "summary": lines}


def _finish_connection(report_obj, w, g1, g2, out: Path) -> dict:
    geo = report_obj.geodesic
    for name, curve in (("mu", geo.base[0]), ("nu", geo.base[1]),
                        ("gamma", geo.gamma), ("tau", geo.tau)):
        curve_to_csv(curve, out / f"{name}.csv")
    report = report_obj.to_dict()
    report["norm_identities"] = (
        None if report_obj.r is None
        else norm_identity_errors(geo, w, g1, g2)
    )
    lines = [
        f"connection found: r={report_obj.r}",
        f"beta={report_obj.beta:.12g} (target {report_obj.target_beta:.12g})",
        f"endpoint error {report_obj.endpoint_error:.3e}, "
        f"{report_obj.iterations} dial evaluations",
        f"residuals: base {geo.residuals[0]:.3e}, fiber {geo.residuals[1]:.3e}",
    ]
    return {"report": report, "summary": lines}


@task("connect")
def run_connect(tc: TaskConfig, out: Path) -> dict:
    p = tc.params
    w = tc.require_warp()
    g2 = tc.require_fiber()
    z0 = (_vector(p, "x0", "connect", dim=tc.base.dim),
          _vector(p, "y0", "connect", dim=g2.dim))
    z1 = (_vector(p, "x1", "connect", dim=tc.base.dim),
          _vector(p, "y1", "connect", dim=g2.dim))
    kwargs = {}
    if "r_max" in p:
        kwargs["r_max"] = _number(p, "r_max", "connect")
    if "samples" in p:
        kwargs["samples"] = int(_number(p, "samples", "connect"))
    rep = connect_points(tc.base, g2, w, z0, z1, tc.cfg, **kwargs)
    return _finish_connection(rep, w, tc.base, g2, out)


@task("flrw")
def run_flrw(tc: TaskConfig, out: Path) -> dict:
    p = tc.params
    w = tc.require_warp()
    g2 = tc.require_fiber()
    t0 = _number(p, "t0", "flrw")
    t1 = _number(p, "t1", "flrw")
    y0 = _vector(p, "y0", "flrw", dim=g2.dim)
    y1 = _vector(p, "y1", "flrw", dim=g2.dim)
    weight = p.get("weight")
    rep = flrw_connect(w, t0, t1, y0, y1, g2, tc.cfg, weight=weight)
    result = _finish_connection(rep, w, tc.base, g2, out)
    result["report"]["first_integral_residual"] = rep.first_integral_residual
    result["summary"].append(
        f"first-integral residual {rep.first_integral_residual:.3e}"
    )
    if p.get("cross_check"):
        general = connect_points(
            tc.base, g2, w, (np.array([t0]), y0), (np.array([t1]), y1), tc.cfg
        )
        result["report"]["cross_check_r"] = general.r
        result["summary"].append(
            f"general-path cross check: r={general.r:.12g} "
            f"(difference {abs(general.r - rep.r):.3e})"
        )
    return {"report": result["report"], "summary": result["summary"]}


@task("partial-connect")
def run_partial(tc: TaskConfig, out: Path) -> dict:
    p = tc.params
    w, g2, r, mu, nu = _integrate_pair(tc, p, "partial_connect")
    alpha = _number(p, "alpha", "partial_connect")
    beta_plus, beta_minus = partial_connect((mu, nu), alpha, w, r)
    report = {
        "r": r,
        "alpha": alpha,
        "beta_plus": beta_plus,
        "beta_minus": beta_minus,
    }
    if p.get("theta", True):
        theta = theta_consistency(mu, nu, w, r, alpha)
        report["theta"] = {
            "beta_displayed": theta["beta_displayed"],
            "beta_compat": theta["beta_compat"],
            "relative_gap": theta["relative_gap"],
            "point_displayed": theta["point_displayed"].tolist(),
            "point_compat": theta["point_compat"].tolist(),
        }
    lines = [
        f"partial connection at r={r:g}, alpha={alpha:g}: "
        f"beta = +/-{beta_plus:.12g}",
    ]
    if "theta" in report:
        gap = report["theta"]["relative_gap"]
        lines.append(
            f"fiber-reaching dial: displayed {report['theta']['beta_displayed']:.12g} "
            f"vs coupling-consistent {report['theta']['beta_compat']:.12g} "
            f"(relative gap {gap:.3e})"
        )
        if gap > 1e-12:
            lines.append("note: the two dial readings disagree; the "
                         "coupling-consistent value matches partial_connect")
    return {"report": report, "summary": lines}


@task("curvature-scan")
def run_curvature(tc: TaskConfig, out: Path) -> dict:
    p = tc.params
    w = tc.require_warp()
    g1 = tc.base
    r_values = p.get("r_values")
    if not isinstance(r_values, list) or not r_values:
        raise InputError("curvature_scan.r_values must be a non-empty list")
    grid = _get(p, "grid", "curvature_scan")
    mins = _vector(grid, "mins", "curvature_scan.grid", dim=g1.dim)
    maxs = _vector(grid, "maxs", "curvature_scan.grid", dim=g1.dim)
    counts = _vector(grid, "counts", "curvature_scan.grid", dim=g1.dim)
    axes = [np.linspace(mins[i], maxs[i], int(counts[i])) for i in range(g1.dim)]
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1)
    planes = int(_number(p, "planes", "curvature_scan", default=1, required=False))
    rng = np.random.default_rng(tc.seed)
    rows = []
    all_negative = True
    bid_all = True
    for point in mesh:
        for r in r_values:
            for _ in range(planes):
                e1, e2 = _random_orthonormal_plane(g1, point, rng)
                K = sectional_curvature_conformal(g1, w, float(r), point, e1, e2)
                ok = negativity_check(
                    g1, w, float(r), point, e1,
                    plane_curvature=_plane_curvature(g1, point, e1, e2),
                ) and negativity_check(
                    g1, w, float(r), point, e2,
                    plane_curvature=_plane_curvature(g1, point, e1, e2),
                )
                all_negative &= K < 0.0
                bid_all &= ok
                rows.append([*point, float(r), K, float(ok)])
    header = ",".join(
        [f"x{i + 1}" for i in range(g1.dim)] + ["r", "curvature", "criterion_ok"]
    )
    np.savetxt(out / "curvature.csv", np.array(rows), fmt="%.17g",
               delimiter=",", header=header, comments="")
    ks = np.array([row[-2] for row in rows])
    report = {
        "samples": len(rows),
        "all_negative": bool(all_negative),
        "criterion_everywhere": bool(bid_all),
        "min_curvature": float(np.min(ks)),
        "max_curvature": float(np.max(ks)),
    }
    lines = [
        f"scanned {len(rows)} (point, r, plane) samples",
        f"all curvatures negative: {report['all_negative']} "
        f"(max {report['max_curvature']:.6g})",
        f"negativity criterion everywhere: {report['criterion_everywhere']}",
    ]
    return {"report": report, "summary": lines}


def _plane_curvature(g1, point, e1, e2):
    from .manifold import sectional_curvature

    return sectional_curvature(g1, point, e1, e2)


def _random_orthonormal_plane(chart, point, rng):
    """Two random vectors made orthonormal for the chart metric at a point."""
    from .manifold import _metric

    g = _metric(chart, np.asarray(point, dtype=float))
    for _ in range(64):
        raw = rng.standard_normal((2, chart.dim))
        e1 = raw[0] / math.sqrt(raw[0] @ g @ raw[0])
        e2 = raw[1] - (raw[1] @ g @ e1) * e1
        n2 = e2 @ g @ e2
        if n2 > 1e-12:
            return e1, e2 / math.sqrt(n2)
    raise NumericalError("could not draw an orthonormal plane")


@task("beta-scan")
def run_beta_scan(tc: TaskConfig, out: Path) -> dict:
    p = tc.params
    w = tc.require_warp()
    g2 = tc.require_fiber()
    lower = admissible_range(w).lower
    if "r_values" in p:
        r_values = [float(v) for v in p["r_values"]]
        if not r_values:
            raise InputError("beta_scan.r_values must be a non-empty list")
    else:
        count = int(_number(p, "samples", "beta_scan", default=64, required=False))
        r_max = _number(p, "r_max", "beta_scan", default=1e6, required=False)
        start = lower + 1e-3 * (1.0 + abs(lower))
        ratio = ((r_max - lower) / (start - lower)) ** (1.0 / (count - 1))
        r_values = [lower + (start - lower) * ratio ** i for i in range(count)]
    use_first_integral = bool(p.get("first_integral", tc.base.dim == 1))
    rows = []
    warm = None
    for r in r_values:
        if use_first_integral:
            t0 = _number(p, "x0", "beta_scan")
            t1 = _number(p, "x1", "beta_scan")
            res = flrw_beta(w, t0, t1, r, tc.cfg, weight=p.get("weight"))
        else:
            x0 = _vector(p, "x0", "beta_scan", dim=tc.base.dim)
            x1 = _vector(p, "x1", "beta_scan", dim=tc.base.dim)
            res = beta_of_r(tc.base, g2, w, x0, x1, r, tc.cfg, v_init=warm)
            warm = res.X_r.components
        rows.append([r, res.beta, res.a_r, res.b_r, res.iterations])
    table = np.array(rows)
    np.savetxt(out / "beta.csv", table, fmt="%.17g", delimiter=",",
               header="r,beta,a_r,b_r,iterations", comments="")
    betas = table[:, 1]
    report = {
        "samples": len(rows),
        "strictly_decreasing": bool(np.all(np.diff(betas) < 0.0)),
        "range_ratio": float(betas[0] / betas[-1]),
        "beta_first": float(betas[0]),
        "beta_last": float(betas[-1]),
    }
    lines = [
        f"dial sampled at {len(rows)} parameter values in ({lower:.6g}, inf)",
        f"strictly decreasing: {report['strictly_decreasing']}; "
        f"ratio across grid: {report['range_ratio']:.6g}",
    ]
    return {"report": report, "summary": lines}


# ---------------------------------------------------------------------------
# entry point


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)!r}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="warpgeo",
        description="Rebuild and connect geodesics of warped product metrics.",
    )
    ap.add_argument("--config", required=True, help="YAML task description")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--steps", type=int, default=None,
                    help="override the integrator step count")
    ap.add_argument("--quiet", action="store_true", help="suppress the summary")
    ap.add_argument("--version", action="version", version=f"warpgeo {__version__}")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def record_failure(exc: WarpGeoError):
        # Status files always describe the latest run: a failure must not
        # leave a report.json from an earlier success sitting next to the
        # fresh error.json (and vice versa below).
        try:
            (out / "report.json").unlink(missing_ok=True)
            (out / "summary.txt").unlink(missing_ok=True)
            with open(out / "error.json", "w") as fh:
                json.dump(exc.payload(), fh, indent=2, default=_json_default)
        except OSError:
            pass
        print(f"error: {exc}", file=sys.stderr)

    try:
        with open(args.config) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except yaml.YAMLError as exc:
        print(f"error: malformed YAML: {exc}", file=sys.stderr)
        return 2

    try:
        tc = TaskConfig(doc, steps_override=args.steps)
        result = TASKS[tc.task](tc, out)
    except InputError as exc:
        record_failure(exc)
        return 2
    except NumericalError as exc:
        record_failure(exc)
        return 3

    (out / "error.json").unlink(missing_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(result["report"], fh, indent=2, default=_json_default)
    summary = "\n".join(result["summary"]) + "\n"
    with open(out / "summary.txt", "w") as fh:
        fh.write(summary)
    if not args.quiet:
        print(summary, end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
