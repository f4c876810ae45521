"""The invariant suites run by the ``property_suite`` experiment.

Each check returns a row ``{"name", "passed", "detail"}``; the exact
counting checks also return their per-instance counts for counts.csv.
"""

from __future__ import annotations

import time

import numpy as np

from hpol_lab.entropy import (covering_count, poincare_inequality_probe, property_iterate_check,
                              separated_count)
from hpol_lab.flow import batch_returns, restrict_to_energy, straight_section
from hpol_lab.torus import NumericError, model_from_params, torus_distance
from hpol_lab.weak_kam.alpha import alpha_lower, alpha_result
from hpol_lab.weak_kam.aubry import aubry_estimate, semicontinuity_probe

COUNTS_HEADER = ["check", "instance", "K", "eps", "lhs", "mid", "rhs", "holds"]
GAP_TOL = 1e-3
CLOSED_FORM_TOL = 1e-6
HOMOGENEITY_TOL = 1e-2
POINCARE_MARGIN = 0.3


def _row(name, passed, **detail):
    return {"name": name, "passed": passed, "detail": detail}


def check_sandwich(rng, n=200):
    """S(2 eps) <= G(eps) <= S(eps) with exact packing and covering, K <= 20 points on T^2."""
    rows, bad = [], 0
    for i in range(n):
        K = int(rng.integers(2, 21))
        pts = rng.random((K, 2))
        D = torus_distance(pts[:, None, :], pts[None, :, :])
        eps = float(rng.uniform(0.05, 0.4))
        s2 = separated_count(D, K, 2 * eps, "exact").count
        g = covering_count(D, K, eps, "exact")
        s1 = separated_count(D, K, eps, "exact").count
        ok = s2 <= g <= s1
        bad += not ok
        rows.append(["sandwich", i, K, eps, s2, g, s1, ok])
    return _row("sandwich", bad == 0, instances=n, violations=bad), rows


def _circle_map(omega, b):
    def f(x):
        return np.mod(x + omega + b / (2 * np.pi) * np.sin(2 * np.pi * x), 1.0)

    return f


def check_iterate(rng, n=100):
    """S_n^{f^m}(eps) <= S_{m(n-1)+1}^f(eps) for circle diffeomorphisms, exact counts."""
    rows, bad = [], 0
    for i in range(n):
        f = _circle_map(float(rng.random()), float(rng.uniform(0.0, 0.9)))
        K = int(rng.integers(2, 21))
        sample = rng.random((K, 1))
        m, steps = int(rng.integers(2, 4)), int(rng.integers(2, 5))
        eps = float(rng.uniform(0.02, 0.3))
        ok, lhs, rhs = property_iterate_check(f, sample, m, steps, eps)
        bad += not ok
        rows.append(["iterate", i, K, eps, lhs, "", rhs, bool(ok)])
    return _row("iterate", bad == 0, instances=n, violations=bad), rows


def _test_covectors(model, rng, n):
    if model.family == "pinched":
        base = [(1.0, 0.0), (1.0, 0.3), (0.5, 1.0), (0.3, 0.7)]
    elif model.family == "revolution":
        base = [(1.0, 0.0), (0.5, 0.5), (0.2, 1.0), (1.0, 1.0)]
    else:
        base = []
    extra = [tuple(x) for x in rng.uniform(-1.0, 1.0, (max(n - len(base), 0), 2))]
    return [np.array(c) for c in (base + extra)[:n]]


def check_duality(model, N, M_p, rng, n=4):
    """alpha_lower <= alpha_upper and a gap below GAP_TOL at every test covector."""
    gaps, order_ok = [], True
    for c in _test_covectors(model, rng, n):
        res = alpha_result(model, c, N)
        lo, _ = alpha_lower(model, c, N, M_p, upper=res)
        gaps.append(res.upper - lo)
        order_ok &= lo <= res.upper + 1e-7  # LP feasibility tolerance
    worst = float(max(gaps))
    detail = {"N": N, "max_gap": worst, "tol": GAP_TOL}
    if N < 32 and worst > GAP_TOL:
        detail["advisory"] = "grid too coarse for the duality bracket; raise N"
    return _row("duality_bracket", bool(order_ok and worst <= GAP_TOL), **detail)


def check_closed_form(model, N, rng, n=8):
    """Flat models only: alpha_upper against 1/2 <G0^{-1} c, c>."""
    if model.family != "flat":
        return None
    Ginv = np.asarray(model.params["G0inv"], float)
    errs = []
    for c in rng.uniform(-1.0, 1.0, (n, 2)):
        errs.append(abs(alpha_result(model, c, N).upper - 0.5 * c @ Ginv @ c))
    worst = float(max(errs))
    return _row("alpha_closed_form", worst <= CLOSED_FORM_TOL, max_error=worst,
                tol=CLOSED_FORM_TOL)


def check_homogeneity(model, N, rng, lams=(0.5, 2.0, 3.0)):
    if not model.is_metric:
        return None
    worst = 0.0
    for c in _test_covectors(model, rng, 2):
        a = alpha_result(model, c, N).upper
        for lam in lams:
            al = alpha_result(model, lam * c, N).upper
            worst = max(worst, abs(al - lam**2 * a) / max(lam**2 * a, 1e-12))
    return _row("homogeneity", worst <= HOMOGENEITY_TOL, max_rel_error=worst,
                tol=HOMOGENEITY_TOL)


def check_convexity(model, N, rng, n=6):
    """alpha at midpoints never exceeds the chord average."""
    worst = -np.inf
    for _ in range(n):
        c1, c2 = rng.uniform(-1.0, 1.0, (2, 2))
        a1, a2 = (alpha_result(model, c, N).upper for c in (c1, c2))
        mid = alpha_result(model, 0.5 * (c1 + c2), N).upper
        worst = max(worst, mid - 0.5 * (a1 + a2))
    return _row("convexity", worst <= 1e-6, max_excess=float(worst))


def check_poincare(model, e, K=100, exponents=tuple(range(1, 9)), dt=0.02):
    """Return-map slope against flow slope on a fan ensemble crossing {q1 = 0}."""
    q0, angle, eps_max = np.array([0.0, 0.2]), 0.3, 0.2
    sec = straight_section((1, 0), 0.0)
    centre = restrict_to_energy(model, (q0, np.array([np.cos(angle), np.sin(angle)])), e)
    try:
        _, _, T = batch_returns(model, sec, centre.q[None], centre.p[None], 1, dt=dt)
    except NumericError as exc:
        return _row("poincare", False, error=str(exc))
    width = K * eps_max / (4 * 2.0 ** max(exponents) * float(T[0, 1]))
    ang = angle + np.linspace(-width / 2, width / 2, K)
    p = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    st = restrict_to_energy(model, (np.tile(q0, (K, 1)), p), e)
    probe = poincare_inequality_probe(model, sec, st.q, st.p, exponents, dt=dt,
                                      margin=POINCARE_MARGIN)
    s = probe.summary()
    inconclusive = s["map_slope"] is None or s["flow_slope"] is None
    return _row("poincare", None if inconclusive else not probe.violation, **s,
                margin=POINCARE_MARGIN)


def _semicontinuity_limit(model):
    if model.family == "pinched":
        return np.array([1.0, 0.3])  # inside the (1, 0) face
    return np.array([0.6, 0.2])


def check_semicontinuity(model, N):
    """Excess of A(c_k) over A(c) along c_k -> c stays within the grid resolution."""
    c = _semicontinuity_limit(model)
    cs = [c + np.array([0.1 / k, 0.0]) for k in (1, 2, 4, 8)]
    out = semicontinuity_probe(model, cs, c, N=N)
    return _row("semicontinuity", bool(out["excess"][-1] <= 2.0 / N + 1e-12),
                excess=out["excess"], bound=2.0 / N,
                coverage_limit=aubry_estimate(model, c, N=N).coverage)


def run_checks(config):
    """All suites for the model in ``config``; returns (rows, count rows, timings)."""
    model = model_from_params(config.model_params())
    rng = np.random.default_rng(config.seed)
    rows, counts, timings = [], [], {}

    def timed(name, fn, *args):
        t0 = time.perf_counter()
        out = fn(*args)
        timings[name] = time.perf_counter() - t0
        return out

    for name, fn in (("sandwich", check_sandwich), ("iterate", check_iterate)):
        row, extra = timed(name, fn, rng)
        rows.append(row)
        counts.extend(extra)
    for name, fn, args in (
        ("alpha_closed_form", check_closed_form, (model, config.N, rng)),
        ("duality_bracket", check_duality, (model, config.N, config.M_p, rng)),
        ("homogeneity", check_homogeneity, (model, config.N, rng)),
        ("convexity", check_convexity, (model, config.N, rng)),
        ("semicontinuity", check_semicontinuity, (model, config.N)),
        ("poincare", check_poincare, (model, config.e)),
    ):
        row = timed(name, fn, *args)
        if row is not None:
            rows.append(row)
    return rows, counts, timings
