"""Compiled RK4 + energy-projection kernels for the built-in model families."""

import numpy as np
from numba import njit

FLAT, REVOLUTION, PINCHED = 0, 1, 2
TWO_PI = 2.0 * np.pi


def model_code(model):
    """(family code, parameter vector) or None for custom models."""
    if model.family == "flat":
        Gi = model.params["G0inv"]
        return FLAT, np.array([Gi[0, 0], Gi[0, 1], Gi[1, 1]])
    if model.family == "revolution":
        return REVOLUTION, np.array([model.params["a"], model.params["b"]])
    if model.family == "pinched":
        return PINCHED, np.array([model.params["A"]])
    return None


@njit(cache=True)
def _metric_diag(code, par, q2):
    # returns g11, g22, dg11, dg22 for diagonal families
    if code == REVOLUTION:
        r = par[0] + par[1] * np.cos(TWO_PI * q2)
        dr = -TWO_PI * par[1] * np.sin(TWO_PI * q2)
        return r * r, 1.0, 2.0 * r * dr, 0.0
    s = np.sin(np.pi * q2)
    f = 1.0 + 2.0 * par[0] * s * s
    df = TWO_PI * par[0] * np.sin(TWO_PI * q2)
    return f, f, df, df


@njit(cache=True)
def ham(code, par, q1, q2, p1, p2):
    if code == FLAT:
        return 0.5 * (par[0] * p1 * p1 + 2.0 * par[1] * p1 * p2 + par[2] * p2 * p2)
    g11, g22, d11, d22 = _metric_diag(code, par, q2)
    return 0.5 * (p1 * p1 / g11 + p2 * p2 / g22)


@njit(cache=True)
def field(code, par, q1, q2, p1, p2):
    if code == FLAT:
        return par[0] * p1 + par[1] * p2, par[1] * p1 + par[2] * p2, 0.0, 0.0
    g11, g22, d11, d22 = _metric_diag(code, par, q2)
    dHq2 = -0.5 * (p1 * p1 * d11 / (g11 * g11) + p2 * p2 * d22 / (g22 * g22))
    return p1 / g11, p2 / g22, 0.0, -dHq2


@njit(cache=True)
def rk4(code, par, q1, q2, p1, p2, h):
    a1, a2, a3, a4 = field(code, par, q1, q2, p1, p2)
    b1, b2, b3, b4 = field(code, par, q1 + 0.5 * h * a1, q2 + 0.5 * h * a2,
                           p1 + 0.5 * h * a3, p2 + 0.5 * h * a4)
    c1, c2, c3, c4 = field(code, par, q1 + 0.5 * h * b1, q2 + 0.5 * h * b2,
                           p1 + 0.5 * h * b3, p2 + 0.5 * h * b4)
    d1, d2, d3, d4 = field(code, par, q1 + h * c1, q2 + h * c2, p1 + h * c3, p2 + h * c4)
    w = h / 6.0
    return (q1 + w * (a1 + 2 * b1 + 2 * c1 + d1), q2 + w * (a2 + 2 * b2 + 2 * c2 + d2),
            p1 + w * (a3 + 2 * b3 + 2 * c3 + d3), p2 + w * (a4 + 2 * b4 + 2 * c4 + d4))


@njit(cache=True)
def project(code, par, q1, q2, p1, p2, e):
    g1, g2, _, _ = field(code, par, q1, q2, p1, p2)
    gg = g1 * g1 + g2 * g2
    if gg == 0.0:
        return p1, p2
    lam = 0.0
    for _ in range(3):
        a1 = p1 + lam * g1
        a2 = p2 + lam * g2
        r = ham(code, par, q1, q2, a1, a2) - e
        v1, v2, _, _ = field(code, par, q1, q2, a1, a2)
        slope = v1 * g1 + v2 * g2
        if slope == 0.0:
            break
        lam -= r / slope
    return p1 + lam * g1, p2 + lam * g2


@njit(cache=True)
def integrate_batch(code, par, Q0, P0, n_steps, h, stride, do_project, drift_max):
    """Integrate K states; returns (Q, P, ok) with samples every ``stride`` steps."""
    K = Q0.shape[0]
    S = n_steps // stride + 1
    Q = np.empty((S, K, 2))
    P = np.empty((S, K, 2))
    ok = True
    for k in range(K):
        q1, q2, p1, p2 = Q0[k, 0], Q0[k, 1], P0[k, 0], P0[k, 1]
        e0 = ham(code, par, q1, q2, p1, p2)
        scale = max(abs(e0), 1e-12)
        Q[0, k, 0], Q[0, k, 1], P[0, k, 0], P[0, k, 1] = q1, q2, p1, p2
        j = 1
        for i in range(1, n_steps + 1):
            q1, q2, p1, p2 = rk4(code, par, q1, q2, p1, p2, h)
            if do_project:
                if abs(ham(code, par, q1, q2, p1, p2) - e0) / scale > drift_max:
                    ok = False
                    return Q, P, ok
                p1, p2 = project(code, par, q1, q2, p1, p2, e0)
            if i % stride == 0:
                Q[j, k, 0], Q[j, k, 1], P[j, k, 0], P[j, k, 1] = q1, q2, p1, p2
                j += 1
    return Q, P, ok
