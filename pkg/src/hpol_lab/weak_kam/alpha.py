"""Mather's alpha function from above (min-max over grid fields) and below (occupation LP)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog, minimize
from scipy.sparse.linalg import splu

from hpol_lab.torus import NumericError
from hpol_lab.weak_kam.grid import GridField, centred_diff, centred_diff_adjoint, grid_points

BETAS = tuple(16.0 * 2**k for k in range(9))  # 16 ... 4096
M_P = 64
LP_METHOD = "highs"


class AlphaConvergenceError(NumericError):
    """Descent stagnated; ``best`` holds the best hard max reached and ``field`` its minimiser."""

    def __init__(self, msg, best, field_):
        super().__init__(msg)
        self.best = best
        self.field = field_


class InfeasibleLPError(NumericError):
    pass


@dataclass
class OccupationMeasure:
    """Weights on a phase grid (cell q, momentum p); q-marginal invariance residual in TV."""

    q: np.ndarray
    p: np.ndarray
    weights: np.ndarray
    residual: float

    @property
    def mass(self):
        return float(self.weights.sum())

    def support(self, threshold=1e-8):
        keep = self.weights > threshold * max(self.weights.max(), 1e-300)
        return self.q[keep], self.p[keep], self.weights[keep]


@dataclass
class AlphaResult:
    c: np.ndarray
    upper: float
    w: GridField
    residual: np.ndarray
    lower: Optional[float] = None
    measure: Optional[OccupationMeasure] = None
    info: dict = field(default_factory=dict)

    @property
    def gap(self):
        return None if self.lower is None else self.upper - self.lower

    def to_json(self):
        return {
            "c": [float(x) for x in self.c],
            "upper": self.upper,
            "lower": self.lower,
            "N": self.w.N,
            "max_residual": float(self.residual.max()),
            "info": self.info,
        }


def hard_max(model, c, u, Q=None):
    N = u.shape[0]
    if Q is None:
        Q = grid_points(N)
    return float(np.max(model.H(Q, np.asarray(c, float) + centred_diff(u))))


def alpha_upper(model, c, N=64, betas=BETAS, u0=None, max_iter=3000, gtol=1e-9):
    """min over grid fields u of max_q H(q, c + du(q)).

    Log-sum-exp smoothing with inverse temperature ``beta`` running through
    ``betas``; L-BFGS on each stage, warm-started from the previous one.
    The reported value is the hard max at the best field found.
    Returns ``(value, GridField)``.
    """
    if N < 16:
        raise ValueError("grid resolution must be at least 16")
    c = np.asarray(c, dtype=float)
    Q = grid_points(N)
    u = np.zeros((N, N)) if u0 is None else np.array(u0, dtype=float).reshape(N, N)
    u -= u.mean()
    best_u, best = u.copy(), hard_max(model, c, u, Q)
    stalled = False
    for beta in betas:

        def fun(x):
            uu = x.reshape(N, N)
            P = c + centred_diff(uu)
            Hv = model.H(Q, P)
            m = Hv.max()
            wts = np.exp(beta * (Hv - m))
            Z = wts.sum()
            val = m + np.log(Z) / beta
            g = centred_diff_adjoint((wts / Z)[..., None] * model.dH_dp(Q, P))
            return val, g.ravel()

        res = minimize(fun, u.ravel(), jac=True, method="L-BFGS-B",
                       options={"maxiter": max_iter, "gtol": gtol, "ftol": 1e-15, "maxcor": 20})
        u = res.x.reshape(N, N)
        u -= u.mean()
        val = hard_max(model, c, u, Q)
        if val < best:
            best, best_u = val, u.copy()
        stalled = res.nit >= max_iter
    if stalled:
        raise AlphaConvergenceError("alpha_upper: descent stagnated at the last stage", best,
                                    GridField(best_u))
    return best, GridField(best_u)


def residual_field(model, c, w, value):
    """H(q, c + dw(q)) - value on the grid."""
    Q = grid_points(w.N)
    return model.H(Q, np.asarray(c, float) + w.du) - value


def alpha_result(model, c, N=64, u0=None, **kw):
    value, w = alpha_upper(model, c, N, u0=u0, **kw)
    return AlphaResult(np.asarray(c, float), value, w, residual_field(model, c, w, value))


# ---------------------------------------------------------------------------
# occupation-measure linear program


def _momentum_samples(model, q, energies, M_p, extra=None):
    """Momenta on each energy shell at the cell centres, M_p directions by angle."""
    ang = 2 * np.pi * np.arange(M_p) / M_p
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    blocks = []
    for e in energies:
        if e <= 0:
            continue
        # metric families: H is 2-homogeneous, so scale the unit direction exactly
        h1 = model.H(q[:, None, :], dirs[None, :, :])
        if model.is_metric:
            blocks.append(np.broadcast_to(dirs[None] * np.sqrt(e / h1)[..., None], (len(q), M_p, 2)))
        else:
            from hpol_lab.flow import restrict_to_energy

            qq = np.broadcast_to(q[:, None, :], (len(q), M_p, 2))
            pp = np.broadcast_to(dirs[None], (len(q), M_p, 2))
            blocks.append(restrict_to_energy(model, (qq, pp), e).p)
    if extra is not None:
        blocks.append(extra[:, None, :])
    return np.concatenate(blocks, axis=1)


def transport_matrix(N, q, v, h):
    """Sparse bilinear transport of unit masses from q by h*v onto the N x N node grid."""
    n_var = len(q)
    x = (q + h * v) * N
    i0 = np.floor(x).astype(int)
    t = x - i0
    rows, vals = [], []
    for di in (0, 1):
        for dj in (0, 1):
            wgt = (t[:, 0] if di else 1 - t[:, 0]) * (t[:, 1] if dj else 1 - t[:, 1])
            r = ((i0[:, 0] + di) % N) * N + (i0[:, 1] + dj) % N
            rows.append(r)
            vals.append(wgt)
    rows = np.concatenate(rows)
    cols = np.tile(np.arange(n_var), 4)
    return sp.csr_matrix((np.concatenate(vals), (rows, cols)), shape=(N * N, n_var))


def alpha_lower(model, c, N=32, M_p=M_P, energies=None, upper=None, h=None, slack=None,
                max_rounds=200):
    """max sum_i w_i [(c - p_i) . dH/dp(q_i, p_i) + H(q_i, p_i)] over occupation measures.

    Phase samples are the N x N grid nodes times, for each node, ``M_p``
    momentum directions on every shell in ``energies`` plus the lift
    c + dw(q) of the upper-bound field (when ``upper`` is given).  The
    constraints are w >= 0, sum w = 1 and |(P w - w)| <= slack on each
    q-cell, with P the time-h bilinear transport.
    Returns ``(value, OccupationMeasure)``.
    """
    c = np.asarray(c, dtype=float)
    q = grid_points(N).reshape(-1, 2)
    extra = None
    if upper is not None:
        w = upper.w if upper.w.N == N else _resample(upper.w, N)
        extra = (c + w.du).reshape(-1, 2)
        if energies is None:
            energies = [upper.upper]
    if energies is None:
        energies = [alpha_upper(model, c, N)[0]]
    P = _momentum_samples(model, q, energies, M_p, extra)
    n_m = P.shape[1]
    Qv = np.repeat(q, n_m, axis=0)
    Pv = P.reshape(-1, 2)
    V = model.dH_dp(Qv, Pv)
    cost = np.sum((c - Pv) * V, axis=-1) + model.H(Qv, Pv)
    speed = float(np.max(np.linalg.norm(V, axis=-1)))
    if h is None:
        h = 1.0 / (N * max(speed, 1e-12))
    if slack is None:
        slack = 0.0
    T = transport_matrix(N, Qv, V, h)
    cell = np.repeat(np.arange(N * N), n_m)
    M = sp.csr_matrix((np.ones(len(cell)), (cell, np.arange(len(cell)))), shape=(N * N, len(cell)))
    D = (T - M).tocsc()
    wts = _column_generation(D, cost, slack, n_m, max_rounds)
    resid = float(np.abs(D @ wts).sum())
    meas = OccupationMeasure(Qv, Pv, wts, resid)
    meas.h = h
    return float(cost @ wts), meas


def _solve_restricted(D, cost, slack):
    n_rows, n = D.shape
    ones = sp.csr_matrix(np.ones((1, n)))
    if slack > 0:
        res = linprog(-cost, A_ub=sp.vstack([D, -D]).tocsr(), b_ub=np.full(2 * n_rows, slack),
                      A_eq=ones, b_eq=[1.0], bounds=(0, None), method=LP_METHOD)
    else:
        res = linprog(-cost, A_eq=sp.vstack([D, ones]).tocsr(),
                      b_eq=np.concatenate([np.zeros(n_rows), [1.0]]), bounds=(0, None),
                      method=LP_METHOD)
    if res.status == 2:
        raise InfeasibleLPError("occupation LP infeasible; enlarge the invariance slack")
    if res.status != 0:
        raise NumericError(f"occupation LP failed: {res.message}")
    if slack > 0:
        y = res.ineqlin.marginals[:n_rows] - res.ineqlin.marginals[n_rows:]
        z = res.eqlin.marginals[0]
    else:
        y = res.eqlin.marginals[:-1]
        z = res.eqlin.marginals[-1]
    return res.x, y, z


def _solve_chain(D, cost):
    """Square restricted problem: stationary law of the chain plus its duals by sparse LU.

    Returns None when the chain is not uniquely ergodic (singular system or
    a stationary vector with negative entries), leaving it to the LP solver.
    """
    n = D.shape[0]
    A = sp.lil_matrix(D)
    A[0, :] = 1.0
    rhs = np.zeros(n)
    rhs[0] = 1.0
    try:
        lu = splu(sp.csc_matrix(A))
    except RuntimeError:
        return None
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)) or x.min() < -1e-12:
        return None
    # duals of the primal rows 1..n-1 and the mass row (row 0 is redundant: y_0 = 0)
    yz = lu.solve(-cost, trans="T")
    y = np.zeros(n)
    y[1:] = yz[1:]
    return np.maximum(x, 0.0), y, yz[0]


def _column_generation(D, cost, slack, n_m, max_rounds, tol=1e-10):
    """Solve the full LP by pricing columns in from the candidate pool.

    The last sample at every cell (the lifted graph point, or any one
    direction) seeds the restricted problem; a column per cell makes the
    restricted transport a Markov chain, whose stationary law is feasible.
    """
    n = len(cost)
    active = np.zeros(n, bool)
    active[n_m - 1::n_m] = True
    per_round = max(D.shape[0], 64)
    for rnd in range(max_rounds):
        idx = np.flatnonzero(active)
        sol = _solve_chain(D[:, idx], cost[idx]) if rnd == 0 and slack == 0 else None
        x, y, z = sol if sol is not None else _solve_restricted(D[:, idx], cost[idx], slack)
        reduced = -cost - D.T @ y - z
        reduced[active] = 0.0
        cand = np.flatnonzero(reduced < -tol)
        if cand.size == 0:
            break
        if cand.size > per_round:
            cand = cand[np.argpartition(reduced[cand], per_round)[:per_round]]
        active[cand] = True
    else:
        raise NumericError("occupation LP: column generation did not converge")
    wts = np.zeros(n)
    wts[idx] = np.maximum(x, 0.0)
    return wts / wts.sum()


def _resample(w, N):
    return GridField(w.interpolate(grid_points(N)))


def alpha_certified(model, c, N=64, N_lp=None, M_p=M_P, **kw):
    """Upper and lower values with the subsolution, residual field and optimal measure."""
    res = alpha_result(model, c, N, **kw)
    lower, meas = alpha_lower(model, c, N_lp or N, M_p, upper=res)
    res.lower, res.measure = lower, meas
    return res


def rotation_vector(source, elapsed=None):
    """Rotation vector of a trajectory (unwrapped displacement / time) or of a measure."""
    if isinstance(source, OccupationMeasure):
        raise TypeError("pass (measure, model) as a tuple for measures")
    if isinstance(source, tuple):
        meas, model = source
        v = model.dH_dp(meas.q, meas.p)
        return np.sum(meas.weights[:, None] * v, axis=0) / meas.weights.sum()
    traj = source
    T = traj.times[-1] - traj.times[0] if elapsed is None else elapsed
    return (traj.q[-1] - traj.q[0]) / T
