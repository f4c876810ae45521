"""Aubry and Mather set proxies read off subsolutions and optimal measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hpol_lab.torus import torus_distance
from hpol_lab.weak_kam.alpha import alpha_lower, alpha_result
from hpol_lab.weak_kam.grid import grid_points

AUBRY_TOL = 1e-4


@dataclass
class AubryEstimate:
    c: np.ndarray
    mask: np.ndarray  # (N, N) bool, axis 0 is q1
    q: np.ndarray
    p: np.ndarray
    tol: float

    @property
    def N(self):
        return self.mask.shape[0]

    @property
    def coverage(self):
        return float(self.mask.mean())

    def is_full(self):
        """Coverage proxy for M(c) = T: at most two grid rows missing."""
        return self.coverage >= 1.0 - 2.0 / self.N

    def lipschitz_bound(self):
        """Max |dw(q) - dw(q')| / |q - q'| over adjacent Aubry nodes."""
        P = np.full(self.mask.shape + (2,), np.nan)
        idx = np.nonzero(self.mask)
        P[idx] = self.p
        best = 0.0
        for axis in (0, 1):
            nb = np.roll(P, -1, axis=axis)
            both = self.mask & np.roll(self.mask, -1, axis=axis)
            if both.any():
                jump = np.linalg.norm(nb[both] - P[both], axis=-1) * self.N
                best = max(best, float(jump.max()))
        return best


def aubry_estimate(model, c, result=None, tol=AUBRY_TOL, N=64):
    """Grid nodes where H(q, c + dw(q)) is within ``tol`` of alpha(c), lifted by c + dw."""
    if result is None:
        result = alpha_result(model, c, N)
    mask = result.residual >= -tol
    Q = grid_points(result.w.N)
    lift = np.asarray(c, float) + result.w.du
    return AubryEstimate(np.asarray(c, float), mask, Q[mask], lift[mask], tol)


def coverage(model, c, result=None, tol=AUBRY_TOL):
    return aubry_estimate(model, c, result, tol).coverage


def mather_proxy(measure, threshold=1e-6):
    """Base points of the support of an optimal occupation measure."""
    q, _, _ = measure.support(threshold)
    return np.unique(np.round(q, 12), axis=0)


def hausdorff_excess(A, B):
    """sup over a in A of the torus distance to B (one-sided)."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if len(A) == 0:
        return 0.0
    if len(B) == 0:
        return np.inf
    best = np.full(len(A), np.inf)
    for start in range(0, len(B), 512):
        d = torus_distance(A[:, None, :], B[None, start:start + 512, :])
        best = np.minimum(best, d.min(axis=1))
    return float(best.max())


def hausdorff(A, B):
    return max(hausdorff_excess(A, B), hausdorff_excess(B, A))


def semicontinuity_probe(model, cs, c_limit, tol=AUBRY_TOL, N=64):
    """One-sided excess of A(c_k) over A(c_limit), for each c_k in ``cs``."""
    limit = aubry_estimate(model, c_limit, tol=tol, N=N)
    excess = [hausdorff_excess(aubry_estimate(model, c, tol=tol, N=N).q, limit.q) for c in cs]
    return {"c_limit": [float(x) for x in c_limit], "excess": excess, "tol": tol, "N": N}


def face_constancy_probe(model, cs, N=32, M_p=64, threshold=1e-6):
    """Mather proxies at points of one face and their pairwise Hausdorff distances.

    Passes when every pair is within 2/N.
    """
    supports = []
    for c in cs:
        res = alpha_result(model, c, N)
        _, meas = alpha_lower(model, c, N, M_p, upper=res)
        supports.append(mather_proxy(meas, threshold))
    dists = [hausdorff(supports[i], supports[j])
             for i in range(len(cs)) for j in range(i + 1, len(cs))]
    return {"distances": dists, "bound": 2.0 / N, "holds": all(d <= 2.0 / N + 1e-12 for d in dists)}
