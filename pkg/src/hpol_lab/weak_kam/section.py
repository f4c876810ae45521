"""Sections built as level sets of Theta = l(c - c0).q + l(w - u0) mod 1."""

from __future__ import annotations

from fractions import Fraction
from math import lcm

import numpy as np

from hpol_lab.flow import SectionCurve
from hpol_lab.torus import DomainError, NumericError, section_cocycle
from hpol_lab.weak_kam.alpha import alpha_result
from hpol_lab.weak_kam.aubry import AUBRY_TOL, aubry_estimate
from hpol_lab.weak_kam.grid import GridField, centred_diff

Q_CAP = 32


class SectionConstructionError(NumericError):
    """No level-set component crosses the rotation direction positively."""


class RegularityError(NumericError):
    """The Aubry flow is not transverse to the traced section."""


def integer_scaling(r, Q=Q_CAP, tol=1e-9):
    """(l, k): least common denominator l of ``r`` and the integer vector k = l r."""
    fr = [Fraction(float(x)).limit_denominator(Q) for x in r]
    if any(abs(float(f) - x) > tol for f, x in zip(fr, r)):
        raise DomainError(f"c - c0 = {tuple(r)} is not rational with denominators <= {Q}")
    l = lcm(*(f.denominator for f in fr))
    return l, np.array([int(f * l) for f in fr])


class ThetaMap:
    """The lifted function F(q) = k.q + l D(q), D = w - u0 interpolated periodically."""

    def __init__(self, k, l, D):
        self.k = np.asarray(k, float)
        self.l = l
        self.D = GridField(D)
        self.dD = centred_diff(self.D.values)
        self.N = self.D.N

    def lifted(self, q):
        q = np.asarray(q, float)
        return q @ self.k + self.l * self.D.interpolate(q)

    def grad(self, q):
        q = np.asarray(q, float)
        g = np.stack([GridField(self.dD[..., a]).interpolate(q) for a in (0, 1)], axis=-1)
        return self.k + self.l * g

    def node_values(self):
        N = self.N
        i = np.arange(N)[:, None] / N
        j = np.arange(N)[None, :] / N
        return self.k[0] * i + self.k[1] * j + self.l * self.D.values


def trace_level_set(F, k, theta):
    """Components of {F = theta mod 1} by periodic marching squares.

    ``F`` holds lifted node values on the N x N grid (F(i + N, j) = F(i, j)
    + k1, likewise in j).  Returns a list of (points (n, 2) unwrapped,
    homology (2,) integer) per closed component.
    """
    N = F.shape[0]

    def val(I, J):
        return F[I % N, J % N] + k[0] * (I // N) + k[1] * (J // N)

    # one crossing per edge: ('h', i, j) joins nodes (i, j)-(i+1, j), ('v', i, j) joins (i, j)-(i, j+1)
    def crossing(a, b):
        lo, hi = min(a, b), max(a, b)
        L = theta + np.ceil(lo - theta)
        if L == lo:
            L += 1e-12
        return (L - a) / (b - a) if lo < L < hi else None

    point = {}
    for i in range(N):
        for j in range(N):
            a = val(i, j)
            t = crossing(a, val(i + 1, j))
            if t is not None:
                point[("h", i, j)] = np.array([(i + t) / N, j / N])
            t = crossing(a, val(i, j + 1))
            if t is not None:
                point[("v", i, j)] = np.array([i / N, (j + t) / N])

    links = {}
    for i in range(N):
        for j in range(N):
            edges = [e for e in (("h", i, j), ("v", (i + 1) % N, j), ("h", i, (j + 1) % N),
                                 ("v", i, j)) if e in point]
            if len(edges) == 2:
                pairs = [tuple(edges)]
            elif len(edges) == 4:
                # saddle: decide by the cell-centre value relative to the corner (i, j)
                centre = 0.25 * (val(i, j) + val(i + 1, j) + val(i, j + 1) + val(i + 1, j + 1))
                base = val(i, j)
                same = np.floor(centre - theta) == np.floor(base - theta)
                b, r, t, lft = edges
                pairs = [(b, r), (t, lft)] if same else [(b, lft), (r, t)]
            else:
                pairs = []
            for e1, e2 in pairs:
                links.setdefault(e1, []).append(e2)
                links.setdefault(e2, []).append(e1)

    seen, comps = set(), []
    for start in links:
        if start in seen:
            continue
        pts, prev, cur = [point[start]], None, start
        seen.add(start)
        while True:
            nxt = [e for e in links[cur] if e != prev] or links[cur]
            prev, cur = cur, nxt[0]
            if cur == start:
                break
            if cur in seen:
                break  # open chain (should not happen on a periodic grid)
            seen.add(cur)
            p = point[cur]
            p = p + np.round(pts[-1] - p)
            pts.append(p)
        closing = point[start] + np.round(pts[-1] - point[start])
        h = np.round(closing - pts[0]).astype(int)
        comps.append((np.array(pts), h))
    return comps


def _orient(pts, h, theta_map):
    seg = np.diff(np.vstack([pts, pts[:1] + h]), axis=0)
    mid = pts + 0.5 * seg
    g = theta_map.grad(mid)
    right = np.stack([seg[:, 1], -seg[:, 0]], axis=1)
    if np.sum(g * right) < 0:
        return pts[::-1].copy(), -h
    return pts, h


def rotation_direction(model, c, result, tol=AUBRY_TOL):
    """Average of dH/dp over the lifted Aubry points: a proxy for rho(c)."""
    au = aubry_estimate(model, c, result, tol)
    return np.mean(model.dH_dp(au.q, au.p), axis=0)


def construct_section(model, c, c0, result=None, result0=None, rho=None, N=64, Q=Q_CAP,
                      n_theta=16, tol=AUBRY_TOL):
    """Trace a section from the subsolutions at c and c0.

    Among ``n_theta`` regular values theta, the one maximising the minimal
    |dTheta| along the selected component is used.  The component must have
    sigma . rho(c) > 0 and the Aubry flow F(q) = dH/dp(q, c + dw(q)) must
    cross it positively at every Aubry grid point.
    """
    c = np.asarray(c, float)
    c0 = np.asarray(c0, float)
    if result is None:
        result = alpha_result(model, c, N)
    if result0 is None:
        result0 = alpha_result(model, c0, result.w.N)
    if result0.upper >= result.upper:
        raise DomainError("need alpha(c0) < alpha(c)")
    if result0.w.N != result.w.N:
        raise DomainError("subsolutions on different grids")
    l, k = integer_scaling(c - c0, Q)
    th = ThetaMap(k, l, result.w.values - result0.w.values)
    if rho is None:
        rho = rotation_direction(model, c, result, tol)
    rho = np.asarray(rho, float)
    F = th.node_values()

    best = None
    for theta in (np.arange(n_theta) + 0.5) / n_theta:
        comps = trace_level_set(F, k, theta)
        for pts, h in comps:
            pts, h = _orient(pts, h, th)
            sigma = section_cocycle(h)
            if sigma @ rho <= 0:
                continue
            gmin = float(np.min(np.linalg.norm(th.grad(pts), axis=1)))
            if best is None or gmin > best[0]:
                best = (gmin, theta, pts, h, len(comps))
    if best is None:
        raise SectionConstructionError("no level component with sigma . rho > 0; refine the grid")
    gmin, theta, pts, h, n_comp = best

    au = aubry_estimate(model, c, result, tol)
    flow = model.dH_dp(au.q, au.p)
    dtheta = th.grad(au.q)
    cross = np.sum(dtheta * flow, axis=1)
    if np.any(cross <= 0):
        raise RegularityError(f"dTheta . F <= 0 at {int(np.sum(cross <= 0))} Aubry points")

    def level(q):
        return th.lifted(q) - theta

    sec = SectionCurve(pts, h, level, th.grad, 1, tol=2.0 / th.N,
                       meta={"kind": "theta", "theta": float(theta), "l": int(l),
                             "k": [int(x) for x in k], "min_grad": gmin,
                             "min_transversality": float(cross.min()),
                             "components": n_comp})
    return sec


def theta_section_for_face(model, c_plus, N=64, r=(1.0, 0.0), result=None):
    """Section for the endpoint c_plus of a face, with c0 = c_plus - r."""
    c_plus = np.asarray(c_plus, float)
    c0 = c_plus - np.asarray(r, float)
    return construct_section(model, c_plus, c0, result=result, N=N)


__all__ = ["construct_section", "trace_level_set", "integer_scaling", "ThetaMap",
           "SectionConstructionError", "RegularityError", "rotation_direction",
           "theta_section_for_face"]
