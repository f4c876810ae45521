"""Hamiltonian flow integration, energy shells, sections and return maps."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from hpol_lab._kernels import integrate_batch, model_code
from hpol_lab.torus import (
    DomainError,
    NumericError,
    PhaseState,
    _as_pair,
    _check_finite,
    reduce,
    section_cocycle,
    torus_distance,
)

ENERGY_DRIFT_STEP = 1e-6
T_MIN = 1e-6
TRANSVERSALITY_FLOOR = 1e-6


class StepSizeError(NumericError):
    """Energy drift in a single step exceeded the allowed bound."""


class NoReturnError(NumericError):
    """The orbit did not come back to the section before T_max."""


class TransversalityError(NumericError):
    """The flow crosses the section (almost) tangentially."""


@dataclass
class Trajectory:
    """Sampled orbit(s). ``q`` and ``p`` have shape (S, ..., 2); ``q`` is unwrapped."""

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    energy: np.ndarray
    dt_sample: float

    @property
    def initial(self):
        return PhaseState(self.q[0], self.p[0])

    @property
    def final(self):
        return PhaseState(self.q[-1], self.p[-1])

    def max_relative_drift(self):
        e0 = self.energy[0]
        scale = np.maximum(np.abs(e0), 1e-300)
        return float(np.max(np.abs(self.energy - e0) / scale))

    def to_csv(self, path):
        """Write rows (t, q1, q2, p1, p2, H); only for a single orbit."""
        if self.q.ndim != 2:
            raise DomainError("CSV export expects a single trajectory")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "q1", "q2", "p1", "p2", "H"])
            for t, q, p, h in zip(self.times, self.q, self.p, self.energy):
                w.writerow([repr(float(t)), repr(float(q[0])), repr(float(q[1])),
                            repr(float(p[0])), repr(float(p[1])), repr(float(h))])


def _rk4(model, q, p, h):
    k1q, k1p = model.vector_field(q, p)
    k2q, k2p = model.vector_field(q + 0.5 * h * k1q, p + 0.5 * h * k1p)
    k3q, k3p = model.vector_field(q + 0.5 * h * k2q, p + 0.5 * h * k2p)
    k4q, k4p = model.vector_field(q + h * k3q, p + h * k3p)
    q = q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    p = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return q, p


def project_to_energy(model, q, p, e, iters=3):
    """Move p along dH/dp until H(q, p) = e (Newton in the step length)."""
    g = model.dH_dp(q, p)
    gg = np.sum(g * g, axis=-1)
    lam = np.zeros(gg.shape)
    safe = gg > 0
    for _ in range(iters):
        pt = p + lam[..., None] * g
        r = model.H(q, pt) - e
        slope = np.sum(model.dH_dp(q, pt) * g, axis=-1)
        lam = lam - np.where(safe, r / np.where(safe, slope, 1.0), 0.0)
    return p + lam[..., None] * g


def step(model, q, p, h, e0=None, project=True):
    """One RK4 step followed by projection back onto the initial energy level."""
    q1, p1 = _rk4(model, q, p, h)
    if project:
        if e0 is None:
            e0 = model.H(q, p)
        H1 = model.H(q1, p1)
        drift = np.abs(H1 - e0) / np.maximum(np.abs(e0), 1e-12)
        if np.any(drift > ENERGY_DRIFT_STEP):
            raise StepSizeError(
                f"energy drift {float(np.max(drift)):.3e} in one step; use a smaller dt than {h}")
        p1 = project_to_energy(model, q1, p1, e0)
    return q1, p1


def integrate(model, state, t_final, dt, dt_sample=None, project=True):
    """Integrate the flow of ``model`` from ``state`` for time ``t_final``.

    ``state`` may hold a batch of states (leading axes).  A negative
    ``t_final`` integrates backwards.  Samples are taken every ``dt_sample``
    (rounded to a multiple of the step).
    """
    if isinstance(state, PhaseState):
        q, p = state.q, state.p
    else:
        q, p = (_as_pair(x) for x in state)
    _check_finite(q, p)
    if dt <= 0:
        raise DomainError("dt must be positive")
    direction = 1.0 if t_final >= 0 else -1.0
    span = abs(float(t_final))
    n_steps = int(np.ceil(span / dt - 1e-9)) if span > 0 else 0
    h = span / n_steps if n_steps else dt
    stride = 1 if dt_sample is None else max(1, int(round(dt_sample / h)))
    q = np.array(q, dtype=float)
    p = np.array(p, dtype=float)
    q, p = np.broadcast_arrays(q, p)
    q, p = q.copy(), p.copy()
    e0 = model.H(q, p)

    coded = model_code(model)
    if coded is not None:
        lead = q.shape[:-1]
        Q, P, ok = integrate_batch(coded[0], coded[1], q.reshape(-1, 2), p.reshape(-1, 2),
                                   n_steps, direction * h, stride, project, ENERGY_DRIFT_STEP)
        if not ok:
            raise StepSizeError(f"energy drift above {ENERGY_DRIFT_STEP} in one step; "
                                f"use a smaller dt than {h}")
        Q = Q.reshape((-1,) + lead + (2,))
        P = P.reshape((-1,) + lead + (2,))
        k = Q.shape[0]
        times = direction * h * stride * np.arange(k)
        return Trajectory(times, Q, P, model.H(Q, P), h * stride)

    n_samples = n_steps // stride + 1
    Q = np.empty((n_samples,) + q.shape)
    P = np.empty((n_samples,) + p.shape)
    Q[0], P[0] = q, p
    k = 1
    for i in range(1, n_steps + 1):
        q, p = step(model, q, p, direction * h, e0, project)
        if i % stride == 0:
            Q[k], P[k] = q, p
            k += 1
    Q, P = Q[:k], P[:k]
    times = direction * h * stride * np.arange(k)
    return Trajectory(times, Q, P, model.H(Q, P), h * stride)


def restrict_to_energy(model, state, e, tol=1e-12):
    """Rescale p radially so that H(q, p) = e."""
    if isinstance(state, PhaseState):
        q, p = state.q, state.p
    else:
        q, p = (_as_pair(x) for x in state)
    _check_finite(q, p)
    q, p = np.broadcast_arrays(np.asarray(q, float), np.asarray(p, float))
    h0 = model.H(q, np.zeros_like(p))
    if np.any(e <= h0):
        raise DomainError("energy below min_q H(q, 0) at the given base point")
    if np.any(np.sum(p * p, axis=-1) == 0):
        raise DomainError("zero momentum: the ray does not meet the shell")
    if model.is_metric:
        s = np.sqrt(e / model.H(q, p))
        return PhaseState(q.copy(), p * s[..., None])
    # bracket then bisect on the ray s -> H(q, s p), increasing for s > 0 by convexity
    lo = np.zeros(q.shape[:-1])
    hi = np.ones(q.shape[:-1])
    for _ in range(200):
        above = model.H(q, p * hi[..., None]) >= e
        if np.all(above):
            break
        hi = np.where(above, hi, 2 * hi)
    else:
        raise DomainError("no intersection with the energy shell along the ray")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        up = model.H(q, p * mid[..., None]) >= e
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.all(hi - lo <= 1e-16 * np.maximum(hi, 1)):
            break
    s = 0.5 * (lo + hi)
    out = p * s[..., None]
    # final Newton polish for the 1e-12 energy match
    for _ in range(3):
        g = model.dH_dp(q, out)
        r = model.H(q, out) - e
        d = np.sum(g * out, axis=-1) / np.maximum(np.sum(out * out, axis=-1), 1e-300)
        out = out * (1 - r / np.maximum(d * np.sum(out * out, axis=-1), 1e-300))[..., None]
    if np.any(np.abs(model.H(q, out) - e) > tol * max(1.0, abs(e))):
        raise NumericError("energy restriction did not reach tolerance")
    return PhaseState(q.copy(), out)


# ---------------------------------------------------------------------------
# sections


def _wrap_half(x):
    return x - np.round(x)


@dataclass
class SectionCurve:
    """Cooriented embedded circle in T^2 given as a closed polyline.

    ``points`` are consecutive lifted vertices; the curve closes with
    ``points[0] + homology``.  ``level`` is a circle-valued function
    (defined mod 1) whose zero set contains the curve and which increases
    across it in the coorientation direction.
    """

    points: np.ndarray
    homology: np.ndarray
    level: Callable
    level_grad: Callable
    coorientation: int = 1
    tol: float = 1e-2
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.homology = np.asarray(self.homology, dtype=float)
        closed = np.vstack([self.points, self.points[:1] + self.homology])
        seg = np.diff(closed, axis=0)
        lengths = np.sqrt(np.sum(seg * seg, axis=1))
        self._closed = closed
        self._seg = seg
        self._cum = np.concatenate([[0.0], np.cumsum(lengths)])
        self.length = float(self._cum[-1])

    @property
    def sigma(self):
        """Cohomology class of the intersection cocycle."""
        return self.coorientation * section_cocycle(self.homology)

    def nearest(self, q):
        """(distance on T^2, normalised arclength parameter) of the nearest polyline point."""
        q = reduce(np.atleast_2d(q))
        a = self._closed[:-1]
        best_d = np.full(len(q), np.inf)
        best_s = np.zeros(len(q))
        seg_len2 = np.maximum(np.sum(self._seg * self._seg, axis=1), 1e-300)
        for shift in np.array([(i, j) for i in range(-2, 3) for j in range(-2, 3)], float):
            rel = q[:, None, :] - (a[None, :, :] + shift)
            t = np.clip(np.sum(rel * self._seg[None], axis=2) / seg_len2, 0.0, 1.0)
            foot = rel - t[..., None] * self._seg[None]
            d = np.sqrt(np.sum(foot * foot, axis=2))
            idx = np.argmin(d, axis=1)
            dm = d[np.arange(len(q)), idx]
            s = (self._cum[idx] + t[np.arange(len(q)), idx] * np.sqrt(seg_len2[idx])) / self.length
            upd = dm < best_d
            best_d = np.where(upd, dm, best_d)
            best_s = np.where(upd, s, best_s)
        return best_d, np.mod(best_s, 1.0)

    def parameter(self, q):
        return self.nearest(q)[1]

    def point_at(self, s):
        s = np.mod(np.asarray(s, dtype=float), 1.0) * self.length
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self._seg) - 1)
        t = (s - self._cum[idx]) / np.maximum(self._cum[idx + 1] - self._cum[idx], 1e-300)
        return reduce(self._closed[idx] + t[..., None] * self._seg[idx])

    def is_simple(self):
        """True when no two non-adjacent segments intersect (on the torus)."""
        a = self._closed[:-1]
        b = self._closed[1:]
        n = len(a)
        for shift in np.array([(i, j) for i in range(-1, 2) for j in range(-1, 2)], float):
            c, d = a + shift, b + shift
            for i in range(n):
                hit = _segments_intersect(a[i], b[i], c, d)
                same = np.zeros(n, bool)
                if shift[0] == 0 and shift[1] == 0:
                    same[[i, (i - 1) % n, (i + 1) % n]] = True
                else:
                    # the closing translate of the neighbours is adjacent as well
                    if np.allclose(shift, self.homology) or np.allclose(shift, -self.homology):
                        same[[0, n - 1]] = True
                if np.any(hit & ~same):
                    return False
        return True


def _segments_intersect(p1, p2, c, d):
    def cross(o, a, b):
        return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (b[..., 0] - o[..., 0])

    d1 = cross(c, d, p1)
    d2 = cross(c, d, p2)
    d3 = cross(p1[None], p2[None], c)
    d4 = cross(p1[None], p2[None], d)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def straight_section(normal, theta=0.0, n_points=64):
    """The circle {normal . q = theta} for a primitive integer cohomology ``normal``.

    It is oriented so that the normal points to the right of the tangent
    (for normal (1, 0): upwards, homology (0, 1)).
    """
    n = np.asarray(normal, dtype=float)
    homology = np.array([-n[1], n[0]])
    base = theta * n / np.dot(n, n)
    t = np.arange(n_points) / n_points
    pts = base + t[:, None] * homology

    def level(q):
        return np.asarray(q, float) @ n - theta

    def grad(q):
        q = np.asarray(q, float)
        return np.broadcast_to(n, q.shape).copy()

    return SectionCurve(pts, homology, level, grad, 1, tol=1e-9, meta={"kind": "straight"})


@dataclass
class ReturnMapSample:
    entry: PhaseState
    exit: PhaseState
    return_time: float


def default_T_max(model, section, state):
    q, p = state.q, state.p
    speed = float(np.min(np.linalg.norm(model.dH_dp(q, p), axis=-1)))
    return 10.0 * section.length / max(speed, 1e-12)


def _crossings(section, q_prev, q_new):
    """Mask of samples whose step crossed the section positively."""
    g0 = _wrap_half(section.level(q_prev))
    g1 = _wrap_half(section.level(q_new))
    hit = (g0 < 0) & (g1 >= 0) & (g1 - g0 < 0.5)
    return hit


def _refine(model, section, q, p, h, e0):
    """Locate the crossing time in [0, h] by bracketing + Illinois secant."""

    def g(s):
        if s == 0:
            return float(_wrap_half(section.level(q))), q, p
        qs, ps = _rk4(model, q, p, s)
        ps = project_to_energy(model, qs, ps, e0)
        return float(_wrap_half(section.level(qs))), qs, ps

    a, b = 0.0, h
    ga, _, _ = g(a)
    gb, qb, pb = g(b)
    side = 0
    s, qs, ps = b, qb, pb
    for _ in range(100):
        s = b - gb * (b - a) / (gb - ga) if gb != ga else 0.5 * (a + b)
        if not (min(a, b) < s < max(a, b)):
            s = 0.5 * (a + b)
        gs, qs, ps = g(s)
        if abs(b - a) < 1e-10 or gs == 0:
            break
        if (gs < 0) == (ga < 0):
            a, ga = s, gs
            if side == -1:
                gb *= 0.5
            side = -1
        else:
            b, gb = s, gs
            if side == 1:
                ga *= 0.5
            side = 1
    return s, qs, ps


def poincare_orbit(model, section, state, n_returns, dt=1e-2, T_max=None, t_min=T_MIN,
                   check_transversal=True):
    """Successive positive crossings of ``section`` by the orbit of one state.

    Returns a list of ``ReturnMapSample`` (the entry of each sample is the
    exit of the previous one).
    """
    if isinstance(state, PhaseState):
        q, p = np.array(state.q, float), np.array(state.p, float)
    else:
        q, p = (np.array(x, float) for x in state)
    _check_finite(q, p)
    if T_max is None:
        T_max = default_T_max(model, section, PhaseState(q, p))
    Q, P, T = batch_returns(model, section, q[None], p[None], n_returns, dt=dt, T_max=T_max,
                            t_min=t_min)
    samples = []
    for k in range(1, n_returns + 1):
        exit_ = PhaseState(Q[0, k], P[0, k])
        if check_transversal:
            _check_transversal(model, section, exit_.q, exit_.p)
        samples.append(ReturnMapSample(PhaseState(Q[0, k - 1], P[0, k - 1]), exit_,
                                       float(T[0, k] - T[0, k - 1])))
    return samples


def _check_transversal(model, section, q, p):
    grad = section.level_grad(q)
    v = model.dH_dp(q, p)
    nrm = np.linalg.norm(grad)
    comp = float(np.dot(grad, v) / max(nrm, 1e-300))
    if comp <= TRANSVERSALITY_FLOOR:
        raise TransversalityError(f"normal velocity component {comp:.3e} below floor")
    return comp


def poincare_return(model, section, state, T_max=None, dt=1e-2, t_min=T_MIN):
    """First positive crossing of ``section`` after time ``t_min``."""
    q, p = (state.q, state.p) if isinstance(state, PhaseState) else state
    d, _ = section.nearest(q)
    if d[0] > section.tol:
        raise DomainError("state does not project onto the section")
    g = section.level_grad(q)
    v = model.dH_dp(np.asarray(q, float), np.asarray(p, float))
    if abs(float(np.dot(g, v))) / max(np.linalg.norm(g), 1e-300) <= TRANSVERSALITY_FLOOR:
        raise TransversalityError("initial state is tangent to the section")
    return poincare_orbit(model, section, (q, p), 1, dt=dt, T_max=T_max, t_min=t_min)[0]


def _advance(model, q, p, n, h):
    """States after 0..n steps, shape (n + 1, K, 2)."""
    coded = model_code(model)
    if coded is not None:
        Q, P, ok = integrate_batch(coded[0], coded[1], q, p, n, h, 1, True, ENERGY_DRIFT_STEP)
        if not ok:
            raise StepSizeError(f"energy drift above {ENERGY_DRIFT_STEP} in one step; "
                                f"use a smaller dt than {h}")
        return Q, P
    e0 = model.H(q, p)
    Q = np.empty((n + 1,) + q.shape)
    P = np.empty((n + 1,) + p.shape)
    Q[0], P[0] = q, p
    for i in range(n):
        q, p = step(model, q, p, h, e0)
        Q[i + 1], P[i + 1] = q, p
    return Q, P


def batch_returns(model, section, q, p, n_returns, dt=1e-2, T_max=None, t_min=T_MIN,
                  chunk=256):
    """Return-map orbits of a batch of states.

    Returns (Q, P, T) with shapes (K, n + 1, 2), (K, n + 1, 2), (K, n + 1);
    T holds cumulative crossing times and index 0 the initial states.  A
    state that goes longer than ``T_max`` without returning raises
    ``NoReturnError`` whose ``indices`` attribute lists the offenders.
    """
    q = np.array(q, float).reshape(-1, 2)
    p = np.array(p, float).reshape(-1, 2)
    K = len(q)
    e0 = model.H(q, p)
    if T_max is None:
        speed = np.min(np.linalg.norm(model.dH_dp(q, p), axis=-1))
        T_max = 10.0 * section.length / max(float(speed), 1e-12)
    Q = np.full((K, n_returns + 1, 2), np.nan)
    P = np.full((K, n_returns + 1, 2), np.nan)
    T = np.full((K, n_returns + 1), np.nan)
    Q[:, 0], P[:, 0], T[:, 0] = q, p, 0.0
    count = np.zeros(K, int)
    last = np.zeros(K)
    t0 = 0.0
    active = np.arange(K)
    while active.size:
        QQ, PP = _advance(model, q[active], p[active], chunk, dt)
        lv = _wrap_half(section.level(QQ))
        hit = (lv[:-1] < 0) & (lv[1:] >= 0) & (lv[1:] - lv[:-1] < 0.5)
        for j, i in zip(*np.nonzero(hit.T)):
            g = active[j]
            if count[g] >= n_returns:
                continue
            s, qs, ps = _refine(model, section, QQ[i, j], PP[i, j], dt, e0[g])
            tc = t0 + i * dt + s
            if tc - last[g] <= t_min:
                continue
            d, _ = section.nearest(qs)
            if d[0] > section.tol:
                continue
            count[g] += 1
            Q[g, count[g]], P[g, count[g]], T[g, count[g]] = qs, ps, tc
            last[g] = tc
        q[active], p[active] = QQ[-1], PP[-1]
        t0 += chunk * dt
        late = (t0 - last > T_max) & (count < n_returns)
        if np.any(late):
            err = NoReturnError(f"no return to the section within T_max={T_max:.3g} "
                                f"for {int(late.sum())} state(s)")
            err.indices = np.nonzero(late)[0]
            err.partial = (Q, P, T)
            raise err
        active = np.nonzero(count < n_returns)[0]
    return Q, P, T


# ---------------------------------------------------------------------------
# distances


def phase_distance(q, p, q2, p2):
    """max(d_T2(q, q'), |p - p'|)."""
    dp = np.asarray(p, float) - np.asarray(p2, float)
    return np.maximum(torus_distance(q, q2), np.sqrt(np.sum(dp * dp, axis=-1)))


def dynamical_distance(traj_x, traj_y, horizon_T):
    """max over sampled t in [0, T] of the phase distance between two orbits."""
    if abs(traj_x.dt_sample - traj_y.dt_sample) > 1e-12 * max(traj_x.dt_sample, 1.0):
        raise DomainError("trajectories must share the sample step")
    t = traj_x.times
    span = min(abs(t[-1]), abs(traj_y.times[-1]))
    if horizon_T > span + 1e-9 * max(1.0, span):
        raise DomainError("horizon exceeds trajectory length")
    k = int(np.floor(horizon_T / traj_x.dt_sample + 1e-9)) + 1
    d = phase_distance(traj_x.q[:k], traj_x.p[:k], traj_y.q[:k], traj_y.p[:k])
    return float(np.max(d))
