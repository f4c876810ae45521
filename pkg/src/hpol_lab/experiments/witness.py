"""Separated witness sets on a case-3 face of the pinched model.

Periodic orbits of the classes k[rho] + [Sigma], k = m..2m-1, cut the
section in orbits of the return map with minimal periods m..2m-1; their
union is a set of more than m^2 points that stays separated over 4m
returns, which is how the lower bound 2 on the entropy is realised at a
finite scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hpol_lab.clairaut import circle_for_ratio
from hpol_lab.flow import batch_returns, phase_distance
from hpol_lab.torus import DomainError, crossing_period, section_cocycle, witness_period
from hpol_lab.weak_kam.alpha import AlphaResult, alpha_lower, alpha_result
from hpol_lab.weak_kam.aubry import mather_proxy
from hpol_lab.weak_kam.grid import grid_points
from hpol_lab.weak_kam.levels import classify_case, level_curve
from hpol_lab.weak_kam.section import construct_section

EPS_LADDER = tuple(2.0**-j for j in range(1, 13))


class PreconditionError(DomainError):
    pass


@dataclass
class FaceData:
    """The (1, 0) face of alpha^{-1}(e), its section and the constants tau, J."""

    e: float
    A: float
    rho: tuple
    c_minus: np.ndarray
    c_plus: np.ndarray
    c_plus_exact: np.ndarray
    section: object
    sigma_homology: tuple
    tau: int
    J: tuple
    mather_q2: np.ndarray
    face_samples: int
    alpha_c_plus: float
    curve: object = None


@dataclass
class WitnessFamily:
    m: int
    ks: list
    circles: list
    seeds: list
    orbits: list  # lifted section parameters, length tau*(k + n - 1) per k
    eps0: float
    tau: int
    horizon: int
    points: np.ndarray  # (count, 4) states (q1, q2, p1, p2) of the union
    labels: list  # (k, j): point j of the orbit of x_k
    distances: np.ndarray = None
    failures: list = field(default_factory=list)
    closure: dict = field(default_factory=dict)

    @property
    def count(self):
        return len(self.points)

    @property
    def separated(self):
        return not self.failures

    def summary(self):
        return {
            "m": self.m,
            "ks": self.ks,
            "count": self.count,
            "m_squared": self.m * self.m,
            "horizon": self.horizon,
            "eps0": self.eps0,
            "tau": self.tau,
            "separated": self.separated,
            "n_failures": len(self.failures),
            "min_pair_distance": float(np.min(self.distances[np.triu_indices(self.count, 1)]))
            if self.count > 1 else None,
            "closure_error": self.closure,
            "kappa": {str(k): c.kappa for k, c in zip(self.ks, self.circles)},
            "c_k": {str(k): [float(x) for x in c.cohomology()] for k, c in zip(self.ks, self.circles)},
        }


def _circle_gaps(values):
    """Complementary arcs of a finite set on R/Z as (start, length), widest first."""
    v = np.sort(np.mod(values, 1.0))
    gaps = np.diff(np.concatenate([v, v[:1] + 1.0]))
    order = np.argsort(-gaps)
    return [(float(v[i]), float(gaps[i])) for i in order]


def analyse_face(model, e, n_samples=64, N=32, N_lp=32, M_p=64, workers=1):
    """Locate the (1, 0) face, build Sigma from the subsolution at c+, and fix tau and J."""
    if model.family != "pinched" or model.params["A"] <= 0:
        raise PreconditionError("the face witness needs the pinched model with A > 0")
    curve = level_curve(model, e, n_samples, N, workers=workers)
    i = curve.nearest_index((1.0, 0.0))
    try:
        case = classify_case(model, e, curve, i)
    except Exception as exc:
        raise PreconditionError(f"classification failed at direction (1, 0): {exc}") from exc
    if case != 3 or curve.rational[i] != (1, 0):
        raise PreconditionError(f"no case-3 face at direction (1, 0) (case {case})")
    c_minus, c_plus = curve.face_interval(i)
    run = curve.run_of(i)
    face_samples = (run[1] - run[0]) % len(curve) + 1

    # the face endpoint in closed form: the limit of the circles p1 -> sqrt(2e)
    A = model.params["A"]
    a = np.sqrt(4 * A * e)
    c_plus_exact = np.array([np.sqrt(2 * e), 2 * a / np.pi])

    rho = (1, 0)
    res = alpha_result(model, c_plus_exact, N)
    r = np.array(rho, float)
    c0 = c_plus_exact - r
    # u0 = w is a subsolution at c0 strictly below e (checked on the grid)
    h0 = float(np.max(model.H(grid_points(N), c0 + res.w.du)))
    if h0 >= e:
        raise PreconditionError("w is not a strict subsolution at c0; refine the grid")
    res0 = AlphaResult(c0, h0, res.w, model.H(grid_points(N), c0 + res.w.du) - h0)
    section = construct_section(model, c_plus_exact, c0, res, res0, rho=r, N=N)
    sig = tuple(int(x) for x in np.round(section.homology))
    tau = crossing_period(rho, sig)

    _, meas = alpha_lower(model, c_plus_exact, N_lp, M_p, upper=res if N_lp == N else None)
    support = mather_proxy(meas)
    th = section.meta["theta"]
    near = np.abs(((support[:, 0] - th) + 0.5) % 1.0 - 0.5) <= 1.0 / N_lp + 1e-12
    mq2 = np.unique(np.round(support[near, 1] if near.any() else support[:, 1], 12))
    start, length = _circle_gaps(mq2)[0]
    J = (start + length / 3.0, start + 2.0 * length / 3.0)
    return FaceData(e, A, rho, c_minus, c_plus, c_plus_exact, section, sig, tau, J, mq2,
                    face_samples, res.upper, curve)


def _dist_to_arc(s, arc):
    """Distance on R/Z from s to the arc [lo, hi] (lo < hi)."""
    lo, hi = arc
    x = np.mod(np.asarray(s) - lo, 1.0)
    inside = x <= hi - lo
    d = np.minimum(x - (hi - lo), 1.0 - x)
    return np.where(inside, 0.0, d)


def _states(circle, theta, s):
    q, p = circle.states(theta, s)
    return np.concatenate([q, p], axis=-1)


def calibrate_eps0(circles, J, theta, n=256, ladder=EPS_LADDER):
    """Largest eps with d(q, psi^{+-1} q) >= 2 eps for sampled Aubry points within eps of J."""
    s = (np.arange(n) + 0.5) / n
    near = []
    for C in circles:
        fwd = np.array([C.return_map(x) for x in s])
        bwd = np.array([C.G_inverse(C.G(x) - 1.0 / C.P) for x in s])
        X, F, B = _states(C, theta, s), _states(C, theta, fwd), _states(C, theta, bwd)
        d = np.minimum(phase_distance(X[:, :2], X[:, 2:], F[:, :2], F[:, 2:]),
                       phase_distance(X[:, :2], X[:, 2:], B[:, :2], B[:, 2:]))
        near.append((_dist_to_arc(s, J), d))
    for eps in ladder:
        if all(np.all(d[dj <= eps] >= 2 * eps) for dj, d in near):
            return eps
    raise PreconditionError("no eps0 on the ladder satisfies the separation inequality")


def build_witness(face, m, theta=None, eps0=None):
    """Union of the psi^tau-orbits of the seeds x_k, k = m..2m-1, with pairwise checks."""
    if m < 1:
        raise DomainError("m must be >= 1")
    theta = face.section.meta["theta"] if theta is None else theta
    ks = list(range(m, 2 * m)) if m > 1 else [1]
    tau = face.tau
    n = 4 * m
    circles = [circle_for_ratio(face.A, face.e, k) for k in ks]
    if eps0 is None:
        # fixed points of psi^tau (k = 1) cannot satisfy d(q, psi q) >= 2 eps
        moving = [C for k, C in zip(ks, circles) if k > 1]
        eps0 = calibrate_eps0(moving, face.J, theta) if moving else EPS_LADDER[0]
    seed_s = 0.5 * (face.J[0] + face.J[1])
    orbits, pts, labels, closure = [], [], [], {}
    for k, C in zip(ks, circles):
        period = witness_period(face.rho, face.sigma_homology, k)
        long = C.orbit(seed_s, tau * (period + n - 1) + 1)
        orbits.append(long)
        turn = long[tau * period] - long[0]  # whole turns of q2 after one period
        closure[str(k)] = float(abs(turn - np.round(turn)))
        for j in range(period):
            labels.append((k, j))
        pts.append(_states(C, theta, long[: tau * period : tau]))
    pts = np.concatenate(pts)

    # dynamical distance over n iterates of psi^tau, from the stored long orbits
    traj = []
    for (k, j) in labels:
        C = circles[ks.index(k)]
        long = orbits[ks.index(k)]
        idx = tau * j + tau * np.arange(n)
        traj.append(_states(C, theta, long[idx]))
    traj = np.stack(traj)  # (count, n, 4)
    cnt = len(labels)
    D = np.zeros((cnt, cnt))
    for i in range(cnt):
        d = phase_distance(traj[i, None, :, :2], traj[i, None, :, 2:], traj[:, :, :2], traj[:, :, 2:])
        D[i] = d.max(axis=1)
    failures = [(labels[i], labels[j], float(D[i, j]))
                for i in range(cnt) for j in range(i + 1, cnt) if D[i, j] < eps0]
    return WitnessFamily(m, ks, circles, [seed_s] * len(ks), orbits, eps0, tau, n, pts, labels,
                         D, failures, closure)


def engine_crosscheck(model, face, k, theta=None, dt=1e-3):
    """Max deviation between quadrature returns and integrated returns for class (k, 1)."""
    theta = face.section.meta["theta"] if theta is None else theta
    C = circle_for_ratio(face.A, face.e, k)
    seed = 0.5 * (face.J[0] + face.J[1])
    q, p = C.states(theta, [seed])
    Q, P, _ = batch_returns(model, face.section, q, p, k, dt=dt)
    X = _states(C, theta, C.orbit(seed, k + 1))
    return float(np.max(phase_distance(Q[0], P[0], X[:, :2], X[:, 2:])))


def witness_slope(families):
    counts = np.array([f.count for f in families], float)
    horizons = np.array([f.horizon * f.tau for f in families], float)
    return float(np.polyfit(np.log(horizons), np.log(counts), 1)[0])
