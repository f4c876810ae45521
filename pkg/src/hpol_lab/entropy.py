"""Separated-set and covering counts under dynamical metrics, and polynomial growth fits."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from hpol_lab.flow import batch_returns, integrate, phase_distance
from hpol_lab.torus import DomainError

EXACT_MAX_K = 20
DEFAULT_EPS = (0.2, 0.1, 0.05, 0.025)
DEFAULT_HORIZON_EXPONENTS = tuple(range(4, 13))


class SaturationWarning(UserWarning):
    """Counts reached the ensemble size, so the fit underestimates growth."""


@dataclass
class SeparatedSetReport:
    eps: float
    horizon: float
    K: int
    count: int
    method: str
    witnesses: list


def _distance_matrix(dist, K):
    if callable(dist):
        D = np.zeros((K, K))
        for i in range(K):
            for j in range(i + 1, K):
                D[i, j] = D[j, i] = dist(i, j)
        return D
    D = np.asarray(dist, dtype=float)
    if D.shape != (K, K):
        raise DomainError("distance matrix shape does not match K")
    return D


def greedy_packing(far):
    """Indices kept by the index-order greedy scan; ``far[i, j]`` means i, j are separated."""
    kept = []
    for i in range(far.shape[0]):
        if all(far[i, j] for j in kept):
            kept.append(i)
    return kept


def _neighbour_masks(adj):
    K = adj.shape[0]
    return [sum(1 << j for j in range(K) if adj[i, j] and j != i) for i in range(K)]


def max_independent_set(conflict):
    """Maximum independent set of a graph given by a boolean adjacency matrix (K <= 20)."""
    K = conflict.shape[0]
    nbr = _neighbour_masks(conflict)
    best = [0, 0]  # size, mask

    def popcount(x):
        return bin(x).count("1")

    def search(cand, chosen, size):
        if cand == 0:
            if size > best[0]:
                best[0], best[1] = size, chosen
            return
        if size + popcount(cand) <= best[0]:
            return
        v = (cand & -cand).bit_length() - 1
        # branch: take v, then skip v
        search(cand & ~nbr[v] & ~(1 << v), chosen | (1 << v), size + 1)
        search(cand & ~(1 << v), chosen, size)

    search((1 << K) - 1, 0, 0)
    return [i for i in range(K) if best[1] >> i & 1]


def min_cover(covers):
    """Minimum number of sets (bitmask ``covers[i]``) whose union is everything."""
    K = len(covers)
    full = (1 << K) - 1
    best = [K + 1, []]

    def search(covered, chosen):
        if covered == full:
            if len(chosen) < best[0]:
                best[0], best[1] = len(chosen), list(chosen)
            return
        if len(chosen) + 1 >= best[0]:
            return
        u = (~covered & full)
        u = (u & -u).bit_length() - 1
        for i in range(K):
            if covers[i] >> u & 1:
                chosen.append(i)
                search(covered | covers[i], chosen)
                chosen.pop()

    search(0, [])
    return best[1]


def separated_count(dist, K, eps, method="greedy", horizon=None):
    """Size of an eps-separated subset of K candidates.

    ``dist`` is a symmetric K x K matrix or a callable (i, j) -> distance.
    ``greedy`` keeps candidates in index order (a maximal separated set);
    ``exact`` solves the maximum independent set of the conflict graph
    {d < eps} by branch and bound.
    """
    if K < 1:
        raise DomainError("need at least one candidate")
    D = _distance_matrix(dist, K)
    far = D >= eps
    if method == "greedy":
        wit = greedy_packing(far)
    elif method == "exact":
        if K > EXACT_MAX_K:
            raise DomainError(f"exact packing limited to K <= {EXACT_MAX_K}")
        conflict = ~far
        np.fill_diagonal(conflict, False)
        wit = max_independent_set(conflict)
    else:
        raise DomainError(f"unknown method {method!r}")
    for a in range(len(wit)):
        for b in range(a + 1, len(wit)):
            assert D[wit[a], wit[b]] >= eps, "separation verification failed"
    return SeparatedSetReport(float(eps), horizon, K, len(wit), method, wit)


def covering_count(dist, K, eps, method=None):
    """Fewest open eps-balls centred at candidates covering all K candidates."""
    D = _distance_matrix(dist, K)
    inside = D < eps
    np.fill_diagonal(inside, True)
    if method is None:
        method = "exact" if K <= EXACT_MAX_K else "greedy"
    if method == "exact":
        if K > EXACT_MAX_K:
            raise DomainError(f"exact covering limited to K <= {EXACT_MAX_K}")
        covers = [sum(1 << j for j in range(K) if inside[i, j]) for i in range(K)]
        return len(min_cover(covers))
    uncovered = np.ones(K, bool)
    n = 0
    while uncovered.any():
        gain = (inside & uncovered[None, :]).sum(axis=1)
        i = int(np.argmax(gain))
        uncovered &= ~inside[i]
        n += 1
    return n


# ---------------------------------------------------------------------------
# separation profiles of sampled orbits


def first_separation(X, dist_fn, eps_ladder, pair_chunk=8192, time_chunk=128):
    """First sample index at which each pair's distance reaches each eps.

    ``X`` has shape (S, K, D) (S samples of K orbits).  Returns an integer
    array (n_eps, K, K) whose entry is S when the pair never separates.
    Since the dynamical distance is a running maximum, a pair is
    (n, eps)-separated iff its entry is < n.
    """
    S, K = X.shape[0], X.shape[1]
    eps = np.asarray(eps_ladder, dtype=float)
    I, J = np.triu_indices(K, 1)
    out = np.full((len(eps), len(I)), S, dtype=np.int64)
    eps_max = float(np.max(eps))
    for c0 in range(0, len(I), pair_chunk):
        idx = np.arange(c0, min(c0 + pair_chunk, len(I)))
        active = idx
        running = np.zeros(len(I))
        for t0 in range(0, S, time_chunk):
            if active.size == 0:
                break
            t1 = min(S, t0 + time_chunk)
            block = X[t0:t1]
            d = dist_fn(block[:, I[active]], block[:, J[active]])  # (T, n_active)
            run = np.maximum.accumulate(np.maximum(d, running[active][None, :]), axis=0)
            for e_i, e in enumerate(eps):
                undecided = out[e_i, active] == S
                if not undecided.any():
                    continue
                reached = run[:, undecided] >= e
                anyr = reached.any(axis=0)
                first = np.argmax(reached, axis=0) + t0
                sel = active[undecided][anyr]
                out[e_i, sel] = first[anyr]
            running[active] = run[-1]
            active = active[running[active] < eps_max]
    full = np.full((len(eps), K, K), S, dtype=np.int64)
    full[:, I, J] = out
    full[:, J, I] = out
    for e_i in range(len(eps)):
        np.fill_diagonal(full[e_i], S)
    return full


def counts_from_profile(first, horizons_idx, method="greedy"):
    """Separated counts for every (eps, horizon index); returns (counts, witnesses)."""
    n_eps, K, _ = first.shape
    counts = np.zeros((n_eps, len(horizons_idx)), dtype=int)
    wit = {}
    for e in range(n_eps):
        for h, n in enumerate(horizons_idx):
            far = first[e] <= n
            if method == "exact":
                conflict = ~far
                np.fill_diagonal(conflict, False)
                kept = max_independent_set(conflict)
            else:
                kept = greedy_packing(far)
            counts[e, h] = len(kept)
            wit[(e, h)] = kept
    return counts, wit


@dataclass
class SlopeFit:
    eps: list
    horizons: list
    counts: np.ndarray
    points: dict
    slopes: dict
    spread: dict
    saturated: dict
    K: int
    warnings: list = field(default_factory=list)

    @property
    def hpol_proxy(self):
        """Largest slope among eps values that fit unsaturated on >= 4 horizons."""
        stable = [self.slopes[e] for e in self.eps
                  if self.slopes[e] is not None and not self.saturated[e]]
        return max(stable) if stable else None

    def summary(self):
        return {
            "eps": self.eps,
            "horizons": self.horizons,
            "K": self.K,
            "slopes": {repr(e): self.slopes[e] for e in self.eps},
            "spread": {repr(e): self.spread[e] for e in self.eps},
            "saturated": {repr(e): self.saturated[e] for e in self.eps},
            "hpol_proxy": self.hpol_proxy,
            "warnings": self.warnings,
        }


def fit_slopes(counts, eps_ladder, horizons, K, top_half=True):
    """Least-squares slope of log count against log horizon for each eps.

    Only the upper half of the horizon ladder enters the fit.  The spread
    diagnostic is the range of the consecutive log-log slopes in that window.
    """
    horizons = [float(h) for h in horizons]
    n = len(horizons)
    start = n // 2 if top_half else 0
    sl = slice(start, n)
    points, slopes, spread, sat = {}, {}, {}, {}
    msgs = []
    for e_i, e in enumerate(eps_ladder):
        x = np.log(horizons)
        y = np.log(np.maximum(counts[e_i], 1))
        points[e] = list(zip(x.tolist(), y.tolist()))
        xs, ys = x[sl], y[sl]
        if len(xs) >= 4:
            slopes[e] = float(np.polyfit(xs, ys, 1)[0])
        else:
            slopes[e] = None
        local = np.diff(ys) / np.diff(xs) if len(xs) >= 2 else np.zeros(0)
        spread[e] = float(local.max() - local.min()) if local.size else 0.0
        sat[e] = bool(np.any(counts[e_i][sl] >= K))
        if sat[e]:
            msgs.append(f"eps={e}: counts saturate at K={K}")
    fit = SlopeFit(list(eps_ladder), horizons, np.asarray(counts), points, slopes, spread, sat, K, msgs)
    if all(sat.values()):
        warnings.warn("ensemble too small: every eps saturates", SaturationWarning)
    return fit


def hpol_from_orbits(X, dist_fn, eps_ladder, horizon_idx, horizon_values=None, method="greedy"):
    """Counts and slope fit for sampled orbits ``X`` of shape (S, K, D)."""
    first = first_separation(X, dist_fn, eps_ladder)
    # a horizon index n covers samples 0..n
    counts, wit = counts_from_profile(first, horizon_idx, method)
    hv = horizon_values if horizon_values is not None else horizon_idx
    fit = fit_slopes(counts, list(eps_ladder), list(hv), X.shape[1])
    fit.witnesses = wit
    return fit


def phase_dist_fn(A, B):
    return phase_distance(A[..., :2], A[..., 2:], B[..., :2], B[..., 2:])


# ---------------------------------------------------------------------------
# flows


@dataclass
class FlowSystem:
    """Model, energy and a sampling scheme ``sampler(K, rng) -> (q, p)`` on the shell."""

    model: object
    energy: float
    sampler: Callable
    dt: float = 1e-2
    dt_sample: float = 0.1
    T_unit: float = 1.0


def hpol_estimate(system, eps_ladder=DEFAULT_EPS, horizon_exponents=DEFAULT_HORIZON_EXPONENTS,
                  K=400, seed=0):
    """Separated counts of a K-point ensemble at horizons 2^k T_unit and their log-log slopes."""
    rng = np.random.default_rng(seed)
    q, p = system.sampler(K, rng)
    horizons = [2.0**k * system.T_unit for k in horizon_exponents]
    traj = integrate(system.model, (q, p), horizons[-1], system.dt, dt_sample=system.dt_sample)
    X = np.concatenate([traj.q, traj.p], axis=-1)
    idx = [min(int(round(h / traj.dt_sample)), len(traj.times) - 1) for h in horizons]
    fit = hpol_from_orbits(X, phase_dist_fn, eps_ladder, idx, horizons)
    fit.initial = (q, p)
    return fit


def frozen_orbits(q, p, n_samples):
    """Orbits of the frozen test system (every point is fixed)."""
    X = np.concatenate([np.asarray(q, float), np.asarray(p, float)], axis=-1)
    return np.broadcast_to(X, (n_samples,) + X.shape).copy()


# ---------------------------------------------------------------------------
# maps


def map_orbits(f, x0, n):
    """Array (n, K, ...) of the first n iterates of the map f from x0 (iterate 0 included)."""
    x = np.asarray(x0, dtype=float)
    out = [x]
    for _ in range(n - 1):
        x = f(x)
        out.append(x)
    return np.stack(out)


def circle_distance(a, b):
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), 1.0))
    d = np.minimum(d, 1.0 - d)
    return d[..., 0] if d.ndim and d.shape[-1:] == (1,) else d


def dynamical_matrix(orbits, dist_fn, n, step=1):
    """K x K matrix of max_{k < n} d(f^{k step} x, f^{k step} y)."""
    sel = orbits[: (n - 1) * step + 1 : step]
    K = orbits.shape[1]
    D = np.zeros((K, K))
    for i in range(K):
        D[i] = np.max(dist_fn(sel[:, i : i + 1], sel), axis=0)
    return D


def property_iterate_check(f, sample, m, n, eps, dist_fn=circle_distance):
    """Exact check of S_n^{f^m}(eps) <= S_{m(n-1)+1}^f(eps) on a sample of <= 20 points.

    Returns (holds, lhs, rhs).
    """
    sample = np.asarray(sample, dtype=float)
    K = sample.shape[0]
    if K > EXACT_MAX_K:
        raise DomainError(f"exact counts need at most {EXACT_MAX_K} points")
    long_n = m * (n - 1) + 1
    orbits = map_orbits(f, sample, long_n)
    lhs = separated_count(dynamical_matrix(orbits, dist_fn, n, step=m), K, eps, "exact").count
    rhs = separated_count(dynamical_matrix(orbits, dist_fn, long_n, step=1), K, eps, "exact").count
    return lhs <= rhs, lhs, rhs


# ---------------------------------------------------------------------------
# flow versus return map


def section_state_distance(section):
    """Distance on Sigma*: max(d_Sigma, d_T2, |p - p'|) on arrays (..., 5) = (q, p, s)."""

    def dist(A, B):
        ds = np.abs(A[..., 4] - B[..., 4])
        ds = np.minimum(ds, 1.0 - ds)
        return np.maximum(ds, phase_distance(A[..., :2], A[..., 2:4], B[..., :2], B[..., 2:4]))

    return dist


@dataclass
class PoincareProbe:
    map_fit: SlopeFit
    flow_fit: SlopeFit
    T_return: float
    violation: bool
    margin: float = 0.3

    def summary(self):
        return {
            "map_slope": self.map_fit.hpol_proxy,
            "flow_slope": self.flow_fit.hpol_proxy,
            "T_return": self.T_return,
            "violation": self.violation,
        }


def poincare_inequality_probe(model, section, q, p, horizon_exponents, eps_ladder=DEFAULT_EPS,
                              dt=1e-2, margin=0.3):
    """Slopes of the return map (horizon n) and of the flow (horizon n T) on one ensemble.

    ``T`` is the largest first-return time over the ensemble.  Raises the
    flow module's NoReturnError / TransversalityError when the return map
    is undefined for some member.
    """
    ns = [2**k for k in horizon_exponents]
    n_max = ns[-1]
    Q, P, T = batch_returns(model, section, q, p, n_max, dt=dt)
    T_ret = float(np.max(np.diff(T, axis=1)))
    s = np.stack([section.parameter(Q[:, k]) for k in range(n_max + 1)], axis=0)
    Xm = np.concatenate([np.transpose(Q, (1, 0, 2)), np.transpose(P, (1, 0, 2)), s[..., None]], axis=-1)
    map_fit = hpol_from_orbits(Xm, section_state_distance(section), eps_ladder, [n - 1 for n in ns],
                               ns)
    horizons = [n * T_ret for n in ns]
    dt_sample = min(0.1, T_ret / 4)
    traj = integrate(model, (np.asarray(q, float), np.asarray(p, float)), horizons[-1], dt,
                     dt_sample=dt_sample)
    Xf = np.concatenate([traj.q, traj.p], axis=-1)
    idx = [min(int(round(h / traj.dt_sample)), len(traj.times) - 1) for h in horizons]
    flow_fit = hpol_from_orbits(Xf, phase_dist_fn, eps_ladder, idx, horizons)
    ms, fs = map_fit.hpol_proxy, flow_fit.hpol_proxy
    violation = ms is not None and fs is not None and ms > fs + margin
    return PoincareProbe(map_fit, flow_fit, T_ret, bool(violation), margin)
