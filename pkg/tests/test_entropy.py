from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpol_lab.entropy import (EXACT_MAX_K, SaturationWarning, circle_distance, covering_count,
                              dynamical_matrix, first_separation, fit_slopes, frozen_orbits,
                              hpol_from_orbits, map_orbits, phase_dist_fn,
                              property_iterate_check, separated_count)
from hpol_lab.torus import DomainError, torus_distance


def brute_packing(D, eps):
    K = len(D)
    for r in range(K, 0, -1):
        for sub in combinations(range(K), r):
            if all(D[a, b] >= eps for a, b in combinations(sub, 2)):
                return r
    return 0


def brute_cover(D, eps):
    K = len(D)
    inside = (D < eps) | np.eye(K, dtype=bool)
    for r in range(1, K + 1):
        for sub in combinations(range(K), r):
            if inside[list(sub)].any(axis=0).all():
                return r


point_sets = st.integers(2, 9).flatmap(
    lambda K: st.lists(st.tuples(st.floats(0, 1, exclude_max=True),
                                 st.floats(0, 1, exclude_max=True)), min_size=K, max_size=K))


def _dist(pts):
    pts = np.asarray(pts)
    return torus_distance(pts[:, None], pts[None, :])


@given(point_sets, st.floats(0.02, 0.5))
def test_exact_counts_match_brute_force(pts, eps):
    D = _dist(pts)
    K = len(D)
    assert separated_count(D, K, eps, "exact").count == brute_packing(D, eps)
    assert covering_count(D, K, eps, "exact") == brute_cover(D, eps)


@given(point_sets, st.floats(0.02, 0.4))
def test_sandwich(pts, eps):
    D = _dist(pts)
    K = len(D)
    s2 = separated_count(D, K, 2 * eps, "exact").count
    assert s2 <= covering_count(D, K, eps) <= separated_count(D, K, eps, "exact").count


@given(point_sets, st.floats(0.02, 0.5))
def test_greedy_is_maximal_and_below_exact(pts, eps):
    D = _dist(pts)
    K = len(D)
    rep = separated_count(D, K, eps)
    kept = rep.witnesses
    assert rep.count <= separated_count(D, K, eps, "exact").count
    # maximal: every other point is closer than eps to a kept one
    for i in set(range(K)) - set(kept):
        assert min(D[i, j] for j in kept) < eps


def test_callable_distance_and_limits():
    pts = np.linspace(0, 0.9, 10)
    rep = separated_count(lambda i, j: abs(pts[i] - pts[j]), 10, 0.25)
    assert rep.count == 4  # 0, 0.3, 0.6, 0.9
    with pytest.raises(DomainError):
        separated_count(np.zeros((EXACT_MAX_K + 1,) * 2), EXACT_MAX_K + 1, 0.1, "exact")


def rotation(omega):
    return lambda x: np.mod(x + omega, 1.0)


@given(st.floats(0, 1), st.integers(2, 4), st.integers(2, 5), st.floats(0.02, 0.3),
       st.lists(st.floats(0, 1, exclude_max=True), min_size=2, max_size=12))
def test_iterate_inequality(omega, m, n, eps, xs):
    f = lambda x: np.mod(x + omega + 0.1 * np.sin(2 * np.pi * x), 1.0)  # noqa: E731
    ok, lhs, rhs = property_iterate_check(f, np.array(xs)[:, None], m, n, eps)
    assert ok and lhs <= rhs


def test_first_separation_agrees_with_dynamical_matrix(rng):
    x0 = rng.random((12, 1))
    orbits = map_orbits(lambda x: np.mod(2 * x, 1.0), x0, 6)
    first = first_separation(orbits, circle_distance, [0.1, 0.3])
    for n in range(1, 7):
        D = dynamical_matrix(orbits, circle_distance, n)
        for e_i, eps in enumerate([0.1, 0.3]):
            assert np.array_equal(first[e_i] < n, (D >= eps) & ~np.eye(12, dtype=bool))


def test_rotation_has_zero_slope():
    x0 = np.linspace(0, 1, 40, endpoint=False)[:, None]
    X = map_orbits(rotation(0.1234), x0, 257)
    fit = hpol_from_orbits(X, circle_distance, [0.05], [2**k for k in range(9)])
    assert fit.slopes[0.05] == pytest.approx(0.0, abs=1e-12)


def test_twist_map_has_slope_one():
    # [DERIVED] (x, y) -> (x + y, y): pairs with dy separate at n ~ eps / dy,
    # so at fixed eps the count grows like n
    K = 400
    w = K * 0.2 / (2 * 4096)  # about K/2 separated at the coarsest eps
    y = np.linspace(0, w, K)
    X0 = np.stack([np.zeros(K), y], axis=1)
    n = np.arange(4097)
    X = np.stack([np.mod(X0[:, 0][None] + n[:, None] * y[None], 1.0),
                  np.broadcast_to(y, (len(n), K))], axis=-1)

    def dist(A, B):
        return np.maximum(circle_distance(A[..., 0], B[..., 0]), np.abs(A[..., 1] - B[..., 1]))

    hs = [2**k for k in range(4, 13)]
    fit = hpol_from_orbits(X, dist, [0.2, 0.1], hs)
    assert fit.hpol_proxy == pytest.approx(1.0, abs=0.05)


def test_fit_recovers_power_law_and_flags_saturation():
    hs = [2.0**k for k in range(4, 13)]
    K = 10**6
    counts = np.array([[3 * h**1.5 for h in hs], [min(3 * h**2, K) for h in hs]])
    with pytest.warns(SaturationWarning):
        fit_slopes(np.array([[500] * 9]), [0.1], hs, 500)
    fit = fit_slopes(np.round(counts), [0.2, 0.1], hs, K)
    assert fit.slopes[0.2] == pytest.approx(1.5, abs=1e-3)
    assert fit.saturated[0.1] and not fit.saturated[0.2]
    assert fit.hpol_proxy == pytest.approx(1.5, abs=1e-3)


@pytest.mark.filterwarnings("ignore::hpol_lab.entropy.SaturationWarning")
def test_frozen_system_counts_are_constant(rng):
    q, p = rng.random((30, 2)), rng.normal(size=(30, 2))
    X = frozen_orbits(q, p, 65)
    fit = hpol_from_orbits(X, phase_dist_fn, [0.1], [4, 8, 16, 32, 64])
    assert len(set(fit.counts[0])) == 1
