import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpol_lab.torus import (DomainError, crossing_period, flat, intersection_number,
                            model_from_params, pinched, reduce, revolution, section_cocycle,
                            torus_distance, witness_period)

ints = st.integers(-20, 20)
coords = st.floats(-5, 5, allow_nan=False)
MODELS = [flat(), flat(np.array([[4.0, 0.0], [0.0, 1.0]])), revolution(2.0, 1.0), pinched(0.5)]


@given(ints, ints, ints, ints)
def test_intersection_antisymmetric_bilinear(a, b, c, d):
    h, k = (a, b), (c, d)
    assert intersection_number(h, k) == -intersection_number(k, h)
    assert intersection_number(h, h) == 0
    assert intersection_number((2 * a, 2 * b), k) == 2 * intersection_number(h, k)


@given(ints, ints, ints, ints)
def test_cocycle_evaluates_intersection(a, b, c, d):
    # sigma(h) = <h, [Sigma]>
    assert section_cocycle((c, d)) @ np.array([a, b]) == intersection_number((a, b), (c, d))


def test_section_q1_const_has_cocycle_dq1():
    # {q1 = theta} is the (0, 1) circle; it is crossed once per turn of q1
    assert list(section_cocycle((0, 1))) == [1, 0]
    assert crossing_period((1, 0), (0, 1)) == 1


@pytest.mark.parametrize("m", [1, 2, 5, 11])
def test_witness_period_of_m_rho_plus_sigma(m):
    assert witness_period((1, 0), (0, 1), m) == m
    # tau = 2 for rho = (2, 1) against Sigma = (0, 1): period is m again
    assert crossing_period((2, 1), (0, 1)) == 2
    assert witness_period((2, 1), (0, 1), m) == m


def test_non_integer_class_rejected():
    with pytest.raises(DomainError):
        intersection_number((0.5, 1), (1, 0))
    with pytest.raises(DomainError):
        witness_period((1, 0), (1, 0), 3)


@given(coords, coords)
def test_reduce_lands_in_unit_square(x, y):
    r = reduce(np.array([x, y]))
    assert np.all((0 <= r) & (r < 1))
    assert np.allclose(np.round(np.array([x, y]) - r), np.array([x, y]) - r)


@given(coords, coords, coords, coords, ints, ints)
def test_torus_distance_lattice_invariant(a, b, c, d, i, j):
    q, q2 = np.array([a, b]), np.array([c, d])
    dist = torus_distance(q, q2)
    assert 0 <= dist <= np.sqrt(0.5) + 1e-12
    assert dist == pytest.approx(torus_distance(q2 + np.array([i, j]), q), abs=1e-9)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.family)
def test_gradients_match_finite_differences(model, rng):
    q, p = rng.random((16, 2)), rng.normal(size=(16, 2))
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd_p = (model.H(q, p + e) - model.H(q, p - e)) / (2 * h)
        fd_q = (model.H(q + e, p) - model.H(q - e, p)) / (2 * h)
        assert np.allclose(model.dH_dp(q, p)[:, k], fd_p, atol=1e-6)
        assert np.allclose(model.dH_dq(q, p)[:, k], fd_q, atol=1e-6)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.family)
def test_metric_hamiltonians_are_quadratic_in_p(model, rng):
    q, p = rng.random((8, 2)), rng.normal(size=(8, 2))
    for lam in (0.5, 2.0, 3.0):
        assert np.allclose(model.H(q, lam * p), lam**2 * model.H(q, p), rtol=1e-13)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.family)
def test_legendre_round_trip(model, rng):
    q, p = rng.random((8, 2)), rng.normal(size=(8, 2))
    v = model.to_velocity(q, p)
    assert np.allclose(model.to_momentum(q, v), p, atol=1e-10)
    # Fenchel equality L(q, v) + H(q, p) = p.v
    assert np.allclose(model.L(q, v) + model.H(q, p), np.sum(p * v, axis=-1), atol=1e-10)


def test_closed_forms():
    q = np.array([[0.3, 0.25]])
    p = np.array([[1.0, 2.0]])
    # revolution: r = a + b cos(2 pi q2) = 2 at q2 = 1/4
    assert revolution(2.0, 1.0).H(q, p)[0] == pytest.approx(0.5 * (1 / 4 + 4))
    # pinched: f = 1 + 2A sin^2(pi q2) = 1.5 at q2 = 1/4, A = 1/2
    assert pinched(0.5).H(q, p)[0] == pytest.approx(5 / 3)


def test_model_params_round_trip():
    for m in MODELS:
        m2 = model_from_params(m.to_params())
        q, p = np.array([[0.1, 0.7]]), np.array([[0.3, -1.2]])
        assert m2.family == m.family
        assert np.allclose(m2.H(q, p), m.H(q, p))


def test_bad_parameters():
    with pytest.raises(DomainError):
        revolution(1.0, 2.0)
    with pytest.raises(DomainError):
        flat(np.array([[1.0, 2.0], [2.0, 1.0]]))
