import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpol_lab.flow import (NoReturnError, TransversalityError, batch_returns, integrate,
                           phase_distance, poincare_orbit, poincare_return, restrict_to_energy,
                           straight_section)
from hpol_lab.torus import DomainError, flat, pinched, revolution

G0 = np.array([[2.0, 0.5], [0.5, 1.0]])


def test_flat_flow_is_linear():
    # [DERIVED] flat flow: q(t) = q0 + G0^{-1} p t, p constant
    m = flat(G0)
    q0, p0 = np.array([0.1, 0.2]), np.array([0.7, -0.3])
    tr = integrate(m, (q0, p0), 5.0, 0.01)
    assert np.allclose(tr.q[-1], q0 + np.linalg.solve(G0, p0) * 5.0, atol=1e-11)
    assert np.allclose(tr.p[-1], p0, atol=1e-13)


@pytest.mark.parametrize("model", [revolution(2.0, 1.0), pinched(0.5)], ids=lambda m: m.family)
def test_energy_and_reversibility(model):
    st0 = restrict_to_energy(model, (np.array([0.1, 0.3]), np.array([0.6, 0.8])), 0.5)
    fwd = integrate(model, st0, 1000.0, 0.0025, dt_sample=1.0)
    assert fwd.max_relative_drift() < 1e-8
    back = integrate(model, fwd.final, -1000.0, 0.0025)
    assert np.max(np.abs(back.q[-1] - st0.q)) < 1e-6
    assert np.max(np.abs(back.p[-1] - st0.p)) < 1e-6


def test_clairaut_integral_of_revolution():
    # p1 is conserved because H does not depend on q1; the energy projection
    # moves p along dH/dp, so it is kept only to the step accuracy
    m = revolution(2.0, 1.0)
    tr = integrate(m, (np.array([0.0, 0.1]), np.array([0.4, 0.9])), 50.0, 0.01, dt_sample=0.5)
    assert np.ptp(tr.p[:, 0]) < 1e-7


def test_batch_shapes_and_sampling():
    m = flat()
    q = np.zeros((5, 2))
    p = np.tile([1.0, 0.0], (5, 1))
    tr = integrate(m, (q, p), 2.0, 0.01, dt_sample=0.5)
    assert tr.q.shape == (5, 5, 2)
    assert np.allclose(tr.times, [0, 0.5, 1.0, 1.5, 2.0])


def test_restrict_to_energy_hits_level(rng):
    m = pinched(0.5)
    q, p = rng.random((10, 2)), rng.normal(size=(10, 2))
    s = restrict_to_energy(m, (q, p), 0.7)
    assert np.allclose(m.H(s.q, s.p), 0.7, rtol=1e-12)
    # same direction
    cos = np.sum(s.p * p, axis=1) / np.linalg.norm(s.p, axis=1) / np.linalg.norm(p, axis=1)
    assert np.allclose(cos, 1.0)
    with pytest.raises(DomainError):
        restrict_to_energy(m, (q[:1], np.zeros((1, 2))), 0.7)


def test_straight_section_geometry():
    sec = straight_section((1, 0), 0.25)
    assert list(sec.homology) == [0, 1]
    assert list(sec.sigma) == [1, 0]
    assert sec.length == pytest.approx(1.0)
    assert sec.is_simple()
    d, s = sec.nearest(np.array([[0.25, 0.4], [0.3, 0.9]]))
    assert d == pytest.approx([0.0, 0.05])
    assert s == pytest.approx([0.4, 0.9])


def test_flat_return_times():
    # [DERIVED] return time to {q1 = 0} is 1 / v1 for velocity v = G0^{-1} p
    m = flat(G0)
    p = np.array([[1.0, 0.3]])
    v1 = np.linalg.solve(G0, p[0])[0]
    Q, P, T = batch_returns(m, straight_section((1, 0)), np.zeros((1, 2)), p, 3, dt=0.01)
    assert np.allclose(np.diff(T[0]), 1 / v1, atol=1e-10)
    assert np.allclose(np.mod(Q[0, :, 1], 1.0), np.mod(np.linalg.solve(G0, p[0])[1] / v1
                                                       * np.arange(4), 1.0), atol=1e-9)


def test_return_errors():
    m = flat()
    sec = straight_section((1, 0))
    with pytest.raises(NoReturnError):
        batch_returns(m, sec, np.zeros((1, 2)) + [0.5, 0.0], np.array([[0.0, 1.0]]), 1,
                      T_max=5.0)
    with pytest.raises(TransversalityError):
        poincare_return(m, sec, (np.array([0.0, 0.2]), np.array([0.0, 1.0])))


def test_poincare_orbit_chains_samples():
    m = revolution(2.0, 1.0)
    s = restrict_to_energy(m, (np.array([0.0, 0.2]), np.array([0.9, 0.4])), 0.5)
    out = poincare_orbit(m, straight_section((1, 0)), s, 4)
    for a, b in zip(out, out[1:]):
        assert np.allclose(a.exit.q, b.entry.q)
    assert all(r.return_time > 0 for r in out)


vec = st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=2).map(np.array)


@given(vec, vec, vec, vec, vec, vec)
def test_phase_distance_is_a_metric(q1, p1, q2, p2, q3, p3):
    d12 = phase_distance(q1, p1, q2, p2)
    assert d12 >= 0
    assert d12 == pytest.approx(phase_distance(q2, p2, q1, p1))
    assert phase_distance(q1, p1, q3, p3) <= d12 + phase_distance(q2, p2, q3, p3) + 1e-12
