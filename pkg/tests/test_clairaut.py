import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpol_lab.clairaut import PinchedCircle, circle_for_ratio
from hpol_lab.flow import batch_returns, phase_distance, straight_section
from hpol_lab.torus import DomainError, pinched

A, E = 0.5, 0.5


@pytest.mark.parametrize("k", [6, 8, 10, 12, 15])
def test_kappa_asymptotics(k):
    # [DERIVED] with a^2 = 4 A e = 1 and P -> 1 the half period is
    # (1/pi) log(16 / kappa) + o(1), so the class (k, 1) has kappa ~ 16 exp(-pi k)
    C = circle_for_ratio(A, E, k)
    assert C.rotation_ratio == pytest.approx(k, rel=1e-12)
    assert C.kappa / (16 * np.exp(-np.pi * k)) == pytest.approx(1.0, abs=1e-5)


@given(st.floats(-3, 3), st.sampled_from([0.3, 1e-4, 1e-12]))
def test_G_inverse_inverts_G(s, kappa):
    C = PinchedCircle(A, E, kappa)
    assert C.G_inverse(C.G(s)) == pytest.approx(s, abs=1e-10)


def test_states_lie_on_the_shell():
    C = PinchedCircle(A, E, 1e-3)
    q, p = C.states(0.0, np.linspace(-1, 1, 33))
    assert np.allclose(pinched(A).H(q, p), E, rtol=1e-12)
    assert np.allclose(p[:, 0], np.sqrt(2 * E - 1e-3))


@pytest.mark.parametrize("k", [3, 7, 12])
def test_class_k1_orbit_closes(k):
    # k returns to {q1 = 0} advance q2 by exactly one turn
    C = circle_for_ratio(A, E, k)
    orb = C.orbit(0.5, k + 1)
    assert orb[-1] - orb[0] == pytest.approx(1.0, abs=1e-8)
    assert np.all(np.diff(orb) > 0)


def test_quadrature_matches_integrated_returns():
    C = circle_for_ratio(A, E, 3)
    q, p = C.states(0.0, [0.5])
    Q, P, _ = batch_returns(pinched(A), straight_section((1, 0)), q, p, 3, dt=1e-3)
    X = np.concatenate(C.states(0.0, C.orbit(0.5, 4)), axis=-1)
    assert np.max(phase_distance(Q[0], P[0], X[:, :2], X[:, 2:])) < 1e-9


def test_cohomology_and_domain():
    C = PinchedCircle(A, E, 0.2)
    c = C.cohomology()
    assert c[0] == pytest.approx(np.sqrt(0.8))
    assert c[1] > 2 / np.pi  # outside the (1, 0) face
    with pytest.raises(DomainError):
        PinchedCircle(A, E, 2 * E)
    with pytest.raises(DomainError):
        circle_for_ratio(A, E, 0)
