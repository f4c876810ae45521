import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hpol_lab.clairaut import PinchedCircle
from hpol_lab.torus import DomainError, flat, pinched, revolution
from hpol_lab.weak_kam import (GridField, alpha_lower, alpha_result, aubry_estimate,
                               construct_section, grid_points, level_curve, mather_proxy,
                               rotation_vector)
from hpol_lab.weak_kam.grid import centred_diff, centred_diff_adjoint
from hpol_lab.weak_kam.levels import classify_all, level_self_check, rational_direction
from hpol_lab.weak_kam.section import integer_scaling, trace_level_set

G0 = np.array([[2.0, 0.5], [0.5, 1.0]])


# --- grid -------------------------------------------------------------------

def test_centred_diff_second_order():
    errs = []
    for N in (16, 32):
        Q = grid_points(N)
        u = np.sin(2 * np.pi * Q[..., 0]) * np.cos(2 * np.pi * Q[..., 1])
        exact = 2 * np.pi * np.cos(2 * np.pi * Q[..., 0]) * np.cos(2 * np.pi * Q[..., 1])
        errs.append(np.max(np.abs(centred_diff(u)[..., 0] - exact)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


@given(arrays(float, (8, 8), elements=st.floats(-1, 1)),
       arrays(float, (8, 8, 2), elements=st.floats(-1, 1)))
def test_adjoint_identity(u, g):
    assert np.sum(centred_diff(u) * g) == pytest.approx(np.sum(u * centred_diff_adjoint(g)),
                                                        abs=1e-9)


def test_gridfield_interpolates_nodes_and_round_trips(tmp_path, rng):
    f = GridField(rng.normal(size=(16, 16)))
    Q = grid_points(16).reshape(-1, 2)
    assert np.allclose(f.interpolate(Q + 3.0), f.values.reshape(-1))
    f.to_csv(tmp_path / "w.csv")
    assert np.array_equal(GridField.from_csv(tmp_path / "w.csv").values, f.values)


# --- alpha --------------------------------------------------------------------

def test_flat_alpha_closed_form_and_gap(rng):
    m = flat(G0)
    Ginv = np.linalg.inv(G0)
    for c in rng.uniform(-1, 1, (5, 2)):
        res = alpha_result(m, c, 32)
        assert res.upper == pytest.approx(0.5 * c @ Ginv @ c, abs=1e-9)
        lo, meas = alpha_lower(m, c, 32, upper=res)
        assert abs(res.upper - lo) < 1e-8
        assert meas.mass == pytest.approx(1.0)
        # [DERIVED] rotation vector of the minimizing measure is G0^{-1} c
        assert np.allclose(rotation_vector((meas, m)), Ginv @ c, atol=1e-8)


@pytest.mark.parametrize("kappa", [0.5, 0.2, 0.05])
def test_pinched_alpha_on_invariant_circles(kappa):
    # [DERIVED] independent oracle: the graph p = (P, p2(q2)) is invariant and
    # Lagrangian with cohomology c = (P, int p2), so alpha(c) = e exactly
    circ = PinchedCircle(0.5, 0.5, kappa)
    res = alpha_result(pinched(0.5), circ.cohomology(), 64)
    assert res.upper == pytest.approx(0.5, abs=5e-4)


@pytest.mark.parametrize("c2", [0.0, 0.3, -0.5])
def test_pinched_alpha_is_flat_on_the_face(c2):
    # on the (1, 0) face at e = 1/2, alpha(1, c2) = 1/2 for |c2| < 2/pi
    res = alpha_result(pinched(0.5), np.array([1.0, c2]), 32)
    assert res.upper == pytest.approx(0.5, abs=1e-9)


def test_duality_gap_pinched():
    m = pinched(0.5)
    for c in ([1.0, 0.3], [0.5, 1.0]):
        res = alpha_result(m, np.array(c), 32)
        lo, _ = alpha_lower(m, np.array(c), 32, upper=res)
        assert lo <= res.upper + 1e-7
        assert res.upper - lo < 1e-3


# --- Aubry sets ---------------------------------------------------------------

def test_aubry_full_for_flat_partial_on_face():
    assert aubry_estimate(flat(G0), np.array([0.4, -0.7]), N=32).is_full()
    au = aubry_estimate(pinched(0.5), np.array([1.0, 0.3]), N=32)
    assert not au.is_full()
    assert np.allclose(np.mod(au.q[:, 1] + 0.5, 1.0) - 0.5, 0.0)  # the circle {q2 = 0}


def test_mather_proxy_on_face_is_the_hyperbolic_circle():
    m = pinched(0.5)
    c = np.array([1.0, 0.3])
    res = alpha_result(m, c, 32)
    _, meas = alpha_lower(m, c, 32, upper=res)
    supp = mather_proxy(meas)
    assert np.all(np.abs(np.mod(supp[:, 1] + 0.5, 1.0) - 0.5) <= 1 / 32 + 1e-12)


# --- level curves -------------------------------------------------------------

@given(st.integers(-30, 30), st.integers(-30, 30), st.integers(1, 5))
def test_rational_direction_recovers_primitive_classes(a, b, s):
    if a == 0 and b == 0:
        return
    g = np.gcd(a, b)
    r = rational_direction(np.array([s * a, s * b], float), Q=32)
    if max(abs(a), abs(b)) // g <= 32:
        assert r == (a // g, b // g)


def test_irrational_direction():
    assert rational_direction(np.array([1.0, np.sqrt(2) - 1]), Q=32, tol=1e-6) is None


def test_flat_level_curve_is_the_ellipse():
    m = flat(G0)
    curve = level_curve(m, 0.5, n_samples=32, N=16)
    Ginv = np.linalg.inv(G0)
    assert np.allclose(np.einsum("ni,ij,nj->n", curve.c, Ginv, curve.c), 1.0, atol=1e-9)
    assert curve.faces == []
    assert "conflict" not in classify_all(m, 0.5, curve)
    assert 3 not in curve.cases
    assert level_self_check(m, curve) < 1e-9


def test_level_curve_rejects_low_energy():
    with pytest.raises(DomainError):
        level_curve(flat(), 0.0, n_samples=8, N=16)


# --- sections -----------------------------------------------------------------

def test_integer_scaling():
    l, k = integer_scaling(np.array([0.5, 0.25]))
    assert l == 4 and list(k) == [2, 1]
    with pytest.raises(DomainError):
        integer_scaling(np.array([np.sqrt(2), 0.0]))


def test_trace_linear_level_set():
    N = 16
    k = np.array([1, 2])
    i = np.arange(N)[:, None] / N
    j = np.arange(N)[None, :] / N
    comps = trace_level_set(k[0] * i + k[1] * j, k, 0.3)
    # {q1 + 2 q2 = 0.3 mod 1} is one circle of class +-(2, -1)
    assert len(comps) == 1
    assert abs(comps[0][1] @ np.array([1, 2])) == 0
    assert sorted(np.abs(comps[0][1])) == [1, 2]


def test_flat_section():
    m = flat()
    sec = construct_section(m, np.array([1.0, 0.0]), np.array([0.0, 0.0]), N=16)
    assert list(np.round(sec.homology)) == [0, 1]
    assert list(sec.sigma) == [1, 0]
    assert sec.is_simple()
    assert sec.meta["min_transversality"] > 0


def test_revolution_alpha_is_even_in_c():
    m = revolution(2.0, 1.0)
    c = np.array([0.4, 0.9])
    a = alpha_result(m, c, 32).upper
    assert alpha_result(m, -c, 32).upper == pytest.approx(a, abs=1e-8)
    assert alpha_result(m, c * [1, -1], 32).upper == pytest.approx(a, abs=1e-8)
