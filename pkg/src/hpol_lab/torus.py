"""Points, phase states, (co)homology classes and Tonelli Hamiltonians on T^2.

All evaluators are vectorised: ``q`` and ``p`` are arrays whose last axis has
length 2, and any leading axes broadcast.  Coordinates ``q`` may be unwrapped
(lifted to the plane); every built-in Hamiltonian is Z^2-periodic in ``q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * np.pi

# the 9 integer translates used by torus_distance
_TRANSLATES = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class NumericError(RuntimeError):
    """A numerical procedure failed to converge or lost accuracy."""


def _as_pair(x, name="argument"):
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1:] != (2,):
        raise DomainError(f"{name} must have a trailing axis of length 2, got {arr.shape}")
    return arr


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DomainError("non-finite input")


def reduce(q):
    """Canonical representative of ``q`` in [0, 1)^2."""
    q = _as_pair(q, "q")
    r = np.mod(q, 1.0)
    # mod can return 1.0 for tiny negative inputs
    return np.where(r >= 1.0, 0.0, r)


def torus_distance(q, q2):
    """Euclidean distance on R^2/Z^2 (minimum over the 9 nearest translates)."""
    d = reduce(q) - reduce(q2)
    shifted = d[..., None, :] + _TRANSLATES
    return np.sqrt(np.min(np.sum(shifted * shifted, axis=-1), axis=-1))


@dataclass
class TorusPoint:
    q1: float
    q2: float

    def __post_init__(self):
        r = reduce([self.q1, self.q2])
        self.q1, self.q2 = float(r[0]), float(r[1])

    def as_array(self):
        return np.array([self.q1, self.q2])


@dataclass
class PhaseState:
    """A point (q, p) of T*T^2; ``q`` may be unwrapped."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.q = _as_pair(self.q, "q")
        self.p = _as_pair(self.p, "p")


@dataclass
class TangentState:
    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.q = _as_pair(self.q, "q")
        self.v = _as_pair(self.v, "v")


# ---------------------------------------------------------------------------
# (co)homology


def is_integer_class(h, atol=1e-12):
    h = np.asarray(h, dtype=float)
    return bool(np.all(np.abs(h - np.round(h)) <= atol))


def _integer_class(h, name):
    h = np.asarray(h, dtype=float)
    if h.shape != (2,) or not is_integer_class(h):
        raise DomainError(f"{name} must be an integer class, got {h}")
    return int(round(h[0])), int(round(h[1]))


def intersection_number(h, h2):
    """Antisymmetric intersection pairing <h, h'> = h1 h'2 - h2 h'1 of integer classes."""
    a1, a2 = _integer_class(h, "h")
    b1, b2 = _integer_class(h2, "h'")
    return a1 * b2 - a2 * b1


def pairing(c, h):
    """Evaluation of a cohomology class on a homology class."""
    return float(np.dot(np.asarray(c, dtype=float), np.asarray(h, dtype=float)))


def section_cocycle(sigma_homology):
    """Cohomology class of the intersection cocycle of a cooriented circle.

    With the coorientation normal obtained by turning the tangent clockwise,
    the cocycle evaluates on ``h`` as the intersection number <h, [Sigma]>.
    """
    s1, s2 = np.asarray(sigma_homology, dtype=float)
    return np.array([s2, -s1])


def primitive(h):
    """Indivisible integer class positively proportional to the integer class ``h``."""
    a, b = _integer_class(h, "h")
    g = gcd(abs(a), abs(b))
    if g == 0:
        raise DomainError("the zero class has no primitive representative")
    return np.array([a // g, b // g])


def crossing_period(rho, sigma_homology):
    """Minimal period tau = sigma . [rho] of the section map on Mather orbits of class [rho]."""
    return intersection_number(rho, sigma_homology)


def witness_period(rho, sigma_homology, m):
    """Minimal psi^tau period of orbits of class m[rho] + [Sigma]: (sigma/tau).(m[rho]+[Sigma])."""
    tau = crossing_period(rho, sigma_homology)
    if tau == 0:
        raise DomainError("section does not cross the class [rho]")
    rho = np.asarray(rho, dtype=float)
    sig = np.asarray(sigma_homology, dtype=float)
    h = m * rho + sig
    value = pairing(section_cocycle(sig), h) / tau
    return int(round(value))


# ---------------------------------------------------------------------------
# models


@dataclass
class TonelliModel:
    """A Tonelli Hamiltonian H(q, p) on T^2 x R^2 with exact derivatives.

    ``family`` is one of flat, revolution, pinched, custom.  Metric families
    expose ``metric(q)`` returning G(q) with H = <G^{-1} p, p>/2.
    """

    family: str
    params: dict = field(default_factory=dict)
    _H: Optional[Callable] = field(default=None, repr=False)
    _dH_dq: Optional[Callable] = field(default=None, repr=False)
    _dH_dp: Optional[Callable] = field(default=None, repr=False)
    _d2H_dpp: Optional[Callable] = field(default=None, repr=False)

    # -- metric data -------------------------------------------------------
    @property
    def is_metric(self):
        return self.family in ("flat", "revolution", "pinched")

    def _diag_metric(self, q):
        """Diagonal entries (g11, g22) of G(q) and their q2-derivatives."""
        q2 = q[..., 1]
        if self.family == "revolution":
            a, b = self.params["a"], self.params["b"]
            r = a + b * np.cos(TWO_PI * q2)
            dr = -TWO_PI * b * np.sin(TWO_PI * q2)
            one = np.ones_like(r)
            return (r * r, one), (2.0 * r * dr, 0.0 * one)
        if self.family == "pinched":
            A = self.params["A"]
            s = np.sin(np.pi * q2)
            f = 1.0 + 2.0 * A * s * s
            df = TWO_PI * A * np.sin(TWO_PI * q2)
            return (f, f), (df, df)
        raise AssertionError(self.family)

    def metric(self, q):
        if not self.is_metric:
            raise DomainError("custom models carry no metric")
        q = _as_pair(q, "q")
        if self.family == "flat":
            G0 = self.params["G0"]
            return np.broadcast_to(G0, q.shape[:-1] + (2, 2)).copy()
        (g11, g22), _ = self._diag_metric(q)
        G = np.zeros(q.shape[:-1] + (2, 2))
        G[..., 0, 0] = g11
        G[..., 1, 1] = g22
        return G

    # -- Hamiltonian -------------------------------------------------------
    def H(self, q, p):
        q, p = np.asarray(q, dtype=float), np.asarray(p, dtype=float)
        if self.family == "flat":
            Gi = self.params["G0inv"]
            return 0.5 * np.einsum("...i,ij,...j->...", p, Gi, p)
        if self.family == "custom":
            return np.asarray(self._H(q, p), dtype=float)
        (g11, g22), _ = self._diag_metric(q)
        return 0.5 * (p[..., 0] ** 2 / g11 + p[..., 1] ** 2 / g22)

    def dH_dp(self, q, p):
        q, p = np.asarray(q, dtype=float), np.asarray(p, dtype=float)
        if self.family == "flat":
            return p @ self.params["G0inv"].T
        if self.family == "custom":
            return np.asarray(self._dH_dp(q, p), dtype=float)
        (g11, g22), _ = self._diag_metric(q)
        return np.stack([p[..., 0] / g11, p[..., 1] / g22], axis=-1)

    def dH_dq(self, q, p):
        q, p = np.asarray(q, dtype=float), np.asarray(p, dtype=float)
        if self.family == "flat":
            return np.zeros(np.broadcast_shapes(q.shape, p.shape))
        if self.family == "custom":
            return np.asarray(self._dH_dq(q, p), dtype=float)
        (g11, g22), (d11, d22) = self._diag_metric(q)
        dq2 = -0.5 * (p[..., 0] ** 2 * d11 / g11**2 + p[..., 1] ** 2 * d22 / g22**2)
        return np.stack([np.zeros_like(dq2), dq2], axis=-1)

    def d2H_dpp(self, q, p):
        q, p = np.asarray(q, dtype=float), np.asarray(p, dtype=float)
        shape = np.broadcast_shapes(q.shape, p.shape)[:-1] + (2, 2)
        if self.family == "flat":
            return np.broadcast_to(self.params["G0inv"], shape).copy()
        if self.family == "custom":
            if self._d2H_dpp is not None:
                return np.asarray(self._d2H_dpp(q, p), dtype=float)
            return _fd_jacobian(lambda pp: self.dH_dp(q, pp), p)
        (g11, g22), _ = self._diag_metric(q)
        out = np.zeros(shape)
        out[..., 0, 0] = 1.0 / g11
        out[..., 1, 1] = 1.0 / g22
        return out

    def vector_field(self, q, p):
        """Hamilton's equations (dq, dp) = (dH/dp, -dH/dq)."""
        return self.dH_dp(q, p), -self.dH_dq(q, p)

    # -- Lagrangian side ---------------------------------------------------
    def to_velocity(self, q, p):
        return self.dH_dp(q, p)

    def to_momentum(self, q, v, max_iter=100, tol=1e-13):
        q, v = np.asarray(q, dtype=float), np.asarray(v, dtype=float)
        if self.is_metric:
            return np.einsum("...ij,...j->...i", self.metric(q), v)
        return _newton_invert(self, q, v, max_iter=max_iter, tol=tol)

    def L(self, q, v):
        q, v = np.asarray(q, dtype=float), np.asarray(v, dtype=float)
        if self.is_metric:
            G = self.metric(q)
            return 0.5 * np.einsum("...i,...ij,...j->...", v, G, v)
        p = self.to_momentum(q, v)
        return np.sum(p * v, axis=-1) - self.H(q, p)

    def min_H_zero_section(self, n=64):
        """min_q H(q, 0), exactly 0 for metric families."""
        if self.is_metric:
            return 0.0
        g = (np.arange(n) + 0.5) / n
        Q = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
        return float(np.min(self.H(Q, np.zeros_like(Q))))

    # -- serialisation -----------------------------------------------------
    def to_params(self):
        """key=value pairs describing the model (custom models cannot be serialised)."""
        if self.family == "flat":
            G0 = self.params["G0"]
            return {"model": "flat", "G11": repr(float(G0[0, 0])), "G12": repr(float(G0[0, 1])),
                    "G22": repr(float(G0[1, 1]))}
        if self.family == "revolution":
            return {"model": "revolution", "a": repr(self.params["a"]), "b": repr(self.params["b"])}
        if self.family == "pinched":
            return {"model": "pinched", "A": repr(self.params["A"])}
        raise DomainError("custom models are not serialisable")


def _fd_jacobian(fun, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def _newton_invert(model, q, v, max_iter=100, tol=1e-13):
    """Solve dH/dp(q, p) = v for p by damped Newton."""
    q, v = np.broadcast_arrays(q, v)
    p = v.copy()
    for _ in range(max_iter):
        r = model.dH_dp(q, p) - v
        err = np.max(np.abs(r)) if r.size else 0.0
        if err <= tol * max(1.0, float(np.max(np.abs(v))) if v.size else 1.0):
            return p
        Hpp = model.d2H_dpp(q, p)
        step = np.linalg.solve(Hpp, r[..., None])[..., 0]
        t = 1.0
        base = np.sum(r * r, axis=-1)
        for _ in range(30):
            trial = p - t * step
            rt = model.dH_dp(q, trial) - v
            if np.all(np.sum(rt * rt, axis=-1) <= base + 1e-30):
                break
            t *= 0.5
        p = p - t * step
    raise NumericError("Legendre inversion did not converge in %d steps" % max_iter)


def flat(G0=None):
    G0 = np.eye(2) if G0 is None else np.array(G0, dtype=float)
    if G0.shape != (2, 2) or not np.allclose(G0, G0.T) or np.min(np.linalg.eigvalsh(G0)) <= 0:
        raise DomainError("G0 must be a symmetric positive definite 2x2 matrix")
    return TonelliModel("flat", {"G0": G0, "G0inv": np.linalg.inv(G0)})


def revolution(a=2.0, b=1.0):
    if not (a > b >= 0):
        raise DomainError("revolution profile needs a > b >= 0")
    return TonelliModel("revolution", {"a": float(a), "b": float(b)})


def pinched(A=0.5):
    if A < 0:
        raise DomainError("pinched amplitude must be non-negative")
    return TonelliModel("pinched", {"A": float(A)})


def custom(H, dH_dq, dH_dp, d2H_dpp=None, **params):
    return TonelliModel("custom", dict(params), H, dH_dq, dH_dp, d2H_dpp)


def model_from_params(params):
    """Build a built-in model from key=value strings (``model=pinched``, ``A=0.5``...)."""
    name = params.get("model")
    if name == "flat":
        g11 = float(params.get("G11", 1.0))
        g12 = float(params.get("G12", 0.0))
        g22 = float(params.get("G22", 1.0))
        return flat([[g11, g12], [g12, g22]])
    if name == "revolution":
        return revolution(float(params.get("a", 2.0)), float(params.get("b", 1.0)))
    if name == "pinched":
        return pinched(float(params.get("A", 0.5)))
    raise DomainError(f"unknown model family {name!r}")


# ---------------------------------------------------------------------------
# operations on states


def _unpack(state):
    if isinstance(state, PhaseState):
        return state.q, state.p
    q, p = state
    return _as_pair(q, "q"), _as_pair(p, "p")


def hamiltonian_eval(model, state):
    q, p = _unpack(state)
    _check_finite(q, p)
    return model.H(q, p)


def hamiltonian_vector_field(model, state):
    q, p = _unpack(state)
    _check_finite(q, p)
    return model.vector_field(q, p)


def legendre_to_velocity(model, state):
    q, p = _unpack(state)
    _check_finite(q, p)
    return TangentState(q, model.to_velocity(q, p))


def legendre_to_momentum(model, tstate):
    if isinstance(tstate, TangentState):
        q, v = tstate.q, tstate.v
    else:
        q, v = (_as_pair(x) for x in tstate)
    _check_finite(q, v)
    return PhaseState(q, model.to_momentum(q, v))
