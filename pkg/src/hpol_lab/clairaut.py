"""Invariant circles of the pinched conformal metric, by quadrature.

For H = |p|^2 / (2 f(q2)) the momentum p1 = P is a first integral, and on
the shell H = e the circle with p1 = P is the graph

    p2 = +/- sqrt(a^2 sin^2(pi q2) + kappa),    a^2 = 4 A e,  kappa = 2e - P^2.

Orbits of class (k, 1) live on circles with kappa ~ 16 exp(-pi k): for
k >= 13 the number 1 - P is below double resolution, so a state (q, p)
cannot even encode them.  Here kappa is carried as its own float and the
return map to {q1 = theta} is evaluated as

    Psi(s) = G^{-1}(G(s) + 1/P),    G(s) = int_0^s ds' / p2(s'),

with the substitution sin(pi s) = (sqrt(kappa)/a) sinh(u) near the
hyperbolic circle {q2 = 0}, where the integrand has width sqrt(kappa).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from hpol_lab.torus import DomainError

_QUAD = dict(epsabs=0.0, epsrel=1e-13, limit=200)
_S_SPLIT = 0.25  # |s| below this uses the sinh substitution


@dataclass(frozen=True)
class PinchedCircle:
    """The invariant circle {p1 = P, p2 > 0} of the pinched model at energy e."""

    A: float
    e: float
    kappa: float

    def __post_init__(self):
        if not (self.A > 0 and self.e > 0):
            raise DomainError("need A > 0 and e > 0")
        if not (0 < self.kappa < 2 * self.e):
            raise DomainError("kappa must lie in (0, 2e)")

    @property
    def a(self):
        return float(np.sqrt(4 * self.A * self.e))

    @property
    def P(self):
        return float(np.sqrt(2 * self.e - self.kappa))

    def p2(self, s):
        return np.sqrt(self.a**2 * np.sin(np.pi * np.asarray(s)) ** 2 + self.kappa)

    # --- G on [-1/2, 1/2], odd, extended by G(s + 1) = G(s) + G_full --------

    def _g_inner_u(self, U):
        r = self.kappa / self.a**2
        val, _ = quad(lambda u: 1.0 / np.sqrt(1.0 - r * np.sinh(u) ** 2), 0.0, U, **_QUAD)
        return val / (self.a * np.pi)

    def _U(self, s):
        return float(np.arcsinh(self.a * np.sin(np.pi * s) / np.sqrt(self.kappa)))

    def _g_outer(self, s0, s1):
        val, _ = quad(lambda x: 1.0 / self.p2(x), s0, s1, **_QUAD)
        return val

    @cached_property
    def _g_split(self):
        return self._g_inner_u(self._U(_S_SPLIT))

    @cached_property
    def G_half(self):
        return self._g_split + self._g_outer(_S_SPLIT, 0.5)

    @cached_property
    def G_full(self):
        return 2.0 * self.G_half

    def G_reduced(self, s):
        """G on [-1/2, 1/2]."""
        sign = 1.0 if s >= 0 else -1.0
        s = abs(s)
        if s <= _S_SPLIT:
            return sign * self._g_inner_u(self._U(s))
        return sign * (self._g_split + self._g_outer(_S_SPLIT, s))

    def G(self, s):
        n = np.floor(s + 0.5)
        return n * self.G_full + self.G_reduced(s - n)

    def G_inverse(self, g):
        n = np.floor(g / self.G_full + 0.5)
        r = g - n * self.G_full
        sign = 1.0 if r >= 0 else -1.0
        r = abs(r)
        if r <= self._g_split:
            U = brentq(lambda U: self._g_inner_u(U) - r, 0.0, self._U(_S_SPLIT), xtol=1e-15,
                       rtol=1e-15)
            s = np.arcsin(np.sqrt(self.kappa) * np.sinh(U) / self.a) / np.pi
        elif r >= self.G_half:
            s = 0.5  # rounding can put r a hair past the half period
        else:
            s = brentq(lambda x: self._g_split + self._g_outer(_S_SPLIT, x) - r, _S_SPLIT, 0.5,
                       xtol=1e-15, rtol=1e-15)
        return n + sign * s

    # --- dynamics ----------------------------------------------------------

    @property
    def rotation_ratio(self):
        """Advance of q1 per full turn of q2 (the circle's class is (ratio, 1))."""
        return self.P * self.G_full

    def cohomology(self):
        """c = (P, int_0^1 p2): the cohomology whose Aubry set is this circle."""
        # p2 is even about 0 and 1/2; the kink sits at the endpoint s = 0
        val, _ = quad(lambda x: self.p2(x), 0.0, 0.5, epsabs=0.0, epsrel=1e-12, limit=200)
        return np.array([self.P, 2.0 * val])

    def return_map(self, s, n=1):
        """Lifted q2 after n returns to {q1 = theta} (q1 advances by 1 per return)."""
        s = float(s)
        for _ in range(n):
            s = self.G_inverse(self.G(s) + 1.0 / self.P)
        return s

    def orbit(self, s, n):
        """Lifted q2 at returns 0..n-1."""
        out = [float(s)]
        for _ in range(n - 1):
            out.append(self.return_map(out[-1]))
        return np.array(out)

    def states(self, theta, s):
        """Phase states (q, p) on {q1 = theta} at section parameters s."""
        s = np.atleast_1d(np.asarray(s, float))
        wrapped = s - np.floor(s + 0.5)  # kept in [-1/2, 1/2) so q2 ~ 1e-10 stays exact
        q = np.stack([np.full_like(s, theta), wrapped], axis=-1)
        p = np.stack([np.full_like(s, self.P), self.p2(wrapped)], axis=-1)
        return q, p


def circle_for_ratio(A, e, k, tol=1e-14):
    """The invariant circle of class (k, 1): rotation_ratio == k (k > 0)."""
    if k <= 0:
        raise DomainError("class (k, 1) needs k > 0")

    def f(logk):
        return PinchedCircle(A, e, float(np.exp(logk))).rotation_ratio - k

    hi = np.log(2 * e) - 1e-9
    lo = -700.0
    if f(hi) > 0:
        raise DomainError(f"ratio {k} below the range of the circle family")
    logk = brentq(f, lo, hi, xtol=tol, rtol=tol)
    return PinchedCircle(A, e, float(np.exp(logk)))
