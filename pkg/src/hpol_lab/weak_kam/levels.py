"""The level curve alpha^{-1}(e): sampling, outer normals, faces and case labels."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from hpol_lab.torus import DomainError, NumericError
from hpol_lab.weak_kam.alpha import AlphaResult, alpha_result
from hpol_lab.weak_kam.aubry import AUBRY_TOL, aubry_estimate

Q_CAP = 32
ANG_TOL = 1e-3
FACE_FLOOR = 3
LEVEL_TOL = 1e-3
CHAIN_BLOCKS = 8  # independent warm-start chains along the curve


class ClassificationConflict(NumericError):
    """Rationality, coverage and face tests disagree about the case of a sample."""


def rational_direction(v, Q=Q_CAP, tol=ANG_TOL):
    """Primitive integer class within angle ``tol`` of ``v`` with entries bounded by Q, or None.

    Continued-fraction best approximation of the smaller-over-larger slope.
    """
    v = np.asarray(v, dtype=float)
    a, b = float(v[0]), float(v[1])
    swap = abs(b) > abs(a)
    big, small = (b, a) if swap else (a, b)
    if big == 0.0:
        return None
    fr = Fraction(small / big).limit_denominator(Q)
    h = np.array([fr.denominator, fr.numerator], dtype=float) * np.sign(big)
    if swap:
        h = h[::-1]
    ang = abs(np.arctan2(h[0] * b - h[1] * a, h[0] * a + h[1] * b))
    if ang > tol:
        return None
    g = gcd(int(h[0]), int(h[1]))
    return (int(h[0]) // g, int(h[1]) // g)


@dataclass
class LevelCurveSample:
    e: float
    c: np.ndarray  # (n, 2), counterclockwise around c0
    values: np.ndarray  # alpha_upper at each sample
    normals: np.ndarray  # unit outer normals
    c0: np.ndarray
    N: int
    results: list = field(default_factory=list, repr=False)
    Q: int = Q_CAP
    ang_tol: float = ANG_TOL
    face_floor: int = FACE_FLOOR
    cases: list = field(default_factory=list)

    def __post_init__(self):
        self.rational = [rational_direction(n, self.Q, self.ang_tol) for n in self.normals]
        self.faces = self._find_faces()

    def __len__(self):
        return len(self.c)

    def _same_normal(self, i, j):
        a, b = self.normals[i], self.normals[j]
        return (self.rational[i] is not None and self.rational[i] == self.rational[j]
                and abs(np.arctan2(a[0] * b[1] - a[1] * b[0], a @ b)) <= self.ang_tol)

    def _find_faces(self):
        """Maximal cyclic runs of equal rational normals, at least ``face_floor`` long."""
        n = len(self.c)
        same = np.array([self._same_normal(i, (i + 1) % n) for i in range(n)])
        if same.all():
            return [(0, n - 1)]
        start = int(np.argmin(same))  # a break: runs start after it
        runs, i = [], (start + 1) % n
        for _ in range(n):
            j = i
            while same[j % n] and (j + 1 - i) < n:
                j += 1
            if j - i + 1 >= self.face_floor:
                runs.append((i % n, j % n))
            i = j + 1
            if (i - start - 1) % n == 0 or i - (start + 1) >= n:
                break
        return runs

    def run_of(self, i):
        """(first, last) indices of the face containing sample i, or None."""
        n = len(self.c)
        for a, b in self.faces:
            length = (b - a) % n
            if (i - a) % n <= length:
                return a, b
        return None

    def face_interval(self, i):
        """(c_minus, c_plus): endpoints of the face through sample i in counterclockwise order."""
        run = self.run_of(i)
        if run is None:
            return self.c[i], self.c[i]
        return self.c[run[0]], self.c[run[1]]

    def face_length(self, i):
        lo, hi = self.face_interval(i)
        return float(np.linalg.norm(hi - lo))

    def nearest_index(self, direction):
        """Sample whose outer normal is closest in angle to ``direction``."""
        d = np.asarray(direction, float)
        ang = np.arctan2(self.normals[:, 0] * d[1] - self.normals[:, 1] * d[0], self.normals @ d)
        return int(np.argmin(np.abs(ang)))

    def rows(self):
        for i in range(len(self.c)):
            r = self.rational[i]
            case = self.cases[i] if i < len(self.cases) else None
            lo, hi = self.face_interval(i)
            yield {
                "index": i,
                "c1": float(self.c[i, 0]), "c2": float(self.c[i, 1]),
                "alpha": float(self.values[i]),
                "rho1": float(self.normals[i, 0]), "rho2": float(self.normals[i, 1]),
                "rational": "" if r is None else f"{r[0]} {r[1]}",
                "case": "" if case is None else case,
                "face_minus1": float(lo[0]), "face_minus2": float(lo[1]),
                "face_plus1": float(hi[0]), "face_plus2": float(hi[1]),
            }

    def to_csv(self, path):
        rows = list(self.rows())
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)

    def to_json(self):
        return json.dumps({
            "e": self.e, "N": self.N, "Q": self.Q, "ang_tol": self.ang_tol,
            "c0": [float(x) for x in self.c0],
            "faces": [[int(a), int(b)] for a, b in self.faces],
            "samples": list(self.rows()),
        })


def minimize_alpha(model, N=32, tol=1e-6, max_sweeps=50):
    """(argmin, min) of alpha_upper by coordinate descent; exact (0, 0) for metric families."""
    if model.is_metric:
        return np.zeros(2), 0.0
    c = np.zeros(2)
    val = alpha_result(model, c, N).upper
    for _ in range(max_sweeps):
        old = c.copy()
        for k in range(2):
            def f(t, k=k):
                cc = c.copy()
                cc[k] = t
                return alpha_result(model, cc, N).upper

            r = minimize_scalar(f, bracket=(c[k] - 0.5, c[k] + 0.5), tol=tol)
            c[k], val = r.x, r.fun
        if np.max(np.abs(c - old)) < tol:
            break
    return c, float(val)


def _root_on_ray(model, c0, d, e, N, u0=None, t_guess=1.0, max_doublings=60):
    cache = {}

    def g(t):
        r = alpha_result(model, c0 + t * d, N, u0=cache.get("u", u0))
        cache["u"] = r.w.values
        cache[t] = r
        return r.upper - e

    lo, hi = 0.0, t_guess
    for _ in range(max_doublings):
        if g(hi) > 0:
            break
        lo, hi = hi, 2 * hi
    else:
        raise NumericError("level_curve: no bracket on the ray (alpha not superlinear?)")
    t = brentq(g, lo, hi, xtol=1e-12, rtol=1e-12)
    r = cache.get(t) or alpha_result(model, c0 + t * d, N, u0=cache["u"])
    return t, r


def _sample(model, c0, d, e, N, u0, metric):
    if metric:
        # alpha(t d) = t^2 alpha(d) exactly, on the grid as well as in the limit
        r = alpha_result(model, d, N, u0=u0)
        t = np.sqrt(e / r.upper)
        w = r.w.values * t
        r = AlphaResult(t * d, r.upper * t * t, type(r.w)(w), r.residual * t * t)
        return t, r
    return _root_on_ray(model, c0, d, e, N, u0)


def level_curve(model, e, n_samples=256, N=64, c0=None, workers=1):
    """Samples of alpha^{-1}(e) along rays from argmin alpha, counterclockwise."""
    if c0 is None:
        c0, amin = minimize_alpha(model, min(N, 32))
    else:
        amin = alpha_result(model, c0, N).upper
    c0 = np.asarray(c0, float)
    if e <= amin:
        raise DomainError(f"energy {e} is not above min alpha = {amin}")
    theta = 2 * np.pi * np.arange(n_samples) / n_samples
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    metric = model.is_metric and not np.any(c0)

    def chain(idx):
        out, u = {}, None
        for i in idx:
            t, r = _sample(model, c0, dirs[i], e, N, u, metric)
            out[i] = (t, r)
            u = r.w.values / t if metric else r.w.values
        return out

    # the block layout is fixed so the result does not depend on ``workers``
    blocks = np.array_split(np.arange(n_samples), CHAIN_BLOCKS)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(chain, blocks))
    else:
        parts = [chain(b) for b in blocks]
    got = {k: v for part in parts for k, v in part.items()}
    results = [got[i][1] for i in range(n_samples)]
    c = np.array([r.c for r in results])
    values = np.array([r.upper for r in results])
    normals = _normals(c)
    return LevelCurveSample(e, c, values, normals, c0, N, results)


def _normals(c):
    tang = np.roll(c, -1, axis=0) - np.roll(c, 1, axis=0)
    n = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    # enforce monotone cyclic order of the normal map
    ang = np.unwrap(np.arctan2(n[:, 1], n[:, 0]))
    mono = np.maximum.accumulate(ang - ang[0]) + ang[0]
    fixed = np.abs(mono - ang) > 0
    n[fixed] = np.stack([np.cos(mono[fixed]), np.sin(mono[fixed])], axis=1)
    return n


def classify_case(model, e, curve, i, tol=AUBRY_TOL):
    """Case 1, 2 or 3 of sample i; stores the label in ``curve.cases``."""
    rational = curve.rational[i]
    run = curve.run_of(i)
    if len(curve.cases) != len(curve):
        curve.cases = [None] * len(curve)
    if rational is None:
        if run is not None:
            raise ClassificationConflict(f"sample {i}: irrational normal on a face")
        case = 1
    else:
        full = aubry_estimate(model, curve.c[i], curve.results[i], tol).is_full()
        if full and run is None:
            case = 2
        elif not full and run is not None:
            case = 3
        else:
            raise ClassificationConflict(
                f"sample {i}: rational normal {rational} with "
                f"{'full' if full else 'partial'} coverage and "
                f"{'a face' if run is not None else 'no face'}")
    curve.cases[i] = case
    return case


def classify_all(model, e, curve, tol=AUBRY_TOL):
    """Labels for every sample; conflicts are recorded as the string 'conflict'."""
    labels = []
    for i in range(len(curve)):
        try:
            labels.append(classify_case(model, e, curve, i, tol))
        except ClassificationConflict:
            curve.cases[i] = "conflict"
            labels.append("conflict")
    return labels


def level_self_check(model, curve, tol=LEVEL_TOL):
    """Re-evaluate alpha at every sample (warm-started); max |alpha - e|."""
    errs = [abs(alpha_result(model, r.c, curve.N, u0=r.w.values).upper - curve.e)
            for r in curve.results]
    return float(max(errs))
