"""Periodic N x N scalar fields with centred-difference differentials."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


def grid_points(N):
    """Array (N, N, 2) of grid nodes (i/N, j/N); axis 0 is q1."""
    g = np.arange(N) / N
    return np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)


def centred_diff(u):
    """(du/dq1, du/dq2) by centred differences with periodic wraparound, step 1/N."""
    N = u.shape[0]
    d1 = (np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0)) * (N / 2.0)
    d2 = (np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)) * (N / 2.0)
    return np.stack([d1, d2], axis=-1)


def centred_diff_adjoint(g):
    """Adjoint of ``centred_diff`` applied to a covector field (N, N, 2)."""
    N = g.shape[0]
    a = (np.roll(g[..., 0], 1, axis=0) - np.roll(g[..., 0], -1, axis=0)) * (N / 2.0)
    b = (np.roll(g[..., 1], 1, axis=1) - np.roll(g[..., 1], -1, axis=1)) * (N / 2.0)
    return a + b


@dataclass
class GridField:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError("GridField needs a square array")

    @property
    def N(self):
        return self.values.shape[0]

    @property
    def du(self):
        return centred_diff(self.values)

    def curl(self):
        """Discrete curl of du; the centred operators commute so this vanishes."""
        du = self.du
        return centred_diff(du[..., 1])[..., 0] - centred_diff(du[..., 0])[..., 1]

    def mean_zero(self):
        return GridField(self.values - self.values.mean())

    def interpolate(self, q):
        """Periodic bilinear interpolation at points q (..., 2)."""
        N = self.N
        x = np.mod(np.asarray(q, float), 1.0) * N
        i0 = np.floor(x).astype(int)
        t = x - i0
        i0 %= N
        i1 = (i0 + 1) % N
        v = self.values
        return ((1 - t[..., 0]) * (1 - t[..., 1]) * v[i0[..., 0], i0[..., 1]]
                + t[..., 0] * (1 - t[..., 1]) * v[i1[..., 0], i0[..., 1]]
                + (1 - t[..., 0]) * t[..., 1] * v[i0[..., 0], i1[..., 1]]
                + t[..., 0] * t[..., 1] * v[i1[..., 0], i1[..., 1]])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for row in self.values:
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            return cls(np.array([[float(x) for x in row] for row in csv.reader(fh)]))
