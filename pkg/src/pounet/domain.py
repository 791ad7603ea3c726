"""Axis-aligned boxes used as data domains and initialization regions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    """Hyper-rectangle [lo_1, hi_1] x ... x [lo_d, hi_d] with lo < hi per axis."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=np.float64))
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("box bounds must be 1-D arrays of equal length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("box bounds must be finite")
        if not (lo < hi).all():
            raise ValueError("box must satisfy lo < hi on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def corners(self) -> np.ndarray:
        """All 2^d corner points, one per row."""
        cols = [(self.lo[j], self.hi[j]) for j in range(self.dim)]
        return np.array(list(itertools.product(*cols)), dtype=np.float64)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return ((pts >= self.lo) & (pts <= self.hi)).all(axis=1)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n points drawn uniformly from the box, shape (n, d)."""
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))


def unit_box(dim: int) -> Box:
    return Box(np.zeros(dim), np.ones(dim))


def symmetric_box(dim: int, radius: float = 1.0) -> Box:
    return Box(-radius * np.ones(dim), radius * np.ones(dim))
