"""Multivariate monomial (truncated Taylor) bases.

Exponent multi-indices are enumerated in graded order: grades sorted by
total degree, and within a grade the leading coordinate's exponent
decreases first, so for d=2, m=2 the basis reads
1, x1, x2, x1^2, x1*x2, x2^2. The first entry is always the constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Box


def basis_dim(d: int, m_max: int) -> int:
    """Number of d-variate monomials of total degree <= m_max."""
    if d < 1:
        raise ValueError(f"spatial dimension must be >= 1, got {d}")
    if m_max < 0:
        raise ValueError(f"maximal degree must be >= 0, got {m_max}")
    return math.comb(m_max + d, d)


def _grade_exponents(d, grade):
    # leading coordinate takes the largest exponent first
    if d == 1:
        yield (grade,)
        return
    for lead in range(grade, -1, -1):
        for rest in _grade_exponents(d - 1, grade - lead):
            yield (lead,) + rest


def monomial_exponents(d: int, m_max: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices with |k| <= m_max in the module's graded order."""
    basis_dim(d, m_max)  # argument validation
    out = []
    for grade in range(m_max + 1):
        out.extend(_grade_exponents(d, grade))
    return tuple(out)


@dataclass(frozen=True)
class MonomialBasis:
    """Monomials ((x - center) / scale)^k for |k| <= max_degree."""

    dim_input: int
    max_degree: int
    exponents: tuple[tuple[int, ...], ...]
    center: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(-1)
        scale = np.asarray(self.scale, dtype=np.float64).reshape(-1)
        if center.shape[0] != self.dim_input or scale.shape[0] != self.dim_input:
            raise ValueError("center and scale must have one entry per input coordinate")
        if not (np.isfinite(center).all() and np.isfinite(scale).all()):
            raise ValueError("center and scale must be finite")
        if not (scale > 0.0).all():
            raise ValueError("scale entries must be strictly positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def raw(cls, d: int, m_max: int) -> "MonomialBasis":
        """Plain Taylor monomials about the origin (center 0, scale 1)."""
        return cls(d, m_max, monomial_exponents(d, m_max), np.zeros(d), np.ones(d))

    @classmethod
    def for_box(cls, d: int, m_max: int, box: Box) -> "MonomialBasis":
        """Monomials centered at the box midpoint and scaled by its half-width."""
        if box.dim != d:
            raise ValueError(f"box dimension {box.dim} != basis dimension {d}")
        return cls(d, m_max, monomial_exponents(d, m_max), box.midpoint, box.half_width)

    def __len__(self) -> int:
        return len(self.exponents)

    def eval_point(self, x) -> np.ndarray:
        """Basis values at a single point, shape (dim(V),)."""
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.dim_input:
            raise ValueError(f"point has dimension {x.shape[0]}, expected {self.dim_input}")
        return self.eval_batch(x[None, :])[0]

    def eval_batch(self, xs: np.ndarray) -> np.ndarray:
        """Basis values for a batch of points, shape (n, dim(V))."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.dim_input:
            raise ValueError(f"expected points of shape (n, {self.dim_input}), got {xs.shape}")
        t = (xs - self.center) / self.scale
        # per-coordinate power tables up to max_degree
        pows = np.ones((self.dim_input, self.max_degree + 1, xs.shape[0]))
        for e in range(1, self.max_degree + 1):
            pows[:, e] = pows[:, e - 1] * t.T
        out = np.ones((xs.shape[0], len(self.exponents)))
        for q, k in enumerate(self.exponents):
            for j, e in enumerate(k):
                if e:
                    out[:, q] *= pows[j, e]
        return out

    def descriptor(self) -> dict:
        """JSON-ready description sufficient to reconstruct the basis."""
        return {
            "dim_input": self.dim_input,
            "max_degree": self.max_degree,
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_descriptor(cls, desc: dict) -> "MonomialBasis":
        d = int(desc["dim_input"])
        m = int(desc["max_degree"])
        return cls(d, m, monomial_exponents(d, m), np.asarray(desc["center"]), np.asarray(desc["scale"]))
