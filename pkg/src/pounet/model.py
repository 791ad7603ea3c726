"""The partition-of-unity regression model.

A model couples a partition network phi (any object with the ``partitions``
protocol from :mod:`pounet.pou`) with a monomial basis P and a coefficient
matrix c of shape (n_part, dim(V)):

    yhat(x) = sum_a phi_a(x) * sum_b c[a, b] * P_b(x)

Freezing the partition makes the coefficients a linear least-squares
problem; ``design_matrix`` assembles the corresponding system with columns
in partition-major order, so ``predict`` equals the design matrix applied
to the flattened coefficients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import DenseMatrix
from .poly import MonomialBasis
from .pou import eval_partitions, grad_partitions, net_from_manifest

CHECKPOINT_FORMAT = "pounet-checkpoint-v1"


@dataclass
class Dataset:
    """Point samples (xs, ys) with finite entries and unique sample sites."""

    xs: np.ndarray
    ys: np.ndarray

    @classmethod
    def from_arrays(cls, xs, ys) -> "Dataset":
        """Validate and ingest raw arrays, dropping duplicate rows of xs.

        The first occurrence of each duplicated site is kept and row order
        is otherwise preserved, so ingestion is deterministic.
        """
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim == 1:
            xs = xs[:, None]
        ys = np.asarray(ys, dtype=np.float64).reshape(-1)
        if xs.ndim != 2 or xs.shape[0] != ys.shape[0]:
            raise ValueError(f"incompatible sample shapes: xs {xs.shape}, ys {ys.shape}")
        if xs.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
            raise ValueError("dataset entries must be finite")
        _, first = np.unique(xs, axis=0, return_index=True)
        keep = np.sort(first)
        return cls(xs[keep].copy(), ys[keep].copy())

    @property
    def n_data(self) -> int:
        return self.xs.shape[0]

    @property
    def dim_input(self) -> int:
        return self.xs.shape[1]


@dataclass
class PouModel:
    """Partition network + per-partition polynomial coefficients."""

    partition_net: object
    basis: MonomialBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        expected = (self.partition_net.n_part, len(self.basis))
        if c.shape != expected:
            raise ValueError(f"coefficient shape {c.shape} != {expected}")
        if not np.isfinite(c).all():
            raise ValueError("coefficients must be finite")
        self.coeffs = c


def init_coeffs(n_part: int, basis: MonomialBasis, rng: np.random.Generator) -> np.ndarray:
    """Standard-normal coefficient initialization."""
    return rng.normal(size=(n_part, len(basis)))


def predict(model: PouModel, xs: np.ndarray) -> np.ndarray:
    """Model output at a batch of points."""
    phi = eval_partitions(model.partition_net, xs)
    basis_vals = model.basis.eval_batch(np.atleast_2d(np.asarray(xs, dtype=np.float64)))
    return (phi * (basis_vals @ model.coeffs.T)).sum(axis=1)


def design_matrix(partition_net, basis: MonomialBasis, xs: np.ndarray) -> DenseMatrix:
    """Least-squares system for the coefficients at a frozen partition.

    Column (a, b) holds phi_a(x_i) * P_b(x_i) with the partition index
    major, matching ``coeffs.ravel()``.
    """
    phi = eval_partitions(partition_net, xs)
    basis_vals = basis.eval_batch(np.atleast_2d(np.asarray(xs, dtype=np.float64)))
    return assemble_design(phi, basis_vals)


def assemble_design(phi: np.ndarray, basis_vals: np.ndarray) -> DenseMatrix:
    """Combine precomputed partition and basis values into the design matrix."""
    n = phi.shape[0]
    if basis_vals.shape[0] != n:
        raise ValueError("partition and basis evaluations disagree on batch size")
    a = phi[:, :, None] * basis_vals[:, None, :]
    return DenseMatrix(a.reshape(n, -1))


def loss(model: PouModel, data: Dataset) -> float:
    """Sum of squared residuals over the dataset."""
    r = predict(model, data.xs) - data.ys
    return float(r @ r)


def loss_grad_xi(model: PouModel, data: Dataset) -> np.ndarray:
    """Gradient of the sum-of-squares loss with respect to the partition parameters.

    The coefficients are held fixed; the chain rule routes the residuals
    through the partition values as upstream[i, a] = 2 r_i * (c_a . P(x_i)).
    """
    basis_vals = model.basis.eval_batch(data.xs)
    per_part = basis_vals @ model.coeffs.T  # (n, n_part)
    phi = eval_partitions(model.partition_net, data.xs)
    r = (phi * per_part).sum(axis=1) - data.ys
    upstream = (2.0 * r)[:, None] * per_part
    return grad_partitions(model.partition_net, data.xs, upstream)


def save_checkpoint(model: PouModel, path, seed: int | None = None) -> None:
    """Write the model as JSON: architecture/basis header plus flat arrays."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "architecture": model.partition_net.manifest(),
        "basis": model.basis.descriptor(),
        "seed": seed,
        "xi": model.partition_net.get_params().tolist(),
        "coeffs": model.coeffs.ravel().tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_checkpoint(path) -> PouModel:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a model checkpoint: {path}")
    net = net_from_manifest(payload["architecture"])
    net.set_params(np.asarray(payload["xi"], dtype=np.float64))
    basis = MonomialBasis.from_descriptor(payload["basis"])
    coeffs = np.asarray(payload["coeffs"], dtype=np.float64).reshape(net.n_part, len(basis))
    return PouModel(net, basis, coeffs)
