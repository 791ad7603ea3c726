"""Benchmark targets, dataset generators, metrics, and diagnostics.

Target functions:

* a sine defined on a cross-shaped one-dimensional manifold embedded in
  [-1, 1]^2 (smooth benchmark);
* triangle waves TRI(x; q) = 2|qx - floor(qx + 1/2)| - 1 and their
  squares (piecewise linear / quadratic benchmarks). The wave-count
  parameter p of the experiment maps to formula frequency q = 2^(p-1),
  which yields exactly 2^p monotone pieces on [0, 1].

Also here: the scalar-output residual-network baseline trained by plain
full-batch Adam, the frozen-indicator-partition scaling oracle for the
piecewise polynomial error bound, and empirical partition-support
diagnostics.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .domain import Box, symmetric_box, unit_box
from .linalg import solve_least_squares
from .model import Dataset, design_matrix
from .optim import AdamState, TrainingError, TrainReport, adam_step, detect_collapse
from .pou import _trunk_backward, _trunk_forward
from .poly import MonomialBasis

WAVE_KINDS = ("tri_wave", "tri_wave_squared")


def tri_wave(x, p: int):
    """Triangle wave 2|px - floor(px + 1/2)| - 1; range [-1, 0]."""
    if p < 1:
        raise ValueError(f"frequency must be >= 1, got {p}")
    x = np.asarray(x, dtype=np.float64)
    value = 2.0 * np.abs(p * x - np.floor(p * x + 0.5)) - 1.0
    return value if value.ndim else float(value)


def tri_wave_squared(x, p: int):
    value = np.square(tri_wave(x, p))
    return value if isinstance(value, np.ndarray) else float(value)


def wave_frequency(p: int) -> int:
    """Formula frequency giving 2^p monotone pieces on [0, 1]."""
    if p < 1:
        raise ValueError(f"wave count parameter must be >= 1, got {p}")
    return 2 ** (p - 1)


def sine_cross(x) -> float:
    """sin(2 pi x1) on the x2 = 0 branch, sin(2 pi x2) on the x1 = 0 branch."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != 2:
        raise ValueError("cross-manifold points live in the plane")
    if x[1] == 0.0:
        return float(np.sin(2.0 * np.pi * x[0]))
    if x[0] == 0.0:
        return float(np.sin(2.0 * np.pi * x[1]))
    raise ValueError(f"point {x.tolist()} lies off the coordinate cross")


@dataclass(frozen=True)
class TargetFunction:
    """A named benchmark target evaluable on batches of points."""

    kind: str
    p: int = 1
    domain: Box = None
    fn: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("sine_cross", *WAVE_KINDS, "custom"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom targets need an explicit callable")
        if self.domain is None:
            dom = symmetric_box(2) if self.kind == "sine_cross" else unit_box(1)
            object.__setattr__(self, "domain", dom)

    def __call__(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        if self.kind == "sine_cross":
            return np.array([sine_cross(row) for row in xs])
        if self.kind == "custom":
            return np.asarray(self.fn(xs), dtype=np.float64).reshape(-1)
        q = wave_frequency(self.p)
        flat = xs.reshape(-1)
        return tri_wave(flat, q) if self.kind == "tri_wave" else tri_wave_squared(flat, q)


def make_cross_dataset(n_per_axis: int, mode: str = "grid", rng: np.random.Generator | None = None) -> Dataset:
    """Samples of the cross-manifold sine, n_per_axis points per axis.

    The default grid mode spaces samples evenly over [-1, 1] on each axis;
    the duplicated origin is removed on ingestion, so an odd n_per_axis
    yields 2 * n_per_axis - 1 points. Mode "uniform" draws iid samples
    instead (requires an rng).
    """
    if n_per_axis < 2:
        raise ValueError("need at least two samples per axis")
    if mode == "grid":
        t = np.linspace(-1.0, 1.0, n_per_axis)
    elif mode == "uniform":
        if rng is None:
            raise ValueError("uniform sampling requires an rng")
        t = rng.uniform(-1.0, 1.0, size=n_per_axis)
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    zeros = np.zeros_like(t)
    xs = np.concatenate([np.column_stack([t, zeros]), np.column_stack([zeros, t])])
    ys = np.sin(2.0 * np.pi * np.concatenate([t, t]))
    return Dataset.from_arrays(xs, ys)


def make_wave_dataset(p: int, n_data: int, kind: str, rng: np.random.Generator) -> Dataset:
    """Uniform iid samples on [0, 1] labeled by the triangle wave or its square."""
    if kind not in WAVE_KINDS:
        raise ValueError(f"wave kind must be one of {WAVE_KINDS}, got {kind!r}")
    if n_data < 1:
        raise ValueError("n_data must be >= 1")
    xs = rng.uniform(0.0, 1.0, size=n_data)
    target = TargetFunction(kind, p=p)
    return Dataset.from_arrays(xs[:, None], target(xs[:, None]))


def rms(yhat, y) -> float:
    """Root mean square of the residual."""
    yhat = np.asarray(yhat, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if yhat.shape != y.shape:
        raise ValueError("rms needs vectors of equal length")
    return float(np.sqrt(np.mean(np.square(yhat - y))))


def relative_l2(yhat, y) -> float:
    """||yhat - y||_2 / ||y||_2."""
    yhat = np.asarray(yhat, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if yhat.shape != y.shape:
        raise ValueError("relative_l2 needs vectors of equal length")
    denom = float(np.linalg.norm(y))
    if denom == 0.0:
        raise ValueError("relative error undefined for a zero reference")
    return float(np.linalg.norm(yhat - y) / denom)


class IndicatorPartition:
    """Frozen partition of [lo, hi] into uniform disjoint cells (1-D)."""

    def __init__(self, n_part: int, lo: float = 0.0, hi: float = 1.0):
        if n_part < 1:
            raise ValueError("need at least one cell")
        if not lo < hi:
            raise ValueError("empty interval")
        self.n_part = n_part
        self.lo = float(lo)
        self.hi = float(hi)
        self.dim_input = 1

    def partitions(self, xs: np.ndarray) -> np.ndarray:
        x = np.asarray(xs, dtype=np.float64).reshape(-1)
        cell = ((x - self.lo) / (self.hi - self.lo) * self.n_part).astype(int)
        cell = np.clip(cell, 0, self.n_part - 1)
        phi = np.zeros((x.shape[0], self.n_part))
        phi[np.arange(x.shape[0]), cell] = 1.0
        return phi


def theorem1_scaling_oracle(
    m: int,
    n_part_list: Sequence[int],
    target: Callable,
    n_data: int = 2048,
) -> list[tuple[int, float]]:
    """Training error of exact coefficient solves on frozen uniform partitions.

    No partition training happens: for each cell count an indicator
    partition of [0, 1] is fixed, the unregularized least-squares problem
    for degree-m coefficients is solved on an equispaced grid, and the RMS
    residual is recorded. For a smooth target the log-log slope against the
    cell count estimates -(m + 1).
    """
    xs = np.linspace(0.0, 1.0, n_data)[:, None]
    ys = np.asarray(target(xs[:, 0]), dtype=np.float64).reshape(-1)
    basis = MonomialBasis.for_box(1, m, unit_box(1))
    out = []
    for n_part in n_part_list:
        part = IndicatorPartition(int(n_part), 0.0, 1.0)
        a = design_matrix(part, basis, xs)
        cvec = solve_least_squares(a, ys, 0.0)
        out.append((int(n_part), rms(a.data @ cvec, ys)))
    return out


def fit_loglog_slope(pairs: Sequence[tuple[int, float]]) -> float:
    """Least-squares slope of log(error) against log(n)."""
    n = np.array([float(k) for k, _ in pairs])
    e = np.array([float(v) for _, v in pairs])
    if len(pairs) < 2:
        raise ValueError("need at least two points to fit a slope")
    if not (e > 0.0).all():
        raise ValueError("slope fit requires strictly positive errors")
    return float(np.polyfit(np.log(n), np.log(e), 1)[0])


@dataclass
class PartitionDiagnostics:
    """Empirical support sizes of each partition over a point cloud."""

    diameters: np.ndarray
    collapsed_count: int
    tau: float


def partition_diagnostics(partition_evals: np.ndarray, xs: np.ndarray, tau: float = 1e-3) -> PartitionDiagnostics:
    """Effective supports {x_i : phi_a(x_i) > tau} and their diameters.

    The diameter is the maximum pairwise distance within the support (zero
    for supports of at most one point); collapsed partitions are those
    whose maximum value over the cloud stays below tau.
    """
    phi = np.asarray(partition_evals, dtype=np.float64)
    pts = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    if phi.shape[0] != pts.shape[0]:
        raise ValueError("partition evaluations and points disagree on batch size")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"support threshold must lie in (0, 1), got {tau}")
    diameters = np.zeros(phi.shape[1])
    for alpha in range(phi.shape[1]):
        support = pts[phi[:, alpha] > tau]
        if support.shape[0] > 1:
            diameters[alpha] = float(pdist(support).max())
    return PartitionDiagnostics(diameters, len(detect_collapse(phi, tau)), tau)


class ScalarResNet:
    """The baseline regressor: the partition trunk with a scalar affine head."""

    architecture = "resnet_scalar"

    def __init__(self, w_in, b_in, blocks, w_out, b_out):
        self.w_in = np.asarray(w_in, dtype=np.float64)
        self.b_in = np.asarray(b_in, dtype=np.float64).reshape(-1)
        self.blocks = [
            (np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64).reshape(-1))
            for w, b in blocks
        ]
        self.w_out = np.asarray(w_out, dtype=np.float64).reshape(-1)
        self.b_out = float(b_out)

    @property
    def width(self) -> int:
        return self.w_in.shape[0]

    @property
    def depth(self) -> int:
        return len(self.blocks)

    @property
    def dim_input(self) -> int:
        return self.w_in.shape[1]

    @property
    def n_params(self) -> int:
        n = self.w_in.size + self.b_in.size + self.w_out.size + 1
        return n + sum(w.size + b.size for w, b in self.blocks)

    def get_params(self) -> np.ndarray:
        parts = [self.w_in.ravel(), self.b_in]
        for w, b in self.blocks:
            parts.extend([w.ravel(), b])
        parts.extend([self.w_out, np.array([self.b_out])])
        return np.concatenate(parts)

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if flat.shape[0] != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape[0]}")
        pos = 0

        def take(shape):
            nonlocal pos
            size = int(np.prod(shape))
            out = flat[pos:pos + size].reshape(shape).copy()
            pos += size
            return out

        self.w_in = take(self.w_in.shape)
        self.b_in = take(self.b_in.shape)
        self.blocks = [(take(w.shape), take(b.shape)) for w, b in self.blocks]
        self.w_out = take(self.w_out.shape)
        self.b_out = float(take((1,))[0])

    def predict(self, xs: np.ndarray) -> np.ndarray:
        h, _, _ = _trunk_forward(self.w_in, self.b_in, self.blocks, np.atleast_2d(xs))
        return h @ self.w_out + self.b_out

    def _mse_grad(self, xs, ys):
        h, inputs, masks = _trunk_forward(self.w_in, self.b_in, self.blocks, xs)
        yhat = h @ self.w_out + self.b_out
        r = yhat - ys
        dyhat = (2.0 / xs.shape[0]) * r
        dw_out = dyhat @ h
        db_out = dyhat.sum()
        dh = np.outer(dyhat, self.w_out)
        dw_in, db_in, dblocks = _trunk_backward(self.w_in, self.blocks, xs, inputs, masks, dh)
        parts = [dw_in.ravel(), db_in]
        for dw, db in dblocks:
            parts.extend([dw.ravel(), db])
        parts.extend([dw_out, np.array([db_out])])
        return float(r @ r), np.concatenate(parts)

    def manifest(self) -> dict:
        return {
            "architecture": self.architecture,
            "dim_input": self.dim_input,
            "width": self.width,
            "depth": self.depth,
        }


def _glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_scalar_resnet(width: int, depth: int, d: int, rng: np.random.Generator) -> ScalarResNet:
    """Conventional initialization of the baseline regressor.

    Every weight matrix is Glorot-uniform and every bias starts at zero,
    mirroring the stock dense-layer defaults of mainstream frameworks. The
    baseline deliberately does not share the partition network's
    geometry-aware initialization; it stands in for an off-the-shelf
    residual regressor.
    """
    if width < 1 or depth < 1:
        raise ValueError("width and depth must be >= 1")
    w_in = _glorot_uniform(rng, d, width, (width, d))
    blocks = [
        (_glorot_uniform(rng, width, width, (width, width)), np.zeros(width))
        for _ in range(depth)
    ]
    w_out = _glorot_uniform(rng, width, 1, width)
    return ScalarResNet(w_in, np.zeros(width), blocks, w_out, 0.0)


def baseline_resnet_fit(
    data: Dataset,
    width: int,
    depth: int,
    epochs: int,
    lr: float,
    rng: np.random.Generator,
):
    """Full-batch Adam regression with the scalar-head residual network.

    Returns the parameters with the best training loss over the epoch
    budget together with a report. Raises TrainingError (carrying the
    partial report) if the loss turns non-finite.
    """
    net = init_scalar_resnet(width, depth, data.dim_input, rng)
    xs, ys = data.xs, data.ys
    n = data.n_data
    y_norm = float(np.linalg.norm(ys))

    t_start = time.perf_counter()
    params = net.get_params()
    adam = AdamState.fresh(params.shape[0], lr)
    report = TrainReport(n_data=n)
    best_mse = np.inf
    best_params = params.copy()
    for epoch in range(epochs):
        sum_sq, grad = net._mse_grad(xs, ys)
        if not np.isfinite(sum_sq):
            raise TrainingError(f"baseline diverged at epoch {epoch}", epoch=epoch, report=report)
        mse = sum_sq / n
        report.loss_trace.append(mse)
        report.rel_l2_trace.append(float(np.sqrt(sum_sq) / y_norm) if y_norm > 0 else float("nan"))
        if mse < best_mse:
            best_mse = mse
            best_params = params.copy()
            report.best_epoch = epoch
        adam, params = adam_step(adam, params, grad)
        net.set_params(params)

    net.set_params(best_params)
    yhat = net.predict(xs)
    report.final_rms = rms(yhat, ys)
    report.final_rel_l2 = relative_l2(yhat, ys) if y_norm > 0 else float("nan")
    report.wall_time = time.perf_counter() - t_start
    return net, report


def save_dataset_csv(data: Dataset, path) -> None:
    """Write samples as CSV with header x1..xd,y at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(data.dim_input)] + ["y"])
        for row, y in zip(data.xs, data.ys):
            writer.writerow([f"{v:.17g}" for v in row] + [f"{y:.17g}"])


def load_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "y":
            raise ValueError(f"{path}: expected a trailing y column")
        rows = [[float(v) for v in row] for row in reader if row]
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != len(header):
        raise ValueError(f"{path}: malformed data rows")
    return Dataset.from_arrays(arr[:, :-1], arr[:, -1])
