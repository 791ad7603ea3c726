"""Training loops: Adam, LSGD, and the two-phase LSGD wrapper.

LSGD alternates, once per epoch, a globally optimal (optionally ridge
regularized) least-squares solve for the polynomial coefficients with one
Adam step on the partition parameters. When the best training loss has not
improved for ``n_stag`` consecutive epochs the ridge weight decays by the
factor ``rho``; setting the ridge weight to zero recovers plain LSGD. After
the epoch loop the coefficients are re-solved without regularization.

The two-phase wrapper runs a regularized pre-training pass (shaping
quasi-uniform partitions and discouraging partition collapse) and feeds its
final state into an unregularized pass.

Internally the optimized objective is the mean squared error, so learning
rates transfer across dataset sizes; reports carry both the MSE traces and
relative l2 errors.
"""

from __future__ import annotations

import copy
import csv
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .linalg import solve_least_squares
from .model import Dataset, PouModel, assemble_design, predict
from .pou import eval_partitions, grad_partitions

# Best-so-far loss must improve by this relative margin to reset stagnation.
STAGNATION_RTOL = 1e-12


class TrainingError(RuntimeError):
    """Raised when a training loop hits a non-finite loss or a solver failure."""

    def __init__(self, message: str, epoch: int | None = None, report: "TrainReport | None" = None):
        super().__init__(message)
        self.epoch = epoch
        self.report = report


@dataclass
class AdamState:
    """Moment estimates and step counter for one flat parameter vector."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n_params: int, lr: float, **kwargs) -> "AdamState":
        if lr <= 0.0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        return cls(np.zeros(n_params), np.zeros(n_params), 0, lr, **kwargs)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray):
    """One bias-corrected Adam update; returns (new state, new params)."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape or params.shape != state.first_moment.shape:
        raise ValueError("parameter, gradient, and moment lengths must agree")
    if not np.isfinite(grad).all():
        bad = int(np.flatnonzero(~np.isfinite(grad))[0])
        raise ValueError(f"non-finite gradient (first bad component {bad})")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, first_moment=m, second_moment=v, step_count=t), new_params


@dataclass(frozen=True)
class LsgdConfig:
    """Hyperparameters of one LSGD pass.

    ``lam`` is the ridge weight on the coefficient solve, ``rho`` the decay
    factor applied when the best training loss stagnates for ``n_stag``
    consecutive epochs.
    """

    n_epoch: int
    lr: float = 1e-3
    lam: float = 0.0
    rho: float = 0.9
    n_stag: int = 1000

    def __post_init__(self):
        if self.n_epoch < 0:
            raise ValueError("n_epoch must be >= 0")
        if self.lr <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.lam < 0.0:
            raise ValueError("ridge weight must be nonnegative")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.n_stag < 1:
            raise ValueError("n_stag must be >= 1")


@dataclass
class TrainReport:
    """Per-epoch traces and summary metrics of one training run.

    ``loss_trace`` holds the MSE evaluated after the gradient step of each
    epoch (with that epoch's coefficients); ``ls_loss_trace`` holds the MSE
    directly after each least-squares solve, which is the quantity used for
    best-model selection and stagnation detection. For the gradient-only
    baseline ``ls_loss_trace`` is empty.
    """

    loss_trace: list = field(default_factory=list)
    ls_loss_trace: list = field(default_factory=list)
    lambda_trace: list = field(default_factory=list)
    rel_l2_trace: list = field(default_factory=list)
    best_epoch: int = 0
    final_rel_l2: float = float("nan")
    final_rms: float = float("nan")
    n_data: int = 0
    phase_boundary: int | None = None
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "loss_trace": [float(v) for v in self.loss_trace],
            "ls_loss_trace": [float(v) for v in self.ls_loss_trace],
            "lambda_trace": [float(v) for v in self.lambda_trace],
            "rel_l2_trace": [float(v) for v in self.rel_l2_trace],
            "best_epoch": int(self.best_epoch),
            "final_rel_l2": float(self.final_rel_l2),
            "final_rms": float(self.final_rms),
            "n_data": int(self.n_data),
            "phase_boundary": self.phase_boundary,
            "wall_time": float(self.wall_time),
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    def write_trace_csv(self, path) -> None:
        """Per-epoch trace as CSV columns (epoch, loss, lambda, rel_l2)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "lambda", "rel_l2"])
            lams = self.lambda_trace or [0.0] * len(self.loss_trace)
            for i, (mse, lam, rel) in enumerate(zip(self.loss_trace, lams, self.rel_l2_trace)):
                writer.writerow([i, f"{mse:.17g}", f"{lam:.17g}", f"{rel:.17g}"])


@dataclass
class LsgdRun:
    """Full outcome of one LSGD pass.

    ``best_model`` is the state with the lowest post-solve training loss;
    ``exit_model`` is the literal final-epoch state (coefficients re-solved
    without regularization), which is what chains into a follow-up phase.
    """

    best_model: PouModel
    exit_model: PouModel
    report: TrainReport


def _resolve_at(net, basis_vals, basis, xs, ys, params):
    """Unregularized coefficient solve at the given partition parameters."""
    net.set_params(params)
    phi = eval_partitions(net, xs)
    a = assemble_design(phi, basis_vals)
    cvec = solve_least_squares(a, ys, 0.0)
    residual = a.data @ cvec - ys
    return cvec, residual


def run_lsgd(model: PouModel, data: Dataset, cfg: LsgdConfig) -> LsgdRun:
    """One LSGD pass; the input model is left untouched."""
    t_start = time.perf_counter()
    net = copy.deepcopy(model.partition_net)
    basis = model.basis
    n_part = net.n_part
    xs, ys = data.xs, data.ys
    n = data.n_data
    y_norm = float(np.linalg.norm(ys))
    basis_vals = basis.eval_batch(xs)

    params = net.get_params()
    adam = AdamState.fresh(params.shape[0], cfg.lr)
    lam = cfg.lam
    stag = 0
    best_mse = np.inf
    best_params = params.copy()
    best_epoch = 0
    prev_cvec = None

    report = TrainReport(n_data=n)

    def rel_l2_of(sum_sq):
        return float(np.sqrt(sum_sq) / y_norm) if y_norm > 0.0 else float("nan")

    def record_post_gd(a_data):
        # post-step loss of the previous epoch, evaluated with its coefficients
        r = a_data @ prev_cvec - ys
        sum_sq = float(r @ r)
        report.loss_trace.append(sum_sq / n)
        report.rel_l2_trace.append(rel_l2_of(sum_sq))

    for epoch in range(cfg.n_epoch):
        try:
            phi = eval_partitions(net, xs)
            a = assemble_design(phi, basis_vals)
        except ValueError as exc:
            raise TrainingError(f"partition evaluation failed at epoch {epoch}: {exc}",
                                epoch=epoch, report=report) from exc
        if not np.isfinite(phi).all():
            raise TrainingError(f"non-finite partition values at epoch {epoch}",
                                epoch=epoch, report=report)
        if prev_cvec is not None:
            record_post_gd(a.data)

        try:
            cvec = solve_least_squares(a, ys, lam)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise TrainingError(f"least-squares solve failed at epoch {epoch}: {exc}",
                                epoch=epoch, report=report) from exc
        residual = a.data @ cvec - ys
        with np.errstate(over="ignore"):  # overflow to inf is caught right below
            ls_sum_sq = float(residual @ residual)
        if not np.isfinite(ls_sum_sq):
            raise TrainingError(f"non-finite loss at epoch {epoch}", epoch=epoch, report=report)
        ls_mse = ls_sum_sq / n
        report.ls_loss_trace.append(ls_mse)
        report.lambda_trace.append(lam)

        improved = ls_mse < best_mse * (1.0 - STAGNATION_RTOL)
        if ls_mse < best_mse:
            best_mse = ls_mse
            best_params = params.copy()
            best_epoch = epoch
        stag = 0 if improved else stag + 1

        # gradient step on the partition parameters at the fresh coefficients
        per_part = basis_vals @ cvec.reshape(n_part, -1).T
        upstream = (2.0 / n * residual)[:, None] * per_part
        grad = grad_partitions(net, xs, upstream)
        try:
            adam, params = adam_step(adam, params, grad)
        except ValueError as exc:
            raise TrainingError(f"{exc} at epoch {epoch}", epoch=epoch, report=report) from exc
        net.set_params(params)
        prev_cvec = cvec

        if stag >= cfg.n_stag:
            lam *= cfg.rho
            stag = 0

    if prev_cvec is not None:
        phi = eval_partitions(net, xs)
        record_post_gd(assemble_design(phi, basis_vals).data)

    # final-epoch state with coefficients re-solved at lam = 0
    exit_cvec, _ = _resolve_at(net, basis_vals, basis, xs, ys, params)
    exit_model = PouModel(copy.deepcopy(net), basis, exit_cvec.reshape(n_part, -1))

    # best recorded state, same unregularized re-solve
    best_cvec, best_residual = _resolve_at(net, basis_vals, basis, xs, ys, best_params)
    best_model = PouModel(net, basis, best_cvec.reshape(n_part, -1))

    sum_sq = float(best_residual @ best_residual)
    report.best_epoch = best_epoch
    report.final_rel_l2 = rel_l2_of(sum_sq)
    report.final_rms = float(np.sqrt(sum_sq / n))
    report.wall_time = time.perf_counter() - t_start
    return LsgdRun(best_model, exit_model, report)


def lsgd(model: PouModel, data: Dataset, cfg: LsgdConfig):
    """LSGD training; returns the model with the best training loss and a report."""
    run = run_lsgd(model, data, cfg)
    return run.best_model, run.report


def two_phase_lsgd(model: PouModel, data: Dataset, cfg_pre: LsgdConfig, cfg_main: LsgdConfig):
    """Regularized pre-training followed by an unregularized LSGD pass.

    The second phase always runs with zero ridge weight and annealing
    disabled, regardless of what ``cfg_main`` carries, and starts from the
    final-epoch state of phase one. Returns the second phase's best model
    and a concatenated report with ``phase_boundary`` marking the split.
    """
    cfg_main = replace(cfg_main, lam=0.0, rho=0.0, n_stag=max(1, cfg_main.n_epoch))
    pre = run_lsgd(model, data, cfg_pre)
    main = run_lsgd(pre.exit_model, data, cfg_main)

    boundary = len(pre.report.ls_loss_trace)
    combined = TrainReport(
        loss_trace=pre.report.loss_trace + main.report.loss_trace,
        ls_loss_trace=pre.report.ls_loss_trace + main.report.ls_loss_trace,
        lambda_trace=pre.report.lambda_trace + main.report.lambda_trace,
        rel_l2_trace=pre.report.rel_l2_trace + main.report.rel_l2_trace,
        best_epoch=boundary + main.report.best_epoch,
        final_rel_l2=main.report.final_rel_l2,
        final_rms=main.report.final_rms,
        n_data=main.report.n_data,
        phase_boundary=boundary,
        wall_time=pre.report.wall_time + main.report.wall_time,
    )
    return main.best_model, combined


def detect_collapse(partition_evals: np.ndarray, tau: float) -> list[int]:
    """Indices of partitions whose maximum over the data lies below tau."""
    phi = np.asarray(partition_evals, dtype=np.float64)
    if phi.ndim != 2:
        raise ValueError("partition evaluations must be a 2-D matrix")
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"collapse threshold must lie in [0, 1), got {tau}")
    return [int(i) for i in np.flatnonzero(phi.max(axis=0) < tau)]
