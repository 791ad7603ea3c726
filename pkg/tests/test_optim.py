"""Optimizer tests: Adam arithmetic, LSGD bookkeeping, two-phase chaining.

The Adam oracle is an independent straight-line reimplementation of the
update rule; LSGD expectations (ridge decay cadence, best-model choice)
are derived by hand from the algorithm's bookkeeping rules.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pounet.domain import unit_box
from pounet.model import Dataset, PouModel, init_coeffs, loss, predict
from pounet.optim import (
    AdamState,
    LsgdConfig,
    TrainingError,
    TrainReport,
    adam_step,
    detect_collapse,
    lsgd,
    run_lsgd,
    two_phase_lsgd,
)
from pounet.poly import MonomialBasis
from pounet.pou import RbfNet, init_rbf


def adam_oracle(params, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Textbook Adam, written independently of the implementation."""
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    p = params.copy()
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        p = p - lr * (m / (1 - beta1 ** t)) / (np.sqrt(v / (1 - beta2 ** t)) + eps)
    return p


def small_problem(seed=0, n_part=2, m_max=1, n_data=40):
    rng = np.random.default_rng(seed)
    dom = unit_box(1)
    xs = rng.uniform(0, 1, size=(n_data, 1))
    ys = np.sin(3 * xs[:, 0]) + 0.2 * xs[:, 0]
    data = Dataset.from_arrays(xs, ys)
    net = init_rbf(n_part, 1, dom, rng)
    basis = MonomialBasis.for_box(1, m_max, dom)
    model = PouModel(net, basis, init_coeffs(n_part, basis, rng))
    return model, data


class TestAdam:
    def test_first_step_hand_value(self):
        # after one step m_hat = g and v_hat = g^2, so the update is
        # lr * g / (|g| + eps): one signed learning rate per coordinate
        state = AdamState.fresh(2, lr=0.1)
        params = np.array([1.0, -2.0])
        state, new = adam_step(state, params, np.array([3.0, -4.0]))
        assert_allclose(new, [1.0 - 0.1, -2.0 + 0.1], rtol=1e-7)
        assert state.step_count == 1

    def test_matches_oracle_over_steps(self):
        rng = np.random.default_rng(15)
        params = rng.normal(size=5)
        grads = [rng.normal(size=5) for _ in range(7)]
        state = AdamState.fresh(5, lr=0.05)
        p = params
        for g in grads:
            state, p = adam_step(state, p, g)
        assert_allclose(p, adam_oracle(params, grads, lr=0.05), rtol=1e-12)

    def test_rejects_shape_mismatch(self):
        state = AdamState.fresh(3, lr=0.1)
        with pytest.raises(ValueError):
            adam_step(state, np.zeros(3), np.zeros(4))

    def test_rejects_non_finite_gradient(self):
        state = AdamState.fresh(2, lr=0.1)
        with pytest.raises(ValueError, match="non-finite"):
            adam_step(state, np.zeros(2), np.array([1.0, np.nan]))

    def test_rejects_non_positive_lr(self):
        with pytest.raises(ValueError):
            AdamState.fresh(2, lr=0.0)


class TestLsgdConfig:
    @pytest.mark.parametrize("kwargs", [
        {"n_epoch": -1},
        {"n_epoch": 5, "lr": 0.0},
        {"n_epoch": 5, "lam": -1.0},
        {"n_epoch": 5, "rho": 1.5},
        {"n_epoch": 5, "n_stag": 0},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            LsgdConfig(**kwargs)


class TestLsgd:
    def test_traces_have_epoch_length(self):
        model, data = small_problem()
        _, report = lsgd(model, data, LsgdConfig(n_epoch=8, lr=1e-2))
        assert len(report.ls_loss_trace) == 8
        assert len(report.loss_trace) == 8
        assert len(report.lambda_trace) == 8
        assert len(report.rel_l2_trace) == 8
        assert report.n_data == data.n_data

    def test_best_model_matches_trace_minimum(self):
        model, data = small_problem(seed=1)
        best, report = lsgd(model, data, LsgdConfig(n_epoch=30, lr=5e-2))
        assert report.best_epoch == int(np.argmin(report.ls_loss_trace))
        # at lam = 0 the re-solve at the best parameters reproduces that loss
        assert loss(best, data) / data.n_data == pytest.approx(
            min(report.ls_loss_trace), rel=1e-10)

    def test_input_model_untouched(self):
        model, data = small_problem(seed=2)
        before = model.partition_net.get_params().copy()
        coeffs_before = model.coeffs.copy()
        lsgd(model, data, LsgdConfig(n_epoch=5, lr=1e-2))
        assert_allclose(model.partition_net.get_params(), before, rtol=0, atol=0)
        assert_allclose(model.coeffs, coeffs_before, rtol=0, atol=0)

    def test_deterministic(self):
        model, data = small_problem(seed=3)
        best_a, rep_a = lsgd(model, data, LsgdConfig(n_epoch=12, lr=1e-2))
        best_b, rep_b = lsgd(model, data, LsgdConfig(n_epoch=12, lr=1e-2))
        assert rep_a.ls_loss_trace == rep_b.ls_loss_trace
        assert_allclose(best_a.coeffs, best_b.coeffs, rtol=0, atol=0)

    def test_rho_irrelevant_when_unregularized(self):
        model, data = small_problem(seed=4)
        _, rep_a = lsgd(model, data, LsgdConfig(n_epoch=10, lr=1e-2, lam=0.0, rho=0.9))
        _, rep_b = lsgd(model, data, LsgdConfig(n_epoch=10, lr=1e-2, lam=0.0, rho=0.1))
        assert rep_a.ls_loss_trace == rep_b.ls_loss_trace
        assert rep_a.lambda_trace == [0.0] * 10

    def test_ridge_decay_cadence(self):
        """With frozen parameters the ridge weight halves every other epoch.

        A vanishing learning rate freezes the partition, so each solve at a
        given ridge weight repeats the previous loss exactly (stagnation),
        the weight decays, and the decayed solve improves the loss again.
        """
        model, data = small_problem(seed=5)
        cfg = LsgdConfig(n_epoch=5, lr=1e-300, lam=0.8, rho=0.5, n_stag=1)
        _, report = lsgd(model, data, cfg)
        assert_allclose(report.lambda_trace, [0.8, 0.8, 0.4, 0.4, 0.2], rtol=1e-15)

    def test_final_resolve_is_unregularized(self):
        # heavy ridge during training, but the returned model's loss matches
        # a direct lam = 0 solve at the final partition
        model, data = small_problem(seed=6)
        best, report = lsgd(model, data, LsgdConfig(n_epoch=4, lr=1e-300, lam=50.0))
        # with frozen partitions the best model is the unregularized solve
        from pounet.linalg import solve_least_squares
        from pounet.model import design_matrix

        a = design_matrix(model.partition_net, model.basis, data.xs)
        cvec = solve_least_squares(a, data.ys, 0.0)
        r = a.data @ cvec - data.ys
        assert loss(best, data) == pytest.approx(float(r @ r), rel=1e-10)

    def test_perturbing_coefficients_cannot_improve(self):
        model, data = small_problem(seed=7)
        best, _ = lsgd(model, data, LsgdConfig(n_epoch=10, lr=1e-2))
        base = loss(best, data)
        rng = np.random.default_rng(70)
        for _ in range(10):
            bumped = PouModel(best.partition_net, best.basis,
                              best.coeffs + 1e-3 * rng.normal(size=best.coeffs.shape))
            assert loss(bumped, data) >= base - 1e-10 * max(base, 1.0)

    def test_divergence_raises_training_error(self):
        rng = np.random.default_rng(8)
        xs = rng.uniform(0, 1, size=(30, 1))
        ys = np.where(rng.uniform(size=30) > 0.5, 1e200, -1e200)
        data = Dataset.from_arrays(xs, ys)
        model, _ = small_problem(seed=8)
        with pytest.raises(TrainingError) as excinfo:
            lsgd(model, data, LsgdConfig(n_epoch=3, lr=1e-2))
        assert excinfo.value.epoch == 0
        assert excinfo.value.report is not None

    def test_zero_epochs_solves_once(self):
        model, data = small_problem(seed=9)
        best, report = lsgd(model, data, LsgdConfig(n_epoch=0))
        assert report.ls_loss_trace == []
        # coefficients are still the optimal lam = 0 solve at the initial partition
        base = loss(best, data)
        rng = np.random.default_rng(90)
        for _ in range(5):
            bumped = PouModel(best.partition_net, best.basis,
                              best.coeffs + 1e-4 * rng.normal(size=best.coeffs.shape))
            assert loss(bumped, data) >= base - 1e-12 * max(base, 1.0)


class TestTwoPhase:
    def test_second_phase_forced_unregularized(self):
        model, data = small_problem(seed=10)
        cfg_pre = LsgdConfig(n_epoch=6, lr=1e-2, lam=0.5, rho=0.9, n_stag=2)
        cfg_main = LsgdConfig(n_epoch=7, lr=1e-2, lam=3.0, rho=0.5, n_stag=1)
        _, report = two_phase_lsgd(model, data, cfg_pre, cfg_main)
        assert report.phase_boundary == 6
        assert len(report.ls_loss_trace) == 13
        assert report.lambda_trace[:6] == [0.5] * 6
        assert report.lambda_trace[6:] == [0.0] * 7

    def test_empty_main_phase_returns_phase_one_exit(self):
        model, data = small_problem(seed=11)
        cfg_pre = LsgdConfig(n_epoch=5, lr=1e-2, lam=0.3)
        best, report = two_phase_lsgd(model, data, cfg_pre, LsgdConfig(n_epoch=0))
        exit_model = run_lsgd(model, data, cfg_pre).exit_model
        assert_allclose(predict(best, data.xs), predict(exit_model, data.xs), rtol=1e-13)
        assert report.phase_boundary == 5

    def test_best_epoch_offset_into_second_phase(self):
        model, data = small_problem(seed=12)
        _, report = two_phase_lsgd(
            model, data,
            LsgdConfig(n_epoch=4, lr=1e-2, lam=1.0),
            LsgdConfig(n_epoch=6, lr=1e-2),
        )
        assert report.best_epoch >= report.phase_boundary
        main_trace = report.ls_loss_trace[report.phase_boundary:]
        assert report.best_epoch == report.phase_boundary + int(np.argmin(main_trace))

    def test_matches_manual_chaining(self):
        model, data = small_problem(seed=13)
        cfg_pre = LsgdConfig(n_epoch=5, lr=1e-2, lam=0.2)
        cfg_main = LsgdConfig(n_epoch=5, lr=1e-2)
        best, _ = two_phase_lsgd(model, data, cfg_pre, cfg_main)
        pre = run_lsgd(model, data, cfg_pre)
        manual_best, _ = lsgd(pre.exit_model, data, cfg_main)
        assert_allclose(predict(best, data.xs), predict(manual_best, data.xs), rtol=1e-13)


class TestDetectCollapse:
    def test_flags_small_columns(self):
        phi = np.array([[0.5, 0.5 - 1e-6, 1e-6], [0.9, 0.1 - 1e-6, 1e-6]])
        assert detect_collapse(phi, 1e-3) == [2]

    def test_zero_threshold_never_flags(self):
        rng = np.random.default_rng(2)
        phi = rng.uniform(size=(10, 4))
        assert detect_collapse(phi, 0.0) == []

    def test_validation(self):
        with pytest.raises(ValueError):
            detect_collapse(np.zeros((2, 2)), 1.0)
        with pytest.raises(ValueError):
            detect_collapse(np.zeros(4), 0.5)


class TestTrainReport:
    def test_trace_csv_round_trip(self, tmp_path):
        report = TrainReport(
            loss_trace=[1.0, 0.5], ls_loss_trace=[0.9, 0.4],
            lambda_trace=[0.1, 0.05], rel_l2_trace=[0.3, 0.2], n_data=10,
        )
        path = tmp_path / "trace.csv"
        report.write_trace_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,loss,lambda,rel_l2"
        assert len(lines) == 3
        assert lines[1].startswith("0,1,")

    def test_to_dict_keys(self):
        keys = TrainReport().to_dict().keys()
        for name in ("loss_trace", "ls_loss_trace", "best_epoch", "final_rel_l2", "wall_time"):
            assert name in keys
