"""POU model assembly: prediction, design matrix, loss, checkpoints."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pounet.domain import symmetric_box
from pounet.model import (
    CHECKPOINT_FORMAT,
    Dataset,
    PouModel,
    design_matrix,
    init_coeffs,
    load_checkpoint,
    loss,
    loss_grad_xi,
    predict,
    save_checkpoint,
)
from pounet.poly import MonomialBasis
from pounet.pou import RbfNet, grad_partitions


def small_model(seed=0, n_part=3, d=2, m_max=2):
    rng = np.random.default_rng(seed)
    net = RbfNet(rng.normal(size=(n_part, d)), rng.normal(scale=0.3, size=n_part))
    basis = MonomialBasis.for_box(d, m_max, symmetric_box(d))
    return PouModel(net, basis, rng.normal(size=(n_part, len(basis))))


class TestDataset:
    def test_reshapes_1d_inputs(self):
        data = Dataset.from_arrays(np.array([0.0, 0.5, 1.0]), np.array([1.0, 2.0, 3.0]))
        assert data.xs.shape == (3, 1)
        assert data.dim_input == 1
        assert data.n_data == 3

    def test_removes_duplicate_rows_keeping_first(self):
        xs = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
        ys = np.array([5.0, 6.0, 7.0])
        data = Dataset.from_arrays(xs, ys)
        assert data.n_data == 2
        # the first occurrence's label survives
        i = np.flatnonzero((data.xs == 0.0).all(axis=1))[0]
        assert data.ys[i] == 5.0

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Dataset.from_arrays(np.array([[np.nan]]), np.array([0.0]))
        with pytest.raises(ValueError):
            Dataset.from_arrays(np.array([[1.0]]), np.array([np.inf]))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset.from_arrays(np.zeros((3, 1)), np.zeros(4))


class TestPrediction:
    def test_matches_triple_sum(self):
        """predict equals the explicit sum over partitions and monomials."""
        model = small_model(seed=1)
        rng = np.random.default_rng(2)
        xs = rng.normal(size=(12, 2))
        phi = model.partition_net.partitions(xs)
        expected = np.zeros(12)
        for i in range(12):
            for alpha in range(model.partition_net.n_part):
                poly = sum(
                    model.coeffs[alpha, beta] * model.basis.eval_point(xs[i])[beta]
                    for beta in range(len(model.basis))
                )
                expected[i] += phi[i, alpha] * poly
        assert_allclose(predict(model, xs), expected, rtol=1e-12)

    def test_design_matrix_consistency(self):
        """A @ vec(c) reproduces predict to near machine precision."""
        model = small_model(seed=3)
        xs = np.random.default_rng(4).normal(size=(20, 2))
        a = design_matrix(model.partition_net, model.basis, xs)
        assert a.rows == 20
        assert a.cols == model.partition_net.n_part * len(model.basis)
        assert_allclose(a.data @ model.coeffs.ravel(), predict(model, xs), atol=1e-12)

    def test_design_matrix_partition_major_layout(self):
        model = small_model(seed=5, n_part=2, m_max=1)
        xs = np.random.default_rng(6).normal(size=(8, 2))
        a = design_matrix(model.partition_net, model.basis, xs)
        phi = model.partition_net.partitions(xs)
        vals = model.basis.eval_batch(xs)
        # column alpha * dimV + beta holds phi_alpha * P_beta
        for alpha in range(2):
            for beta in range(len(model.basis)):
                assert_allclose(a.data[:, alpha * len(model.basis) + beta],
                                phi[:, alpha] * vals[:, beta], rtol=1e-14)

    def test_coeff_shape_validated(self):
        model = small_model()
        with pytest.raises(ValueError):
            PouModel(model.partition_net, model.basis, np.zeros((2, 2)))


class TestLoss:
    def test_sum_of_squares_hand_value(self):
        model = small_model(seed=7)
        rng = np.random.default_rng(8)
        xs = rng.normal(size=(10, 2))
        yhat = predict(model, xs)
        ys = yhat + 0.5  # constant residual of 0.5 at 10 points -> loss 2.5
        data = Dataset.from_arrays(xs, ys)
        assert loss(model, data) == pytest.approx(10 * 0.25)

    def test_zero_at_interpolation(self):
        model = small_model(seed=9)
        xs = np.random.default_rng(10).normal(size=(6, 2))
        data = Dataset.from_arrays(xs, predict(model, xs))
        assert loss(model, data) == pytest.approx(0.0, abs=1e-18)

    @pytest.mark.parametrize("seed", range(3))
    def test_xi_gradient_matches_fd(self, seed):
        model = small_model(seed=20 + seed)
        rng = np.random.default_rng(40 + seed)
        xs = rng.normal(size=(7, 2))
        data = Dataset.from_arrays(xs, rng.normal(size=7))
        analytic = loss_grad_xi(model, data)

        net = model.partition_net
        params = net.get_params()
        step = 1e-6
        numeric = np.zeros_like(params)
        for k in range(params.shape[0]):
            for sign in (1.0, -1.0):
                bumped = params.copy()
                bumped[k] += sign * step
                net.set_params(bumped)
                numeric[k] += sign * loss(model, data)
            net.set_params(params)
        numeric /= 2 * step
        assert np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric) < 1e-5


class TestInitCoeffs:
    def test_shape_and_determinism(self):
        basis = MonomialBasis.for_box(2, 2, symmetric_box(2))
        a = init_coeffs(4, basis, np.random.default_rng(3))
        b = init_coeffs(4, basis, np.random.default_rng(3))
        assert a.shape == (4, len(basis))
        assert_allclose(a, b, rtol=0, atol=0)


class TestCheckpoint:
    def test_round_trip_preserves_predictions(self, tmp_path):
        model = small_model(seed=11)
        xs = np.random.default_rng(12).normal(size=(9, 2))
        path = tmp_path / "model.json"
        save_checkpoint(model, path, seed=42)
        loaded = load_checkpoint(path)
        assert_allclose(predict(loaded, xs), predict(model, xs), rtol=0, atol=0)

    def test_format_tag_present(self, tmp_path):
        import json

        model = small_model()
        path = tmp_path / "model.json"
        save_checkpoint(model, path)
        payload = json.loads(path.read_text())
        assert payload["format"] == CHECKPOINT_FORMAT
        assert payload["architecture"]["architecture"] == "rbf"

    def test_rejects_unknown_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(ValueError):
            load_checkpoint(path)
