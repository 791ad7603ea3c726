"""Monomial basis enumeration and evaluation tests.

The enumeration oracle below regenerates the exponent set by brute force
(itertools over all tuples up to the degree cap) so the graded ordering
and the dimension formula are checked against an independent source.
"""

import itertools
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pounet.domain import Box
from pounet.poly import MonomialBasis, basis_dim, monomial_exponents


def brute_force_exponents(d, m_max):
    """All exponent tuples with total degree <= m_max, unordered."""
    out = set()
    for tup in itertools.product(range(m_max + 1), repeat=d):
        if sum(tup) <= m_max:
            out.add(tup)
    return out


class TestEnumeration:
    @pytest.mark.parametrize("d,m_max", [(1, 0), (1, 4), (2, 3), (3, 2), (4, 3), (5, 2)])
    def test_dimension_formula(self, d, m_max):
        expected = len(brute_force_exponents(d, m_max))
        assert basis_dim(d, m_max) == expected
        assert basis_dim(d, m_max) == math.comb(m_max + d, d)

    @pytest.mark.parametrize("d,m_max", [(1, 3), (2, 2), (3, 3), (4, 2)])
    def test_exponent_set_complete_and_unique(self, d, m_max):
        exps = monomial_exponents(d, m_max)
        assert len(exps) == len(set(exps))
        assert set(exps) == brute_force_exponents(d, m_max)

    def test_graded_order(self):
        exps = monomial_exponents(3, 3)
        degrees = [sum(e) for e in exps]
        assert degrees == sorted(degrees)

    def test_2d_degree1_order(self):
        # constant first, then x1, then x2
        assert list(monomial_exponents(2, 1)) == [(0, 0), (1, 0), (0, 1)]

    def test_2d_degree2_block(self):
        exps = monomial_exponents(2, 2)
        assert list(exps[3:]) == [(2, 0), (1, 1), (0, 2)]

    def test_validation(self):
        with pytest.raises(ValueError):
            monomial_exponents(0, 2)
        with pytest.raises(ValueError):
            basis_dim(2, -1)


class TestEvaluation:
    def test_point_values_2d(self):
        basis = MonomialBasis.raw(2, 1)
        assert_allclose(basis.eval_point(np.array([3.0, 5.0])), [1.0, 3.0, 5.0])

    def test_batch_matches_raw_products(self):
        rng = np.random.default_rng(17)
        basis = MonomialBasis.raw(3, 4)
        xs = rng.normal(size=(20, 3))
        vals = basis.eval_batch(xs)
        assert vals.shape == (20, len(basis))
        for j, e in enumerate(basis.exponents):
            assert_allclose(vals[:, j], np.prod(xs ** np.array(e), axis=1), rtol=1e-13)

    def test_batch_matches_eval_point(self):
        rng = np.random.default_rng(5)
        basis = MonomialBasis.for_box(2, 3, Box([-1.0, -1.0], [1.0, 1.0]))
        xs = rng.uniform(-1, 1, size=(9, 2))
        vals = basis.eval_batch(xs)
        for i, x in enumerate(xs):
            assert_allclose(vals[i], basis.eval_point(x), rtol=1e-14)

    def test_box_centering(self):
        # box [0, 2]: midpoint 1, half-width 1, so the degree-1 monomial is x - 1
        basis = MonomialBasis.for_box(1, 1, Box([0.0], [2.0]))
        vals = basis.eval_batch(np.array([[0.0], [1.0], [2.0]]))
        assert_allclose(vals[:, 1], [-1.0, 0.0, 1.0])

    def test_box_scaling(self):
        # box [-4, 4]: the scaled coordinate runs over [-1, 1]
        basis = MonomialBasis.for_box(1, 2, Box([-4.0], [4.0]))
        vals = basis.eval_batch(np.array([[-4.0], [4.0], [2.0]]))
        assert_allclose(vals[:, 1], [-1.0, 1.0, 0.5])
        assert_allclose(vals[:, 2], [1.0, 1.0, 0.25])

    def test_descriptor_round_trip(self):
        basis = MonomialBasis.for_box(2, 3, Box([-1.0, 0.0], [1.0, 4.0]))
        clone = MonomialBasis.from_descriptor(basis.descriptor())
        xs = np.random.default_rng(2).normal(size=(6, 2))
        assert_allclose(clone.eval_batch(xs), basis.eval_batch(xs), rtol=1e-15)
        assert clone.exponents == basis.exponents

    def test_eval_rejects_wrong_dim(self):
        basis = MonomialBasis.raw(2, 1)
        with pytest.raises(ValueError):
            basis.eval_batch(np.zeros((4, 3)))
