"""Spectral radius computation and the two cheap sufficient bounds."""

import numpy as np
import pytest

from trafficstab import (
    best_epsilon_refined_bound,
    epsilon_refined_bound,
    row_sum_bound,
    spectral_radius,
    spectral_radius_detailed,
    tridiagonal_toeplitz_radius,
)
from trafficstab.errors import NegativeEntry, NonpositiveEpsilon

# comparison matrix of the five-component cycle fixture, as published for
# hand-picked anchors; used as a plain numeric test matrix here
CYCLE_MATRIX = np.array([
    [0.7905, 0.0281, 0.11, 0.0, 0.0],
    [0.11, 0.8166, 0.0281, 0.0, 0.0298],
    [0.0548, 0.11, 0.7905, 0.028, 0.0],
    [0.0, 0.0, 0.055, 0.7869, 0.0],
    [0.0, 0.055, 0.0, 0.0, 0.7869],
])


def tridiag(n: int, diag: float, off: float) -> np.ndarray:
    m = np.zeros((n, n))
    for i in range(n):
        m[i, i] = diag
        if i + 1 < n:
            m[i, i + 1] = off
        if i > 0:
            m[i, i - 1] = off
    return m


def diffusion_matrix(n: int, r: float) -> np.ndarray:
    """Comparison matrix of the 1-d explicit diffusion stencil."""
    return tridiag(n, abs(1.0 - 2.0 * r), r)


class TestRowSumBound:
    def test_cycle_matrix(self):
        assert row_sum_bound(CYCLE_MATRIX) == pytest.approx(0.9845, abs=1e-12)

    def test_identity(self):
        assert row_sum_bound(np.eye(3)) == 1.0

    def test_zero(self):
        assert row_sum_bound(np.zeros((4, 4))) == 0.0

    def test_rejects_negative(self):
        with pytest.raises(NegativeEntry):
            row_sum_bound(np.array([[0.1, -0.2], [0.0, 0.1]]))


class TestEpsilonRefinedBound:
    def test_zero_matrix_closed_form(self):
        # numerator n*eps * n*eps over denominator n*eps
        for n, eps in [(3, 0.01), (5, 0.2)]:
            assert epsilon_refined_bound(np.zeros((n, n)), eps) \
                == pytest.approx(n * eps, rel=1e-12)

    def test_identity_never_certifies(self):
        for eps in np.logspace(-8, 0, 9):
            assert epsilon_refined_bound(np.eye(4), float(eps)) > 1.0

    def test_certifies_where_row_sum_fails(self):
        # rho = 0.5 + sqrt(0.24) ~ 0.9899 but the max row sum is 1.1; the
        # two-step averaging of the refined test sees the balanced columns
        m = np.array([[0.5, 0.6], [0.4, 0.5]])
        assert row_sum_bound(m) >= 1.0
        best, eps = best_epsilon_refined_bound(m)
        assert best < 1.0
        assert spectral_radius(m) < 1.0  # consistency with the true radius

    def test_cycle_matrix_certifiable(self):
        best, _ = best_epsilon_refined_bound(CYCLE_MATRIX)
        assert best < 1.0

    def test_rejects_nonpositive_epsilon(self):
        with pytest.raises(NonpositiveEpsilon):
            epsilon_refined_bound(np.eye(2), 0.0)


class TestSpectralRadius:
    def test_identity(self):
        assert spectral_radius(np.eye(3)) == pytest.approx(1.0, abs=1e-10)

    def test_zero(self):
        assert spectral_radius(np.zeros((3, 3))) == 0.0

    def test_diffusion_closed_form(self):
        rho = spectral_radius(diffusion_matrix(10, 0.5))
        assert rho == pytest.approx(np.cos(np.pi / 11.0), abs=1e-8)

    def test_cycle_matrix_below_row_sum(self):
        rho = spectral_radius(CYCLE_MATRIX)
        assert rho < 0.9845

    def test_closed_form_agreement(self):
        for r in (0.1, 0.25, 0.5):
            for n in (3, 10, 50):
                rho = spectral_radius(diffusion_matrix(n, r))
                closed = 1.0 - 2.0 * r + 2.0 * r * np.cos(np.pi / (n + 1))
                assert rho == pytest.approx(closed, abs=1e-8)

    def test_reducible_triangular(self):
        # lower bidiagonal: the radius is the largest diagonal entry
        m = np.zeros((4, 4))
        np.fill_diagonal(m, [0.5, 0.5, 0.5, 0.6])
        for i in range(1, 4):
            m[i, i - 1] = 0.5
        rho, method, _ = spectral_radius_detailed(m)
        assert rho == pytest.approx(0.6, abs=1e-8)

    def test_ordering_against_row_sum(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            m = rng.uniform(0.0, 1.0, (n, n)) * rng.uniform(0.0, 1.5)
            assert spectral_radius(m) <= row_sum_bound(m) + 1e-10

    def test_scale_equivariance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            m = rng.uniform(0.0, 1.0, (n, n))
            rho = spectral_radius(m)
            assert spectral_radius(2.5 * m) == pytest.approx(2.5 * rho, abs=1e-8)

    def test_rejects_negative(self):
        with pytest.raises(NegativeEntry):
            spectral_radius(np.array([[0.0, 1.0], [-0.1, 0.0]]))


class TestTridiagonalToeplitzRadius:
    def test_half_rate(self):
        assert tridiagonal_toeplitz_radius(10, 0.0, 0.5) \
            == pytest.approx(np.cos(np.pi / 11.0), abs=1e-12)

    def test_quarter_rate(self):
        assert tridiagonal_toeplitz_radius(3, 0.5, 0.25) \
            == pytest.approx(0.5 + 0.5 * np.cos(np.pi / 4.0), abs=1e-12)

    def test_diagonal_only(self):
        assert tridiagonal_toeplitz_radius(7, 0.3, 0.0) == pytest.approx(0.3)

    def test_matches_power_iteration(self):
        for n, diag, off in [(4, 0.2, 0.3), (12, 0.05, 0.4)]:
            assert spectral_radius(tridiag(n, diag, off)) \
                == pytest.approx(tridiagonal_toeplitz_radius(n, diag, off), abs=1e-8)
