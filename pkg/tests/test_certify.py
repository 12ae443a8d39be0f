"""Certification pipelines, serialization, and the audit round trip."""

import numpy as np
import pytest

from conftest import chain, cycle_network
from trafficstab import (
    Box,
    DisturbedDemand,
    NetworkSpec,
    PiecewiseLinearDemand,
    certify_freeway,
    certify_linear_comparison,
    certify_network,
    parse_certificate,
    serialize_certificate,
    validate_network,
    verify_certificate,
)
from trafficstab.errors import NegativeEntry

from test_spectral import diffusion_matrix


class TestCertifyNetwork:
    def test_cycle_certified(self, cycle):
        cert = certify_network(cycle, Box(np.zeros(5), np.full(5, 10.0)))
        assert cert.certified
        assert cert.bound_used == "row_sum"
        assert cert.rho <= 0.9845
        assert float(cert.gamma.sum(axis=1).max()) <= 0.9845 + 0.001

    def test_oversized_inflow_inconclusive(self):
        # the equilibrium flow leaves the free-flow range: no preimage
        cert = certify_network(cycle_network(v=3.0, v_spur=3.0))
        assert not cert.certified
        assert any("NoFreeFlowPreimage" in note for note in cert.notes)

    def test_infeasible_equilibrium_inconclusive(self):
        cert = certify_network(cycle_network(v=3.0, v_spur=3.0, delta=9.0))
        assert not cert.certified
        assert any("InfeasibleEquilibrium" in note for note in cert.notes)

    def test_decoupled_cells_certified(self):
        demands = tuple(
            DisturbedDemand(PiecewiseLinearDemand(0.5, 5.0, 0.1, 10.0))
            for _ in range(3))
        net = validate_network(NetworkSpec(
            3, np.full(3, 10.0), np.zeros((3, 3)), np.ones(3),
            np.full(3, 0.2), demands))
        cert = certify_network(net)
        assert cert.certified
        assert np.all(cert.gamma[~np.eye(3, dtype=bool)] == 0.0)

    def test_explicit_anchor_vector(self, cycle):
        omega = np.array([9.14, 9.14, 9.14, 9.37, 9.37])
        cert = certify_network(cycle, Box(np.zeros(5), np.full(5, 10.0)),
                               omega=omega)
        assert cert.certified
        np.testing.assert_array_equal(cert.params.anchors, omega)

    def test_zero_inflow_accepted_with_note(self):
        demands = tuple(
            DisturbedDemand(PiecewiseLinearDemand(0.5, 9.0, 0.0, 10.0))
            for _ in range(2))
        net = validate_network(NetworkSpec(
            2, np.full(2, 10.0), np.zeros((2, 2)), np.ones(2), np.zeros(2),
            demands))
        cert = certify_network(net)
        assert cert.certified
        assert any("zero external inflow" in note for note in cert.notes)


class TestCertifyFreeway:
    def test_low_drop_certified(self, chain_low):
        cert = certify_freeway(chain_low, 1000)
        assert cert.certified
        assert cert.rho == pytest.approx(0.6, abs=1e-8)
        np.testing.assert_allclose(cert.params.diag_gains,
                                   [0.5, 0.5, 0.5, 0.5, 0.6], atol=1e-9)

    def test_high_drop_inconclusive(self, chain_high):
        cert = certify_freeway(chain_high, 1000)
        assert not cert.certified
        assert any("NoFeasibleGridPoint" in note for note in cert.notes)

    def test_critical_drop_inconclusive(self):
        for grid_n in (1000, 2000):
            assert not certify_freeway(chain(0.25), grid_n).certified

    def test_grid_refinement_preserves_success(self, chain_low):
        assert certify_freeway(chain_low, 1000).certified
        assert certify_freeway(chain_low, 2000).certified


class TestCertifyLinearComparison:
    def test_diffusion_certified_at_half_rate(self):
        cert = certify_linear_comparison(diffusion_matrix(10, 0.5))
        assert cert.certified
        assert cert.rho < 1.0

    def test_diffusion_above_half_rate(self):
        cert = certify_linear_comparison(diffusion_matrix(10, 0.6))
        assert not cert.certified
        assert cert.rho == pytest.approx(
            0.2 + 1.2 * np.cos(np.pi / 11.0), abs=1e-8)

    def test_identity_boundary_not_certified(self):
        cert = certify_linear_comparison(np.eye(3))
        assert not cert.certified
        assert cert.rho == pytest.approx(1.0, abs=1e-10)

    def test_negative_entry_rejected(self):
        with pytest.raises(NegativeEntry):
            certify_linear_comparison(np.array([[0.1, -0.5], [0.2, 0.1]]))


class TestAuditRoundTrip:
    def _assert_roundtrip(self, cert):
        text = serialize_certificate(cert)
        parsed = parse_certificate(text)
        assert parsed.verdict == cert.verdict
        assert parsed.bound_used == cert.bound_used
        verdict, rho = verify_certificate(parsed)
        assert verdict == cert.verdict
        assert abs(rho - cert.rho) <= 1e-10

    def test_network_certificate(self, cycle):
        self._assert_roundtrip(
            certify_network(cycle, Box(np.zeros(5), np.full(5, 10.0))))

    def test_freeway_certificate(self, chain_low):
        self._assert_roundtrip(certify_freeway(chain_low, 1000))

    def test_matrix_certificate(self):
        self._assert_roundtrip(
            certify_linear_comparison(diffusion_matrix(10, 0.5)))

    def test_serialization_is_stable(self, chain_low):
        a = serialize_certificate(certify_freeway(chain_low, 1000))
        b = serialize_certificate(certify_freeway(chain_low, 1000))
        assert a == b
