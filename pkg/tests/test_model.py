"""Network validation, equilibria, and one-step dynamics."""

import numpy as np
import pytest

from conftest import chain, cycle_network
from trafficstab import (
    DisturbedDemand,
    NetworkSpec,
    PiecewiseLinearDemand,
    equilibrium,
    freeway_step,
    freeway_to_network,
    step,
    step_internals,
    validate_network,
)
from trafficstab.errors import (
    DomainViolation,
    InfeasibleEquilibrium,
    NegativeParameter,
    NoFreeFlowPreimage,
    RowSumViolation,
    SelfLoop,
    SingularRouting,
)
from trafficstab.model import DisturbanceBox, freeway_equilibrium
from trafficstab.simulate import make_rng


def exit_only_network(n=3, r=0.5, v=0.1, a=10.0):
    demands = tuple(DisturbedDemand(PiecewiseLinearDemand(r=r, delta=5.0, q=0.0, a=a))
                    for _ in range(n))
    return validate_network(NetworkSpec(
        n=n, a=np.full(n, a), P=np.zeros((n, n)), Q=np.ones(n),
        v=np.full(n, v), demands=demands))


class TestValidation:
    def test_cycle_is_valid(self, cycle):
        assert cycle.spec.n == 5

    def test_exit_only_is_valid(self):
        exit_only_network()

    def test_self_loop_rejected(self):
        P = np.zeros((3, 3))
        P[0, 0] = 0.5
        demands = tuple(DisturbedDemand(PiecewiseLinearDemand(0.5, 5.0, 0.0, 10.0))
                        for _ in range(3))
        with pytest.raises(SelfLoop):
            validate_network(NetworkSpec(3, np.full(3, 10.0), P,
                                         np.array([0.5, 1.0, 1.0]),
                                         np.zeros(3), demands))

    def test_row_sum_violation(self):
        P = np.zeros((3, 3))
        P[0, 1] = 0.3
        demands = tuple(DisturbedDemand(PiecewiseLinearDemand(0.5, 5.0, 0.0, 10.0))
                        for _ in range(3))
        with pytest.raises(RowSumViolation):
            validate_network(NetworkSpec(3, np.full(3, 10.0), P,
                                         np.array([0.6, 1.0, 1.0]),
                                         np.zeros(3), demands))

    def test_singular_routing(self):
        P = np.zeros((2, 2))
        P[0, 1] = 1.0
        P[1, 0] = 1.0
        demands = tuple(DisturbedDemand(PiecewiseLinearDemand(0.5, 5.0, 0.0, 10.0))
                        for _ in range(2))
        with pytest.raises(SingularRouting):
            validate_network(NetworkSpec(2, np.full(2, 10.0), P, np.zeros(2),
                                         np.zeros(2), demands))

    def test_negative_inflow(self):
        demands = (DisturbedDemand(PiecewiseLinearDemand(0.5, 5.0, 0.0, 10.0)),)
        with pytest.raises(NegativeParameter):
            validate_network(NetworkSpec(1, np.array([10.0]), np.zeros((1, 1)),
                                         np.array([1.0]), np.array([-0.1]),
                                         demands))


class TestEquilibrium:
    def test_chain_values(self, chain_low):
        eq = freeway_equilibrium(chain_low)
        np.testing.assert_allclose(eq.x_star, [2.0, 2.0, 2.0, 2.0, 2.5],
                                   atol=1e-12)
        np.testing.assert_allclose(eq.f_star, np.ones(5), atol=1e-12)

    def test_cycle_flows(self, cycle):
        # routing balance solved by hand: the cycle carries v/(1 - p), the
        # spurs v_spur + p_spur * v/(1 - p)
        eq = equilibrium(cycle)
        np.testing.assert_allclose(eq.f_star, [0.5, 0.5, 0.5, 0.45, 0.45],
                                   atol=1e-12)
        np.testing.assert_allclose(eq.x_star,
                                   [10 / 11] * 3 + [9 / 11] * 2, atol=1e-12)

    def test_zero_inflow(self):
        net = exit_only_network(v=0.0)
        eq = equilibrium(net)
        np.testing.assert_allclose(eq.x_star, 0.0, atol=0)
        np.testing.assert_allclose(eq.f_star, 0.0, atol=0)

    def test_no_free_flow_preimage(self):
        # inflow ramped until the cycle flow exceeds the free-flow range
        with pytest.raises(NoFreeFlowPreimage):
            equilibrium(cycle_network(v=3.0, v_spur=3.0))

    def test_infeasible_equilibrium(self):
        # a late critical occupancy keeps the preimage available while the
        # occupancy-plus-inflow feasibility check fails
        with pytest.raises(InfeasibleEquilibrium):
            equilibrium(cycle_network(v=3.0, v_spur=3.0, delta=9.0))


class TestStep:
    def test_fixed_point(self, cycle):
        eq = equilibrium(cycle)
        x_next = step(cycle, eq.x_star)
        assert np.max(np.abs(x_next - eq.x_star)) < 1e-12

    def test_chain_fixed_point(self, chain_low):
        eq = freeway_equilibrium(chain_low)
        x_next = freeway_step(chain_low, eq.x_star)
        assert np.max(np.abs(x_next - eq.x_star)) < 1e-12

    def test_chain_empty_state(self, chain_low):
        np.testing.assert_array_equal(freeway_step(chain_low, np.zeros(5)),
                                      [1.0, 0.0, 0.0, 0.0, 0.0])

    def test_chain_saturated_state(self, chain_low):
        # every admitted inflow is zero; only the last cell discharges
        x_next = freeway_step(chain_low, np.full(5, 10.0))
        np.testing.assert_allclose(x_next, [10, 10, 10, 10, 8.5], atol=1e-12)
        assert np.all(x_next <= chain_low.a + 1e-12)

    def test_domain_violation(self, cycle):
        with pytest.raises(DomainViolation):
            step(cycle, np.full(5, 11.0))
        with pytest.raises(DomainViolation):
            step(cycle, np.full(5, 1.0), (0.5,))

    def test_forward_invariance_and_mass_balance(self):
        nets = [cycle_network(), exit_only_network(),
                freeway_to_network(chain(0.25))]
        rng = make_rng(42)
        for net in nets:
            s = net.spec
            for _ in range(400):
                x = rng.uniform(np.zeros(s.n), s.a)
                out = step_internals(net, x)
                assert np.all(out.x_next >= -1e-12)
                assert np.all(out.x_next <= s.a + 1e-12)
                assert np.all(out.supply_ratio >= 0.0)
                assert np.all(out.supply_ratio <= 1.0)
                lhs = out.x_next.sum() - x.sum()
                rhs = out.external_in.sum() - out.exit_out.sum()
                assert abs(lhs - rhs) < 1e-12

    def test_chain_matches_induced_network_exactly(self, chain_low):
        net = freeway_to_network(chain_low)
        rng = make_rng(7)
        for _ in range(100):
            x = rng.uniform(np.zeros(5), chain_low.a)
            direct = freeway_step(chain_low, x)
            induced = step(net, x)
            assert np.array_equal(direct, induced)  # bitwise, no tolerance


class TestDisturbedNetwork:
    def make(self):
        dbox = DisturbanceBox(np.array([-0.1]), np.array([0.1]))
        demands = tuple(
            DisturbedDemand(PiecewiseLinearDemand(0.5, 5.0, 0.1, 10.0), mode="slope")
            for _ in range(3))
        P = np.zeros((3, 3))
        P[0, 1] = 1.0
        P[1, 2] = 1.0
        Q = np.array([0.0, 0.0, 1.0])
        return validate_network(NetworkSpec(3, np.full(3, 10.0), P, Q,
                                            np.zeros(3), demands, dbox))

    def test_zero_inflow_equilibrium_holds_for_all_d(self):
        net = self.make()
        eq = equilibrium(net)
        np.testing.assert_array_equal(eq.x_star, np.zeros(3))
        for d in net.spec.disturbance_box.check_points():
            assert np.max(np.abs(step(net, eq.x_star, d))) < 1e-12

    def test_invariance_under_random_disturbances(self):
        net = self.make()
        rng = make_rng(3)
        dbox = net.spec.disturbance_box
        for _ in range(300):
            x = rng.uniform(np.zeros(3), net.spec.a)
            d = rng.uniform(dbox.lo, dbox.hi)
            x_next = step(net, x, d)
            assert np.all(x_next >= -1e-12) and np.all(x_next <= 10.0 + 1e-12)
