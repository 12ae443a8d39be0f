"""Demand curves: branch values, slope bounds, deviation-slope suprema."""

import numpy as np
import pytest

from trafficstab import (
    DisturbedDemand,
    PiecewiseLinearDemand,
    lipschitz_constant,
    outflow_slope,
)
from trafficstab.errors import DegenerateInterval, DomainViolation, NegativeParameter
from trafficstab.model import DisturbanceBox


def curve(r=0.5, delta=5.0, q=0.1, a=10.0):
    return PiecewiseLinearDemand(r=r, delta=delta, q=q, a=a)


class TestPiecewiseLinearValues:
    def test_free_flow_peak(self):
        assert curve().value(5.0) == 2.5

    def test_dropped_branch(self):
        # r*delta - q*(x - delta) = 2.5 - 0.1*5 at full occupancy
        assert curve().value(10.0) == pytest.approx(2.0, abs=1e-15)

    def test_zero_occupancy(self):
        assert curve().value(0.0) == 0.0
        assert curve(r=1.0, q=0.0).value(0.0) == 0.0

    def test_cycle_demand_value(self):
        # 0.55*5 - 0.1*(7 - 5)
        assert curve(r=0.55).value(7.0) == pytest.approx(2.55, abs=1e-15)

    def test_analytic_extrema(self):
        c = curve()
        grid = np.linspace(0.0, 10.0, 4001)
        for lo, hi in [(0.0, 10.0), (1.0, 4.0), (6.0, 9.0), (3.0, 7.0)]:
            mask = (grid >= lo) & (grid <= hi)
            assert c.max_on(lo, hi) >= c.value(grid[mask]).max() - 1e-12
            assert c.min_on(lo, hi) <= c.value(grid[mask]).min() + 1e-12

    def test_preimages_invert_value(self):
        c = curve()
        for t in (0.3, 1.2, 2.2, 2.4999):
            for s in c.preimages(t):
                assert c.value(s) == pytest.approx(t, abs=1e-12)


class TestInvariants:
    def test_rejects_oversized_drop_slope(self):
        # q above r*delta/(a - delta) would push the curve negative
        with pytest.raises(NegativeParameter):
            curve(q=0.51)

    def test_rejects_bad_critical_occupancy(self):
        with pytest.raises(NegativeParameter):
            curve(delta=10.0)

    def test_flow_never_exceeds_occupancy(self):
        for c in (curve(), curve(r=1.0, q=0.9, delta=9.0),
                  curve(r=0.55, q=0.1)):
            xs = np.unique(np.concatenate([np.linspace(0, c.a, 10_000),
                                           [c.delta, c.a]]))
            vals = c.value(xs)
            assert np.all(vals <= xs + 1e-12)
            assert np.all(vals >= -1e-12)

    def test_continuity_on_grid(self):
        c = curve(r=0.55)
        xs = np.linspace(0, c.a, 10_000)
        vals = c.value(xs)
        step = xs[1] - xs[0]
        max_slope = max(c.r, c.q)
        assert np.all(np.abs(np.diff(vals)) <= max_slope * step + 1e-12)


class TestDisturbedDemand:
    def test_constant_mode_ignores_d(self):
        fn = DisturbedDemand(curve())
        assert fn.eval((), 4.0) == fn.eval((0.3,), 4.0) == 2.0

    def test_eval_domain_check(self):
        fn = DisturbedDemand(curve())
        with pytest.raises(DomainViolation):
            fn.eval((), 10.5)

    def test_slope_mode_perturbs_and_clamps(self):
        fn = DisturbedDemand(curve(), mode="slope")
        assert fn.curve([0.2]).r == pytest.approx(0.7)
        assert fn.curve([0.9]).r == 1.0  # clamped at the unit slope
        # clamp keeps the drop-slope constraint q <= r*delta/(a-delta)
        low = fn.curve([-0.45])
        assert low.q <= low.r * low.delta / (low.a - low.delta) + 1e-12

    def test_slope_mode_invariants_over_box(self):
        fn = DisturbedDemand(curve(), mode="slope")
        dbox = DisturbanceBox(np.array([-0.3]), np.array([0.3]))
        for d in dbox.check_points():
            c = fn.curve(d)
            xs = np.linspace(0, c.a, 2000)
            assert np.all(c.value(xs) <= xs + 1e-12)


class TestLipschitzConstant:
    def test_chain_cells(self):
        assert lipschitz_constant(DisturbedDemand(curve())) == 0.5

    def test_pure_slope(self):
        assert lipschitz_constant(
            DisturbedDemand(curve(r=1.0, q=0.0, delta=9.0))) == 1.0

    def test_cycle_value(self):
        assert lipschitz_constant(DisturbedDemand(curve(r=0.55))) == 0.55

    def test_bound_holds_on_grid(self):
        fn = DisturbedDemand(curve(r=0.55))
        L = lipschitz_constant(fn)
        x_star, f_star = 10.0 / 11.0, 0.5
        xs = np.linspace(0, 10, 10_000)
        xs = xs[np.abs(xs - x_star) > 1e-9]
        ratios = np.abs(fn.eval((), xs) - f_star) / np.abs(xs - x_star)
        assert np.all(ratios <= L + 1e-12)


class TestOutflowSlope:
    def test_cycle_slope_is_free_flow_rate(self):
        # numerator and denominator both carry the free-flow slope at the
        # kink, so the supremum equals r; the routed entries r*p and
        # r*p_spur follow
        fn = DisturbedDemand(curve(r=0.55))
        mu = outflow_slope(fn, 10.0 / 11.0, 0.5, (0.0, 10.0))
        assert mu == pytest.approx(0.55, abs=1e-12)
        assert 0.2 * mu == pytest.approx(0.11, abs=1e-12)
        assert 0.1 * mu == pytest.approx(0.055, abs=1e-12)

    def test_linear_demand_interior(self):
        fn = DisturbedDemand(curve(r=0.5, q=0.0, delta=9.0))
        mu = outflow_slope(fn, 2.0, 1.0, (0.5, 6.0))
        assert mu == pytest.approx(0.5, abs=1e-12)

    def test_chain_free_flow_interval(self):
        fn = DisturbedDemand(curve())
        mu = outflow_slope(fn, 2.0, 1.0, (0.0, 4.5))
        assert mu == pytest.approx(0.5, abs=1e-12)

    def test_monotone_under_shrinking_interval(self):
        fn = DisturbedDemand(curve(r=0.55))
        intervals = [(0.0, 10.0), (0.2, 8.0), (0.5, 5.0), (0.8, 2.0)]
        values = [outflow_slope(fn, 10.0 / 11.0, 0.5, iv) for iv in intervals]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))

    def test_degenerate_interval(self):
        fn = DisturbedDemand(curve())
        with pytest.raises(DegenerateInterval):
            outflow_slope(fn, 2.0, 1.0, (3.0, 3.0))
