"""Outflow-demand curves and their slope bounds.

A demand curve maps occupancy x to attempted outflow f(x).  The curves here
are piecewise linear with two branches

    f(x) = r*x                      on [0, delta]
    f(x) = r*delta - q*(x - delta)  on (delta, a]

so the flow rises with slope r up to the critical occupancy delta and then
falls with slope q, which models reduced discharge under heavy occupancy.
The constraint q <= r*delta/(a - delta) keeps f nonnegative, and f(x) <= x
holds on all of [0, a].

``DisturbedDemand`` wraps a curve together with an optional dependence on a
disturbance point d: either none at all, or a perturbation of the free-flow
slope clamped so the curve invariants survive.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateInterval, DomainViolation, NegativeParameter

_EXCLUSION = 1e-9  # half-width of the window around x* excluded from ratio sups


@dataclass(frozen=True)
class PiecewiseLinearDemand:
    r: float        # free-flow slope, 0 < r <= 1
    delta: float    # critical occupancy, 0 < delta < a
    q: float        # discharge-drop slope, 0 <= q <= r*delta/(a-delta)
    a: float        # domain upper bound

    def __post_init__(self):
        if not (self.a > 0):
            raise NegativeParameter("a", 0, self.a)
        if not (0 < self.r <= 1):
            raise NegativeParameter("r", 0, self.r)
        if not (0 < self.delta < self.a):
            raise NegativeParameter("delta", 0, self.delta)
        q_cap = self.r * self.delta / (self.a - self.delta)
        if not (0 <= self.q <= q_cap + 1e-12):
            raise NegativeParameter("q", 0, self.q)

    def value(self, x):
        """Attempted outflow at occupancy x (scalar or array)."""
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.delta, self.r * x,
                       self.r * self.delta - self.q * (x - self.delta))
        return float(out) if out.ndim == 0 else out

    def max_on(self, lo: float, hi: float) -> float:
        """Exact maximum of f over [lo, hi] (f rises to delta, falls after)."""
        return float(self.value(min(max(lo, self.delta), hi)))

    def min_on(self, lo: float, hi: float) -> float:
        """Exact minimum of f over [lo, hi] (attained at an endpoint)."""
        return float(min(self.value(lo), self.value(hi)))

    def slope_left(self, x: float) -> float:
        """One-sided derivative of f approaching x from below."""
        return self.r if x <= self.delta else -self.q

    def slope_right(self, x: float) -> float:
        """One-sided derivative of f leaving x toward larger occupancy."""
        return self.r if x < self.delta else -self.q

    def preimages(self, t: float) -> list[float]:
        """Occupancies s in [0, a] with f(s) = t, one per branch when valid."""
        out = []
        if self.r > 0:
            s = t / self.r
            if -1e-12 <= s <= self.delta + 1e-12:
                out.append(min(max(s, 0.0), self.delta))
        if self.q > 0:
            s = self.delta + (self.r * self.delta - t) / self.q
            if self.delta - 1e-12 <= s <= self.a + 1e-12:
                out.append(min(max(s, self.delta), self.a))
        return out


@dataclass(frozen=True)
class DisturbedDemand:
    """A demand curve with an optional disturbance channel.

    mode "constant": the curve ignores d entirely.
    mode "slope": the free-flow slope becomes r + d[0], clamped into the
    range where the curve invariants (positivity, f <= x, q admissible)
    still hold.
    """

    base: PiecewiseLinearDemand
    mode: str = "constant"

    def __post_init__(self):
        if self.mode not in ("constant", "slope"):
            raise NegativeParameter("mode", 0, float("nan"))

    def curve(self, d) -> PiecewiseLinearDemand:
        if self.mode == "constant":
            return self.base
        d = np.atleast_1d(np.asarray(d, dtype=float))
        if d.size < 1:
            raise DomainViolation("slope-perturbed demand needs a 1-d disturbance")
        b = self.base
        r_lo = b.q * (b.a - b.delta) / b.delta  # keep q <= r*delta/(a-delta)
        r = min(max(b.r + float(d[0]), max(r_lo, 1e-9)), 1.0)
        return replace(b, r=r)

    def eval(self, d, x):
        """Flow value f(d, x); raises DomainViolation outside [0, a]."""
        x_arr = np.asarray(x, dtype=float)
        if np.any(x_arr < -1e-12) or np.any(x_arr > self.base.a + 1e-12):
            raise DomainViolation(f"occupancy {x!r} outside [0, {self.base.a}]")
        return self.curve(d).value(np.clip(x_arr, 0.0, self.base.a))


def lipschitz_constant(fn: DisturbedDemand, dbox=None) -> float:
    """Global slope bound L with |f(d,x) - f(d,x*)| <= L |x - x*| on [0, a].

    For a piecewise linear curve the bound max(r, q) is exact over each
    branch pair, so no grid search is needed here; tests verify the
    inequality on a dense grid independently.
    """
    corners = [()] if dbox is None else list(dbox.corners())
    best = 0.0
    for d in corners:
        c = fn.curve(d)
        best = max(best, c.r, c.q)
    return best


def outflow_slope(fn: DisturbedDemand, x_star: float, f_star: float,
                  interval, grid_n: int = 2000, dbox=None,
                  safety: float = 1.0) -> float:
    """Smallest verified bound mu with |f* - f(d,s)| <= mu |s - x*| on [b,c].

    The supremum of the ratio is evaluated on a grid joined with the curve
    breakpoints; the 0/0 point at s = x* is replaced by the one-sided branch
    slopes, which equal the true limit for piecewise linear curves.  The
    result can be inflated by ``safety`` (default 1.0, no inflation).
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        raise DegenerateInterval(f"interval [{lo}, {hi}]")
    if not (lo - 1e-12 <= x_star <= hi + 1e-12):
        raise DomainViolation(f"x* = {x_star} outside [{lo}, {hi}]")

    corners = [()] if dbox is None else dbox.check_points()
    best = 0.0
    for d in corners:
        c = fn.curve(d)
        pts = np.unique(np.clip(np.concatenate([
            np.linspace(lo, hi, grid_n),
            np.asarray([lo, hi, c.delta]),
        ]), lo, hi))
        gap = np.abs(pts - x_star)
        keep = gap >= _EXCLUSION
        if np.any(keep):
            ratios = np.abs(f_star - c.value(pts[keep])) / gap[keep]
            best = max(best, float(ratios.max()))
        # one-sided limits at x*: |f'| on whichever branches the box touches
        if x_star > lo + _EXCLUSION:
            best = max(best, abs(c.slope_left(x_star)))
        if x_star < hi - _EXCLUSION:
            best = max(best, abs(c.slope_right(x_star)))
    return best * safety
