"""Construction of the nonnegative comparison matrix.

For the vector Lyapunov function V_i(x) = |x_i - x*_i| the one-step
evolution on a trapping box A = [b, c] obeys V(next) <= G V(x) entrywise
for a nonnegative matrix G assembled from four coefficient families:

  diag_gains       lambda_i: contraction factor of component i's own error
                   under the supply levels conceded by the anchor vector;
  outflow_slopes   mu_i: slope bound |f*_i - f_i(d,s)| <= mu_i |s - x*_i|
                   on the box interval;
  peak_outflows    F_i: maximum attempted outflow over the box;
  anchors          omega_i in [x*_i, a_i]: the occupancy level above which
                   receiver i's supply curtailment is charged to the
                   receiver's own error rather than to the sender.

A spectral radius of G below 1 certifies exponential stability of the
uncongested equilibrium.  Anchor choice trades diagonal mass against
off-diagonal supply-coupling terms; ``optimize_anchors`` does a grid
coordinate descent on the spectral radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    Condition318Violation,
    DegenerateInterval,
    DomainViolation,
    SupplyHypothesisViolation,
)
from .demand import outflow_slope
from .model import Equilibrium, FreewaySpec, ValidatedNetwork
from .spectral import spectral_radius
from .trapping import Box

_EXCLUSION = 1e-9     # ratio evaluation window excluded around x*
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
_REFINE_TOP = 6       # brackets refined around the best grid candidates
_REFINE_ITERS = 70


@dataclass(frozen=True)
class ComparisonParams:
    box: Box
    anchors: np.ndarray          # omega
    diag_gains: np.ndarray       # lambda
    outflow_slopes: np.ndarray   # mu
    peak_outflows: np.ndarray    # F

    def __post_init__(self):
        for name in ("anchors", "diag_gains", "outflow_slopes", "peak_outflows"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


@dataclass(frozen=True)
class ComparisonMatrix:
    entries: np.ndarray
    params: ComparisonParams


# ---------------------------------------------------------------------------
# ratio suprema
# ---------------------------------------------------------------------------

def _sup_ratio(expr_max, x_star: float, lo: float, hi: float, grid_n: int,
               extra_points, limits, refine: bool) -> float:
    """sup over [lo, hi] of expr_max(s) / |s - x*|.

    ``expr_max`` maps an occupancy array to the pointwise maximum of the
    constraint expressions.  The grid is joined with analytic breakpoints;
    ``limits`` carries the exact one-sided values at s = x*.  With
    ``refine`` the best grid brackets are polished by golden-section search
    so that interior maxima of the piecewise-rational pieces are not missed.
    """
    pts = np.concatenate([np.linspace(lo, hi, grid_n),
                          np.asarray([lo, hi], dtype=float),
                          np.asarray(extra_points, dtype=float)])
    pts = np.unique(np.clip(pts, lo, hi))
    gap = np.abs(pts - x_star)
    keep = gap >= _EXCLUSION
    best = max([v for v in limits if np.isfinite(v)], default=0.0)
    if any(not np.isfinite(v) for v in limits):
        return float("inf")
    if not np.any(keep):
        return max(best, 0.0)
    vals = expr_max(pts[keep]) / gap[keep]
    best = max(best, float(vals.max()))
    if refine:
        kept = pts[keep]
        order = np.argsort(vals)[::-1][:_REFINE_TOP]
        for idx in order:
            s0 = kept[idx]
            pos = int(np.searchsorted(pts, s0))
            left = pts[max(pos - 1, 0)]
            right = pts[min(pos + 1, pts.size - 1)]
            best = max(best, _golden_max(expr_max, x_star, left, right))
    return max(best, 0.0)


def _golden_max(expr_max, x_star: float, lo: float, hi: float) -> float:
    def val(s):
        g = abs(s - x_star)
        if g < _EXCLUSION:
            return -float("inf")
        return float(expr_max(np.asarray([s]))[0]) / g

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = val(c), val(d)
    for _ in range(_REFINE_ITERS):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = val(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = val(d)
    return max(fc, fd, val(lo), val(hi))


# ---------------------------------------------------------------------------
# general-network diagonal gains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Sender:
    """Everything needed to evaluate component i's contraction expressions
    for one disturbance point."""

    i: int
    curve: object                 # PiecewiseLinearDemand for this d
    x_star: float
    f_star: float
    a_i: float
    Q_i: float
    inflow_star: float            # v_i + sum_j p[j,i] f*_j
    targets: tuple                # (j, p_ij, base_j, a_j) per receiver


def _sender(net: ValidatedNetwork, eq: Equilibrium, i: int, d) -> _Sender:
    s = net.spec
    targets = []
    for j in range(s.n):
        p = float(s.P[i, j])
        if p > 0.0:
            base = float(s.v[j] + s.P.T[j] @ eq.f_star - p * eq.f_star[i])
            targets.append((j, p, base, float(s.a[j])))
    return _Sender(
        i=i, curve=s.demands[i].curve(d), x_star=float(eq.x_star[i]),
        f_star=float(eq.f_star[i]), a_i=float(s.a[i]), Q_i=float(s.Q[i]),
        inflow_star=float(s.v[i] + s.P.T[i] @ eq.f_star), targets=tuple(targets),
    )


def _sender_expr_max(sn: _Sender, omega_by_j):
    """Array evaluator for max(raise-side, drop-side) contraction expressions.

    The drop side charges component i with the curtailment its receivers
    would impose at occupancy anchor omega_j; the raise side uses the full
    receiver capacity instead.  Both must stay below lambda_i |s - x*_i|.
    """

    def expr_max(s_arr):
        t = sn.curve.value(s_arr)
        coef_drop = np.full_like(s_arr, sn.Q_i)
        coef_raise = np.full_like(s_arr, sn.Q_i)
        for (j, p, base, a_j) in sn.targets:
            attempted = base + p * t
            safe = np.where(attempted > 0.0, attempted, 1.0)
            g = a_j - omega_by_j[j]
            coef_drop += p * np.where(attempted > 0.0,
                                      np.minimum(g, attempted) / safe, 1.0)
            coef_raise += p * np.where(attempted > 0.0,
                                       np.minimum(a_j, attempted) / safe, 1.0)
        tail = np.minimum(sn.a_i - s_arr, sn.inflow_star)
        drop = s_arr - sn.x_star - coef_drop * t + tail
        raise_ = sn.x_star - s_arr + coef_raise * t - tail
        return np.maximum(drop, raise_)

    return expr_max


def _sender_breakpoints(sn: _Sender, omega_by_j) -> list[float]:
    pts = [sn.curve.delta, sn.a_i - sn.inflow_star]
    for (j, p, base, a_j) in sn.targets:
        for level in (a_j - omega_by_j[j], a_j):
            t_cross = (level - base) / p
            pts.extend(sn.curve.preimages(t_cross))
    return pts


def _sender_limits(sn: _Sender, omega_by_j, lo: float, hi: float) -> list[float]:
    """Exact one-sided limits of the two ratio expressions at s = x*_i.

    Feasibility requires every receiver's conceded supply a_j - omega_j to
    cover its equilibrium inflow; otherwise the drop-side expression is
    nonzero at x* and the ratio diverges, reported as +inf.
    """
    out = []
    sides = []
    if sn.x_star > lo + _EXCLUSION:
        sides.append(-1.0)
    if sn.x_star < hi - _EXCLUSION:
        sides.append(+1.0)
    for side in sides:
        sigma = (sn.curve.slope_right(sn.x_star) if side > 0
                 else sn.curve.slope_left(sn.x_star))
        d_drop = sn.Q_i
        d_raise = sn.Q_i
        infeasible = False
        for (j, p, base, a_j) in sn.targets:
            a_star = base + p * sn.f_star  # receiver's equilibrium inflow
            for g, acc in ((a_j - omega_by_j[j], "drop"), (a_j, "raise")):
                if a_star <= 0.0:
                    dterm = p if g > 0.0 else 0.0
                elif g < a_star - 1e-9 * max(1.0, a_star):
                    if acc == "drop":
                        infeasible = True
                        dterm = p
                    else:
                        # receiver capacity below equilibrium inflow cannot
                        # happen for a validated equilibrium
                        dterm = p * g * base / (a_star * a_star)
                elif abs(g - a_star) <= 1e-9 * max(1.0, a_star):
                    binding = (p * sigma * side) > 0.0
                    dterm = p * g * base / (a_star * a_star) if binding else p
                else:
                    dterm = p
                if acc == "drop":
                    d_drop += dterm
                else:
                    d_raise += dterm
        if infeasible:
            out.append(float("inf"))
            continue
        gap = sn.a_i - sn.x_star
        if gap < sn.inflow_star - 1e-9:
            d_tail = -1.0
        elif abs(gap - sn.inflow_star) <= 1e-9:
            d_tail = -1.0 if side > 0 else 0.0
        else:
            d_tail = 0.0
        out.append(side * (1.0 - d_drop * sigma + d_tail))   # drop side
        out.append(side * (-1.0 + d_raise * sigma - d_tail))  # raise side
    return out


def diag_gains(net: ValidatedNetwork, eq: Equilibrium, box: Box,
               omega, grid_n: int = 2000, refine: bool = True) -> np.ndarray:
    """Per-component contraction coefficients lambda on the box.

    For each component the supremum of both one-sided contraction
    expressions over [b_i, c_i] (all disturbance check points) is taken,
    with the 0/0 point at x* replaced by its exact one-sided limits.
    Returns +inf entries when an anchor concedes less supply than the
    receiver's equilibrium inflow requires.
    """
    s = net.spec
    omega = np.asarray(omega, dtype=float)
    lams = np.zeros(s.n)
    d_points = s.disturbance_box.check_points()
    for i in range(s.n):
        lo, hi = float(box.lo[i]), float(box.hi[i])
        if not hi >= lo:
            raise DegenerateInterval(f"box interval {i}: [{lo}, {hi}]")
        if not (lo - 1e-12 <= eq.x_star[i] <= hi + 1e-12):
            raise DomainViolation(f"box interval {i} misses x*")
        best = 0.0
        for d in d_points:
            sn = _sender(net, eq, i, d)
            expr = _sender_expr_max(sn, omega)
            if hi == lo:
                best = max(best, 0.0)
                continue
            val = _sup_ratio(expr, sn.x_star, lo, hi, grid_n,
                             _sender_breakpoints(sn, omega),
                             _sender_limits(sn, omega, lo, hi), refine)
            best = max(best, val)
        lams[i] = best
    return lams


def outflow_slopes(net: ValidatedNetwork, eq: Equilibrium, box: Box,
                   grid_n: int = 2000) -> np.ndarray:
    s = net.spec
    dbox = s.disturbance_box if s.disturbance_box.dim else None
    return np.array([
        outflow_slope(s.demands[i], float(eq.x_star[i]), float(eq.f_star[i]),
                      (float(box.lo[i]), float(box.hi[i])), grid_n, dbox)
        for i in range(s.n)
    ])


def peak_outflows(net: ValidatedNetwork, box: Box) -> np.ndarray:
    """F_i = max of f_i over [b_i, c_i] x D (exact for piecewise linear)."""
    s = net.spec
    peaks = np.zeros(s.n)
    for i in range(s.n):
        for d in s.disturbance_box.check_points():
            c = s.demands[i].curve(d)
            peaks[i] = max(peaks[i], c.max_on(float(box.lo[i]), float(box.hi[i])))
    return peaks


# ---------------------------------------------------------------------------
# matrix assembly
# ---------------------------------------------------------------------------

def check_supply_headroom(net: ValidatedNetwork, eq: Equilibrium,
                          peaks: np.ndarray) -> None:
    """Every receiver must absorb its equilibrium inflow plus the worst
    single-sender surplus: f*_j + p_ij (F_i - f*_i) <= a_j for all i, j."""
    s = net.spec
    for i in range(s.n):
        for j in range(s.n):
            lhs = eq.f_star[j] + s.P[i, j] * (peaks[i] - eq.f_star[i])
            if lhs > s.a[j] + 1e-12:
                raise Condition318Violation(i, j, float(lhs), float(s.a[j]))


def assemble_general_entries(P: np.ndarray, x_star: np.ndarray,
                             f_star: np.ndarray,
                             params: ComparisonParams) -> np.ndarray:
    """Entry formulas for the general comparison matrix, given raw arrays.

    Off-diagonal entry (i, j) has a supply-coupling part, charging receiver
    j's occupancy above its anchor to sender i's next error, and a routed
    part collecting every path along which component j's outflow deviation
    reaches component i in one step (direct j -> i plus shared receivers).
    """
    box, omega = params.box, params.anchors
    lam, mu, peaks = params.diag_gains, params.outflow_slopes, params.peak_outflows
    n = P.shape[0]
    g = np.zeros((n, n))
    denom = f_star[None, :] + P * (peaks[:, None] - f_star[:, None])
    for i in range(n):
        for j in range(n):
            if i == j:
                g[i, j] = lam[i]
                continue
            first = 0.0
            head = box.hi[j] - omega[j]
            if P[i, j] > 0.0 and peaks[i] > 0.0 and head > 0.0:
                first = (peaks[i] * P[i, j] * head
                         / (denom[i, j] * (box.hi[j] - x_star[j])))
            routed = P[j, i]
            for k in range(n):
                if P[i, k] > 0.0 and P[j, k] > 0.0 and peaks[i] > 0.0:
                    routed += peaks[i] * P[i, k] * P[j, k] / denom[i, k]
            g[i, j] = first + routed * mu[j]
    return g


def assemble_freeway_entries(x_star: np.ndarray,
                             params: ComparisonParams) -> np.ndarray:
    """Tridiagonal entry formulas for the chain comparison matrix."""
    box, omega = params.box, params.anchors
    lam, mu = params.diag_gains, params.outflow_slopes
    n = lam.size
    g = np.zeros((n, n))
    for i in range(n):
        g[i, i] = lam[i]
        if i + 1 < n:
            head = box.hi[i + 1] - omega[i + 1]
            span = box.hi[i + 1] - x_star[i + 1]
            g[i, i + 1] = 0.0 if head <= 0.0 or span <= 0.0 else head / span
        if i - 1 >= 0:
            g[i, i - 1] = mu[i - 1]
    return g


def build_comparison_general(net: ValidatedNetwork, eq: Equilibrium,
                             params: ComparisonParams) -> ComparisonMatrix:
    """Validate anchors and headroom, then assemble the general matrix."""
    s = net.spec
    for j in range(s.n):
        if not (eq.x_star[j] - 1e-9 <= params.anchors[j] <= s.a[j] + 1e-9):
            raise DomainViolation(
                f"anchor {j}: {params.anchors[j]!r} outside [x*_{j}, a_{j}]")
    check_supply_headroom(net, eq, params.peak_outflows)
    g = assemble_general_entries(s.P, eq.x_star, eq.f_star, params)
    return ComparisonMatrix(entries=g, params=params)


def build_comparison_freeway(fw: FreewaySpec, eq: Equilibrium,
                             params: ComparisonParams) -> ComparisonMatrix:
    """Tridiagonal comparison matrix for a freeway chain.

    Requires the recorded peak outflow of each cell over its box interval
    to fit the downstream capacity.  Superdiagonal entries vanish when the
    anchor sits at the box upper bound; subdiagonals carry the upstream
    flow slopes.
    """
    box = params.box
    for i in range(fw.n - 1):
        peak = max(float(params.peak_outflows[i]),
                   fw.demands[i].max_on(float(box.lo[i]), float(box.hi[i])))
        if peak > fw.a[i + 1] + 1e-12:
            raise SupplyHypothesisViolation(i, float(peak), float(fw.a[i + 1]))
    g = assemble_freeway_entries(eq.x_star, params)
    return ComparisonMatrix(entries=g, params=params)


def freeway_diag_gains(fw: FreewaySpec, eq: Equilibrium, box: Box,
                       grid_n: int = 2000, refine: bool = True) -> np.ndarray:
    """Contraction coefficients for the chain with anchors at the box tops.

    Cell i < n must contract both when the downstream box cap c_{i+1}
    curtails its outflow and when the downstream cell is empty; the last
    cell discharges freely.  Suprema run over [b_i, c_i].
    """
    lams = np.zeros(fw.n)
    for i in range(fw.n):
        dem = fw.demands[i]
        x_star = float(eq.x_star[i])
        lo, hi = float(box.lo[i]), float(box.hi[i])
        caps = [fw.a[i + 1] - box.hi[i + 1], fw.a[i + 1]] if i < fw.n - 1 \
            else [np.inf]

        def expr_max(s_arr, caps=caps, dem=dem, x_star=x_star, i=i):
            tail = np.minimum(fw.a[i] - s_arr, fw.v)
            f = dem.value(s_arr)
            vals = [np.abs(s_arr - x_star - np.minimum(cap, f) + tail)
                    for cap in caps]
            return np.maximum.reduce(vals)

        pts = [dem.delta, fw.a[i] - fw.v]
        for cap in caps:
            if np.isfinite(cap):
                pts.extend(dem.preimages(float(cap)))

        limits = []
        sides = []
        if x_star > lo + _EXCLUSION:
            sides.append(-1.0)
        if x_star < hi - _EXCLUSION:
            sides.append(+1.0)
        for side in sides:
            sigma = dem.slope_right(x_star) if side > 0 else dem.slope_left(x_star)
            gap = fw.a[i] - x_star
            if gap < fw.v - 1e-9:
                d_tail = -1.0
            elif abs(gap - fw.v) <= 1e-9:
                d_tail = -1.0 if side > 0 else 0.0
            else:
                d_tail = 0.0
            for cap in caps:
                if np.isfinite(cap) and cap < fw.v - 1e-9:
                    limits.append(float("inf"))  # cap below equilibrium flow
                    continue
                if np.isfinite(cap) and abs(cap - fw.v) <= 1e-9:
                    d_out = 0.0 if sigma * side > 0 else sigma
                else:
                    d_out = sigma
                limits.append(abs(side * (1.0 - d_out + d_tail)))
        if hi > lo:
            lams[i] = _sup_ratio(expr_max, x_star, lo, hi, grid_n, pts,
                                 limits, refine)
        else:
            lams[i] = 0.0
    return lams


# ---------------------------------------------------------------------------
# anchor optimization
# ---------------------------------------------------------------------------

ANCHOR_CANDIDATES = 200
ANCHOR_PASSES = 2
_BATCH_POWER_ITERS = 600


def _batched_rho(mats: np.ndarray) -> np.ndarray:
    """Spectral radii of a [C, n, n] stack of nonnegative matrices by power
    iteration on M + I with a fixed iteration budget (ranking use only)."""
    c, n, _ = mats.shape
    shifted = mats + np.eye(n)[None, :, :]
    x = np.full((c, n), 1.0 / np.sqrt(n))
    est = np.ones(c)
    for _ in range(_BATCH_POWER_ITERS):
        y = np.einsum("cij,cj->ci", shifted, x)
        est = np.linalg.norm(y, axis=1)
        x = y / np.maximum(est[:, None], 1e-300)
    return est - 1.0


def _candidate_gains(net: ValidatedNetwork, eq: Equilibrium, box: Box,
                     omega: np.ndarray, i: int, j: int,
                     cand: np.ndarray, grid_n: int) -> np.ndarray:
    """lambda_i for each candidate anchor value of receiver j (vectorized).

    Grid-plus-breakpoint supremum without golden refinement; candidates
    conceding less than receiver j's equilibrium inflow get +inf.
    """
    s = net.spec
    lo, hi = float(box.lo[i]), float(box.hi[i])
    out = np.zeros(cand.size)
    for d in s.disturbance_box.check_points():
        sn = _sender(net, eq, i, d)
        tgt = {t[0]: t for t in sn.targets}
        (jj, p_j, base_j, a_j) = tgt[j]
        g_cand = a_j - cand

        pts = [np.linspace(lo, hi, grid_n), np.asarray([lo, hi]),
               np.asarray(_sender_breakpoints(sn, omega), dtype=float)]
        # candidate-dependent crossings of the swept receiver's supply level
        t_cross = (g_cand - base_j) / p_j
        crv = sn.curve
        free = t_cross / crv.r
        pts.append(free[(free >= -1e-12) & (free <= crv.delta + 1e-12)])
        if crv.q > 0:
            cong = crv.delta + (crv.r * crv.delta - t_cross) / crv.q
            pts.append(cong[(cong >= crv.delta - 1e-12) & (cong <= crv.a + 1e-12)])
        pts = np.unique(np.clip(np.concatenate(pts), lo, hi))
        gap = np.abs(pts - sn.x_star)
        keep = gap >= _EXCLUSION
        pts, gap = pts[keep], gap[keep]

        t = crv.value(pts)
        coef_fix = np.full_like(pts, sn.Q_i)
        raise_coef = np.full_like(pts, sn.Q_i)
        for (jo, p, base, a_o) in sn.targets:
            attempted = base + p * t
            safe = np.where(attempted > 0.0, attempted, 1.0)
            ratio_raise = np.where(attempted > 0.0,
                                   np.minimum(a_o, attempted) / safe, 1.0)
            raise_coef += p * ratio_raise
            if jo != j:
                g = a_o - omega[jo]
                coef_fix += p * np.where(attempted > 0.0,
                                         np.minimum(g, attempted) / safe, 1.0)
        attempted_j = base_j + p_j * t
        safe_j = np.where(attempted_j > 0.0, attempted_j, 1.0)
        ratio_j = np.where(attempted_j[None, :] > 0.0,
                           np.minimum(g_cand[:, None], attempted_j[None, :])
                           / safe_j[None, :], 1.0)
        coef_drop = coef_fix[None, :] + p_j * ratio_j

        tail = np.minimum(sn.a_i - pts, sn.inflow_star)
        drop = (pts - sn.x_star + tail)[None, :] - coef_drop * t[None, :]
        raise_vals = sn.x_star - pts + raise_coef * t - tail
        ratio = np.maximum(drop, raise_vals[None, :]) / gap[None, :]
        vals = ratio.max(axis=1)

        # one-sided limits at x*, vectorized over candidates
        a_star_j = base_j + p_j * sn.f_star
        infeasible = g_cand < a_star_j - 1e-9 * max(1.0, a_star_j)
        for side in ((-1.0, +1.0) if lo < sn.x_star < hi else
                     ((+1.0,) if sn.x_star <= lo else (-1.0,))):
            sigma = (crv.slope_right(sn.x_star) if side > 0
                     else crv.slope_left(sn.x_star))
            d_fix = sn.Q_i
            d_raise = sn.Q_i
            for (jo, p, base, a_o) in sn.targets:
                a_star = base + p * sn.f_star
                for g, which in ((a_o - omega[jo], "drop"), (a_o, "raise")):
                    if jo == j and which == "drop":
                        continue  # handled vectorized below
                    if a_star <= 0.0:
                        dterm = p if g > 0.0 else 0.0
                    elif abs(g - a_star) <= 1e-9 * max(1.0, a_star):
                        binding = (p * sigma * side) > 0.0
                        dterm = p * g * base / (a_star * a_star) if binding else p
                    elif g < a_star:
                        dterm = p * g * base / (a_star * a_star)
                    else:
                        dterm = p
                    if which == "drop":
                        d_fix += dterm
                    else:
                        d_raise += dterm
            if a_star_j <= 0.0:
                dterm_j = np.where(g_cand > 0.0, p_j, 0.0)
            else:
                boundary = np.abs(g_cand - a_star_j) <= 1e-9 * max(1.0, a_star_j)
                bind_val = p_j * g_cand * base_j / (a_star_j * a_star_j)
                dterm_j = np.where(boundary,
                                   bind_val if (p_j * sigma * side) > 0.0 else p_j,
                                   p_j)
            gap_i = sn.a_i - sn.x_star
            if gap_i < sn.inflow_star - 1e-9:
                d_tail = -1.0
            elif abs(gap_i - sn.inflow_star) <= 1e-9:
                d_tail = -1.0 if side > 0 else 0.0
            else:
                d_tail = 0.0
            lim_drop = side * (1.0 - (d_fix + dterm_j) * sigma + d_tail)
            lim_raise = side * (-1.0 + d_raise * sigma - d_tail)
            vals = np.maximum(vals, np.maximum(lim_drop, lim_raise))
        vals = np.where(infeasible, np.inf, vals)
        out = np.maximum(out, vals)
    return out


def optimize_anchors(net: ValidatedNetwork, eq: Equilibrium, box: Box,
                     grid_n: int = 2000,
                     candidates: int = ANCHOR_CANDIDATES,
                     passes: int = ANCHOR_PASSES
                     ) -> tuple[np.ndarray, ComparisonMatrix]:
    """Coordinate descent of the spectral radius over the anchor vector.

    Each coordinate is swept over an evenly spaced grid of [x*_j, a_j)
    (sweep order 1..n, ``passes`` full rounds); every candidate rebuilds the
    affected contraction coefficients and matrix entries, and the candidate
    with the smallest spectral radius wins, ties resolving to the smallest
    anchor.  Deterministic for fixed grids.  The returned matrix uses fully
    refined coefficient suprema at the chosen anchors.
    """
    s = net.spec
    n = s.n
    mu = outflow_slopes(net, eq, box, grid_n)
    peaks = peak_outflows(net, box)
    check_supply_headroom(net, eq, peaks)
    denom = eq.f_star[None, :] + s.P * (peaks[:, None] - eq.f_star[:, None])

    omega = eq.x_star.copy()
    lam = diag_gains(net, eq, box, omega, grid_n, refine=False)

    def assemble(lam_vec, omega_vec):
        params = ComparisonParams(box=box, anchors=omega_vec.copy(),
                                  diag_gains=lam_vec.copy(),
                                  outflow_slopes=mu, peak_outflows=peaks)
        return build_comparison_general(net, eq, params)

    current = assemble(lam, omega).entries
    for _ in range(passes):
        for j in range(n):
            senders = [i for i in range(n) if s.P[i, j] > 0.0]
            if not senders:
                continue
            cand = eq.x_star[j] + (s.a[j] - eq.x_star[j]) \
                * np.arange(candidates) / candidates
            lam_cands = {i: _candidate_gains(net, eq, box, omega, i, j,
                                             cand, grid_n)
                         for i in senders}
            finite = np.ones(cand.size, dtype=bool)
            for i in senders:
                finite &= np.isfinite(lam_cands[i])
            if not np.any(finite):
                continue
            mats = np.repeat(current[None, :, :], cand.size, axis=0)
            head = np.maximum(0.0, box.hi[j] - cand)
            span = box.hi[j] - eq.x_star[j]
            for i in senders:
                mats[:, i, i] = lam_cands[i]
                first = np.zeros(cand.size)
                if peaks[i] > 0.0 and span > 0.0:
                    first = peaks[i] * s.P[i, j] * head / (denom[i, j] * span)
                routed = s.P[j, i]
                for k in range(n):
                    if s.P[i, k] > 0.0 and s.P[j, k] > 0.0 and peaks[i] > 0.0:
                        routed += peaks[i] * s.P[i, k] * s.P[j, k] / denom[i, k]
                mats[:, i, j] = first + routed * mu[j]
            rhos = np.full(cand.size, np.inf)
            rhos[finite] = _batched_rho(mats[finite])
            best = int(np.argmin(rhos))
            omega[j] = cand[best]
            for i in senders:
                lam[i] = lam_cands[i][best]
            current = mats[best]

    lam = diag_gains(net, eq, box, omega, grid_n, refine=True)
    gamma = assemble(lam, omega)
    return omega, gamma
