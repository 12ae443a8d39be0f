"""Trapping boxes: regions every trajectory enters and never leaves.

The crude box S (the full state space) always traps.  For freeway chains a
box can be tightened one coordinate at a time: an upper bound c_i can be
lowered when, on the current box, the cell's outflow strictly exceeds its
inflow above the new bound and the one-step image from below stays below
the bound.  ``freeway_trapping_box`` chains these refinements into the
full backward/forward grid algorithm; ``shrink_upper`` and ``raise_lower``
expose the single-coordinate moves.

Grid comparisons in ``freeway_trapping_box`` accept a zero outflow margin
on the trailing range while requiring prior grid points to map strictly
below the candidate.  A zero margin means finite entry time is no longer
guaranteed by the drift argument, which the transient bound reports as
unknown; the fully strict variant loses roughly one grid cell per chained
step and is measurably more conservative on coarse grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConditionFails,
    DomainViolation,
    NegativeParameter,
    NoFeasibleGridPoint,
)
from .model import FreewaySpec, ValidatedNetwork, freeway_step, step

_TOL = 1e-9


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo_1, hi_1] x ... x [lo_n, hi_n]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise NegativeParameter("box", 0, float("nan"))
        if np.any(self.lo < -1e-12) or np.any(self.hi <= self.lo - 1e-12):
            i = int(np.argmin(self.hi - self.lo))
            raise NegativeParameter("box", i, float(self.hi[i] - self.lo[i]))

    @property
    def n(self) -> int:
        return self.lo.size

    def contains(self, x, tol: float = _TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def excursion(self, x) -> float:
        """Largest componentwise distance outside the box (0 if inside)."""
        x = np.asarray(x, dtype=float)
        return float(max(0.0, np.max(np.maximum(self.lo - x, x - self.hi))))

    def replace_hi(self, i: int, value: float) -> "Box":
        hi = self.hi.copy()
        hi[i] = value
        return Box(self.lo, hi)

    def replace_lo(self, i: int, value: float) -> "Box":
        lo = self.lo.copy()
        lo[i] = value
        return Box(lo, self.hi)


@dataclass(frozen=True)
class TrapStep:
    label: str        # e.g. "k[4]" or "c[0]" (0-based coordinate)
    coordinate: int
    value: float
    margin: float     # minimum trailing outflow margin at the chosen point


@dataclass(frozen=True)
class TrapReport:
    box: Box
    transient_bound: int | None   # steps until entry, None when not derivable
    provenance: tuple[TrapStep, ...]
    backward_bounds: np.ndarray   # the k_i values (k_1 slot holds a_1)


# ---------------------------------------------------------------------------
# single-coordinate refinements
# ---------------------------------------------------------------------------

def _grid(lo: float, hi: float, grid_n: int) -> np.ndarray:
    return np.linspace(lo, hi, max(2, grid_n))


def shrink_upper(fw: FreewaySpec, box: Box, i: int, c_new: float,
                 grid_n: int = 2000) -> Box:
    """Lower the upper bound of coordinate i to c_new, verifying on a grid
    that (a) above c_new the cell strictly drains and (b) the one-step image
    of occupancies below c_new stays at or below c_new.
    """
    x_star = fw.x_star()
    if not (x_star[i] - 1e-12 <= c_new <= box.hi[i] + 1e-12):
        raise DomainViolation(
            f"c_new = {c_new!r} outside [x*_{i} = {x_star[i]!r}, c_{i} = {box.hi[i]!r}]"
        )
    if c_new >= box.hi[i]:
        return box  # no shrink requested

    dem = fw.demands[i]
    if i == 0:
        cap_out = fw.a[1] - box.hi[1]
        inflow_cap = fw.v
    elif i < fw.n - 1:
        cap_out = fw.a[i + 1] - box.hi[i + 1]
        inflow_cap = fw.demands[i - 1].max_on(box.lo[i - 1], box.hi[i - 1])
    else:
        cap_out = math.inf
        inflow_cap = fw.demands[i - 1].max_on(box.lo[i - 1], box.hi[i - 1])

    def margin(s):
        return np.minimum(cap_out, dem.value(s)) - np.minimum(fw.a[i] - s, inflow_cap)

    upper = _grid(c_new, box.hi[i], grid_n)
    m = margin(upper)
    if np.min(m) <= 0:
        worst = int(np.argmin(m))
        raise ConditionFails("min-positivity", i, float(upper[worst]), float(m[worst]))
    lower = _grid(box.lo[i], c_new, grid_n)
    image = lower - margin(lower)
    if np.max(image) > c_new:
        worst = int(np.argmax(image))
        raise ConditionFails("max-bound", i, float(lower[worst]), float(image[worst]))
    return box.replace_hi(i, c_new)


def raise_lower(fw: FreewaySpec, box: Box, i: int, b_new: float,
                grid_n: int = 2000) -> Box:
    """Raise the lower bound of coordinate i to b_new: below b_new the cell
    strictly fills, and the one-step image from above stays at or above it.
    """
    x_star = fw.x_star()
    if not (box.lo[i] - 1e-12 <= b_new <= x_star[i] + 1e-12):
        raise DomainViolation(
            f"b_new = {b_new!r} outside [b_{i} = {box.lo[i]!r}, x*_{i} = {x_star[i]!r}]"
        )
    if b_new <= box.lo[i]:
        return box

    dem = fw.demands[i]
    if i == 0:
        cap_out = fw.a[1] - box.lo[1]
        inflow_floor = fw.v
    elif i < fw.n - 1:
        cap_out = fw.a[i + 1] - box.lo[i + 1]
        inflow_floor = fw.demands[i - 1].min_on(box.lo[i - 1], box.hi[i - 1])
    else:
        cap_out = math.inf
        inflow_floor = fw.demands[i - 1].min_on(box.lo[i - 1], box.hi[i - 1])

    def fill_margin(s):
        return np.minimum(fw.a[i] - s, inflow_floor) - np.minimum(cap_out, dem.value(s))

    below = _grid(box.lo[i], b_new, grid_n)
    m = fill_margin(below)
    if np.min(m) <= 0:
        worst = int(np.argmin(m))
        raise ConditionFails("min-positivity", i, float(below[worst]), float(m[worst]))
    above = _grid(b_new, box.hi[i], grid_n)
    image = above + fill_margin(above)
    if np.min(image) < b_new:
        worst = int(np.argmin(image))
        raise ConditionFails("max-bound", i, float(above[worst]), float(image[worst]))
    return box.replace_lo(i, b_new)


# ---------------------------------------------------------------------------
# full freeway algorithm
# ---------------------------------------------------------------------------

def _pick_smallest(s: np.ndarray, q: np.ndarray, lo: float, hi: float,
                   label: str) -> tuple[int, float]:
    """Smallest grid point s_j in [lo, hi) such that q >= 0 on [s_j, end of
    grid] and every earlier point maps strictly below s_j (s_l - q_l < s_j).
    Returns (index, trailing margin)."""
    n = s.size
    suffix_min = np.minimum.accumulate(q[::-1])[::-1]
    image = s - q
    prefix_max = np.maximum.accumulate(image)
    for j in range(n):
        if s[j] < lo - 1e-12:
            continue
        if s[j] >= hi - 1e-12:
            break
        if suffix_min[j] < 0.0:
            continue
        if j > 0 and prefix_max[j - 1] >= s[j]:
            continue
        return j, float(suffix_min[j])
    raise NoFeasibleGridPoint(label)


def freeway_trapping_box(fw: FreewaySpec, grid_n: int = 1000) -> TrapReport:
    """Backward/forward grid construction of a trapping box [0, c] for a
    freeway chain.

    The backward pass bounds each cell from the last one upstream to cell 2
    using worst-case upstream inflow (peak demand over the full cell range);
    the forward pass then re-tightens every cell using the peak demand over
    the already-tightened upstream range.  Each bound is the smallest grid
    point passing the drain/image conditions.
    """
    n = fw.n
    if grid_n < 2:
        raise NegativeParameter("grid_n", 0, float(grid_n))
    x_star = fw.x_star()
    steps: list[TrapStep] = []
    transient: float | None = 0
    k = np.array(fw.a, dtype=float)  # backward bounds; k[0] stays a_0

    def account(hi_prev: float, value: float, margin: float):
        nonlocal transient
        if transient is None:
            return
        if margin <= 0.0:
            transient = None
        else:
            transient += math.ceil(max(0.0, hi_prev - value) / margin) + 1

    def cell_grid(i):
        return np.linspace(0.0, fw.a[i], grid_n + 1)

    # backward pass: k_n, ..., k_2 with upstream peak over the full range
    for i in range(n - 1, 0, -1):
        s = cell_grid(i)
        peak_up = fw.demands[i - 1].max_on(0.0, fw.a[i - 1])
        outcap = math.inf if i == n - 1 else fw.a[i + 1] - k[i + 1]
        q = np.minimum(outcap, fw.demands[i].value(s)) \
            - np.minimum(fw.a[i] - s, peak_up)
        j, margin = _pick_smallest(s, q, x_star[i], fw.a[i], f"k[{i}]")
        k[i] = s[j]
        steps.append(TrapStep(f"k[{i}]", i, float(s[j]), margin))
        account(fw.a[i], k[i], margin)

    # forward pass: c_1 with the true external inflow, then c_2 ... c_n with
    # upstream peaks over the tightened ranges
    c = np.array(fw.a, dtype=float)
    s = cell_grid(0)
    q = np.minimum(fw.a[1] - k[1], fw.demands[0].value(s)) \
        - np.minimum(fw.a[0] - s, fw.v)
    j, margin = _pick_smallest(s, q, x_star[0], fw.a[0], "c[0]")
    c[0] = s[j]
    steps.append(TrapStep("c[0]", 0, float(s[j]), margin))
    account(fw.a[0], c[0], margin)

    for i in range(1, n):
        s = cell_grid(i)
        peak_up = fw.demands[i - 1].max_on(0.0, c[i - 1])
        outcap = math.inf if i == n - 1 else fw.a[i + 1] - k[i + 1]
        q = np.minimum(outcap, fw.demands[i].value(s)) \
            - np.minimum(fw.a[i] - s, peak_up)
        j, margin = _pick_smallest(s, q, x_star[i], k[i], f"c[{i}]")
        c[i] = s[j]
        steps.append(TrapStep(f"c[{i}]", i, float(s[j]), margin))
        account(k[i], c[i], margin)

    box = Box(np.zeros(n), c)
    bound = None if transient is None else int(transient)
    return TrapReport(box=box, transient_bound=bound,
                      provenance=tuple(steps), backward_bounds=k)


# ---------------------------------------------------------------------------
# empirical falsification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrapVerification:
    trials: int
    entered: int                      # trials that entered the box in time
    max_entry_time: int | None        # None when some trial never entered
    max_post_entry_excursion: float
    violated: bool                    # excursion observed, or entry missing


def verify_trap_empirically(system, box: Box, trials: int = 100,
                            horizon: int = 500, seed: int = 0) -> TrapVerification:
    """Simulate random starts and check the box is entered and never left.

    ``system`` is a ValidatedNetwork or a FreewaySpec.  This can only
    falsify: a 'violated' report disproves the box, a clean one is evidence
    within the sampled trials and horizon.
    """
    if trials < 1 or horizon < 1:
        raise NegativeParameter("trials/horizon", 0, float(min(trials, horizon)))
    if isinstance(system, FreewaySpec):
        a = system.a
        dbox = None
        advance = lambda x, rng: freeway_step(system, x)
    else:
        net: ValidatedNetwork = system
        a = net.spec.a
        dbox = net.spec.disturbance_box if net.spec.disturbance_box.dim else None
        def advance(x, rng):
            d = rng.uniform(dbox.lo, dbox.hi) if dbox is not None else ()
            return step(net, x, d)

    entered = 0
    max_entry: int | None = 0
    worst_excursion = 0.0
    for trial in range(trials):
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=[int(seed), int(trial)])))
        x = rng.uniform(np.zeros(a.size), a)
        entry_t: int | None = 0 if box.contains(x, tol=0.0) else None
        for t in range(1, horizon + 1):
            x = advance(x, rng)
            if entry_t is None:
                if box.contains(x, tol=0.0):
                    entry_t = t
            else:
                worst_excursion = max(worst_excursion, box.excursion(x))
        if entry_t is None:
            max_entry = None
        else:
            entered += 1
            if max_entry is not None:
                max_entry = max(max_entry, entry_t)
    return TrapVerification(
        trials=trials, entered=entered, max_entry_time=max_entry,
        max_post_entry_excursion=worst_excursion,
        violated=(entered < trials) or (worst_excursion > _TOL),
    )
