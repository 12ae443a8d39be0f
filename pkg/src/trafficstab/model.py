"""Discrete-time traffic network model: validation, equilibrium, dynamics.

The state x holds the vehicle count of each component and lives in the box
S = [0, a_1] x ... x [0, a_n].  One step moves flow along fixed turning
rates P (p[i,j] is the fraction of component i's attempted outflow headed
to component j), with exit fractions Q and external attempted inflows v.
A receiving component admits at most its free space a_j - x_j; the admitted
fraction curtails all attempted inflows proportionally.

``FreewaySpec`` is the chain specialization (every cell forwards its whole
outflow to the next cell, external inflow enters cell 1 only) with a direct
fast-path step that is bit-for-bit identical to the general dynamics on the
induced network.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .demand import DisturbedDemand, PiecewiseLinearDemand
from .errors import (
    DomainViolation,
    InfeasibleEquilibrium,
    NegativeParameter,
    NoFreeFlowPreimage,
    RowSumViolation,
    SelfLoop,
    SingularRouting,
)

_TOL = 1e-12
N_DISTURBANCE_SAMPLES = 64  # extra interior points for "for all d" checks


@dataclass(frozen=True)
class DisturbanceBox:
    """Compact box D in R^l; l = 0 models disturbance-free systems."""

    lo: np.ndarray
    hi: np.ndarray

    @staticmethod
    def empty() -> "DisturbanceBox":
        return DisturbanceBox(np.zeros(0), np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise NegativeParameter("disturbance_box", 0, float("nan"))
        if np.any(self.hi < self.lo):
            raise NegativeParameter("disturbance_box", 0, float(self.hi[0]))

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, d, tol: float = _TOL) -> bool:
        d = np.atleast_1d(np.asarray(d, dtype=float))
        if d.size != self.dim:
            return False
        return bool(np.all(d >= self.lo - tol) and np.all(d <= self.hi + tol))

    def corners(self):
        """All 2^l corner points (the single empty point when l = 0)."""
        if self.dim == 0:
            return [np.zeros(0)]
        if self.dim > 16:
            raise DomainViolation("disturbance box dimension too large to enumerate")
        cols = [(self.lo[k], self.hi[k]) for k in range(self.dim)]
        return [np.array(c) for c in itertools.product(*cols)]

    def sample(self, rng, count: int) -> list[np.ndarray]:
        if self.dim == 0:
            return []
        return [rng.uniform(self.lo, self.hi) for _ in range(count)]

    def check_points(self, count: int = N_DISTURBANCE_SAMPLES, seed: int = 0):
        """Corners plus deterministic interior samples.

        Universally-quantified conditions ("for all d in D") are verified on
        this finite set; for curves nonlinear in d this is a sampling check,
        not a proof.
        """
        pts = self.corners()
        if self.dim > 0 and count > 0:
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
            pts = pts + self.sample(rng, count)
        return pts


@dataclass(frozen=True)
class NetworkSpec:
    n: int
    a: np.ndarray                      # capacities, a_i > 0
    P: np.ndarray                      # turning rates, p[i,j] in [0,1], zero diagonal
    Q: np.ndarray                      # exit rates
    v: np.ndarray                      # external attempted inflows
    demands: tuple                     # n DisturbedDemand entries
    disturbance_box: DisturbanceBox = field(default_factory=DisturbanceBox.empty)

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "P", np.asarray(self.P, dtype=float))
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        object.__setattr__(self, "demands", tuple(self.demands))


@dataclass(frozen=True)
class ValidatedNetwork:
    """A NetworkSpec whose structural invariants have all been checked."""

    spec: NetworkSpec

    def __getattr__(self, name):
        return getattr(self.spec, name)


@dataclass(frozen=True)
class Equilibrium:
    x_star: np.ndarray   # uncongested equilibrium occupancies
    f_star: np.ndarray   # equilibrium flows, (I - P^T) f* = v


@dataclass(frozen=True)
class StepInternals:
    """Per-step flows, exposed so conservation can be audited exactly."""

    x_next: np.ndarray
    flows: np.ndarray          # f_i(d, x_i)
    attempted_in: np.ndarray   # v_j + sum_k p[k,j] f_k
    admitted_in: np.ndarray    # min(a_j - x_j, attempted_in_j)
    supply_ratio: np.ndarray   # admitted / attempted (1 where attempted = 0)
    outflow: np.ndarray        # exits plus curtailed internal sends
    external_in: np.ndarray    # admitted share of v_j
    exit_out: np.ndarray       # Q_i f_i


def validate_network(spec: NetworkSpec) -> ValidatedNetwork:
    """Check the structural invariants; report the first violation found."""
    n = spec.n
    if n < 1 or spec.a.shape != (n,) or spec.P.shape != (n, n) \
            or spec.Q.shape != (n,) or spec.v.shape != (n,) or len(spec.demands) != n:
        raise NegativeParameter("shape", n, float(n))
    for i in range(n):
        if spec.a[i] <= 0:
            raise NegativeParameter("a", i, float(spec.a[i]))
        if spec.v[i] < 0:
            raise NegativeParameter("v", i, float(spec.v[i]))
        if spec.Q[i] < -_TOL or spec.Q[i] > 1 + _TOL:
            raise NegativeParameter("Q", i, float(spec.Q[i]))
        if spec.P[i, i] != 0.0:
            raise SelfLoop(i, float(spec.P[i, i]))
        if np.any(spec.P[i] < -_TOL) or np.any(spec.P[i] > 1 + _TOL):
            j = int(np.argmin(spec.P[i]))
            raise NegativeParameter("P", i, float(spec.P[i, j]))
        total = float(spec.P[i].sum() + spec.Q[i])
        if abs(total - 1.0) > 1e-12:
            raise RowSumViolation(i, total)
    det = float(np.linalg.det(np.eye(n) - spec.P.T))
    if abs(det) <= 1e-12:
        raise SingularRouting(det)
    return ValidatedNetwork(spec)


def equilibrium(net: ValidatedNetwork) -> Equilibrium:
    """Uncongested equilibrium: flows from the routing balance, occupancies
    from the free-flow branch preimage of each demand curve.

    Raises NoFreeFlowPreimage when an equilibrium flow exceeds the free-flow
    range of its cell, and InfeasibleEquilibrium when the admitted-inflow
    feasibility inequality fails for some sampled disturbance, when a flow
    is negative, or when the demands do not agree at x* across D.
    """
    s = net.spec
    f_star = np.linalg.solve(np.eye(s.n) - s.P.T, s.v)
    if np.any(f_star < -1e-12):
        raise InfeasibleEquilibrium(f"negative equilibrium flow {f_star!r}")
    f_star = np.maximum(f_star, 0.0)

    x_star = np.zeros(s.n)
    for i in range(s.n):
        base = s.demands[i].base
        free_cap = base.r * base.delta
        if f_star[i] > free_cap + 1e-12:
            raise NoFreeFlowPreimage(i, float(f_star[i]), float(free_cap))
        x_star[i] = f_star[i] / base.r

    d_points = s.disturbance_box.check_points()
    inflow = s.v + s.P.T @ f_star
    for d in d_points:
        for i in range(s.n):
            fv = s.demands[i].eval(d, x_star[i])
            if abs(fv - f_star[i]) > 1e-10:
                raise InfeasibleEquilibrium(
                    f"demand {i} does not hold its equilibrium flow at x* "
                    f"under d={d!r}: f={fv:.12g}, f*={f_star[i]:.12g}"
                )
        if np.any(inflow + x_star - s.a > 1e-12):
            i = int(np.argmax(inflow + x_star - s.a))
            raise InfeasibleEquilibrium(
                f"component {i}: x*_i + equilibrium inflow exceeds capacity "
                f"({x_star[i] + inflow[i]:.6g} > {s.a[i]:.6g})"
            )
    return Equilibrium(x_star=x_star, f_star=f_star)


def _check_state(spec: NetworkSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n,):
        raise DomainViolation(f"state has shape {x.shape}, expected ({spec.n},)")
    if np.any(x < -_TOL) or np.any(x - spec.a > _TOL):
        raise DomainViolation(f"state {x!r} outside S")
    return np.clip(x, 0.0, spec.a)


def step_internals(net: ValidatedNetwork, x, d=()) -> StepInternals:
    """One transition of the network dynamics with all flow components.

    The admitted inflow of receiver j is min(a_j - x_j, attempted_j); each
    sender's share is curtailed by the same factor.  Edge shares are formed
    as (p[i,j] f_i / attempted_j) * admitted_j so that a single-feeder chain
    reproduces min(a_j - x_j, f_i) exactly, with 0/0 (no attempted inflow)
    read as an uncurtailed supply ratio of 1.
    """
    s = net.spec
    x = _check_state(s, x)
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if not s.disturbance_box.contains(d):
        raise DomainViolation(f"disturbance {d!r} outside D")

    f = np.array([s.demands[i].eval(d, x[i]) for i in range(s.n)])
    attempted = s.v + s.P.T @ f
    admitted = np.minimum(s.a - x, attempted)
    safe = np.where(attempted > 0.0, attempted, 1.0)
    ratio = np.where(attempted > 0.0, admitted / safe, 1.0)
    shares = np.where(attempted[None, :] > 0.0, (s.P * f[:, None]) / safe[None, :], 0.0)
    exit_out = s.Q * f
    outflow = exit_out + shares @ admitted
    x_next = x - outflow + admitted
    x_next = np.minimum(np.maximum(x_next, 0.0), s.a)
    external_in = np.where(attempted > 0.0, ratio * s.v, 0.0)
    return StepInternals(
        x_next=x_next, flows=f, attempted_in=attempted, admitted_in=admitted,
        supply_ratio=np.clip(ratio, 0.0, 1.0), outflow=outflow,
        external_in=external_in, exit_out=exit_out,
    )


def step(net: ValidatedNetwork, x, d=()) -> np.ndarray:
    """Next state of the general dynamics; stays inside S."""
    return step_internals(net, x, d).x_next


# ---------------------------------------------------------------------------
# freeway chain specialization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreewaySpec:
    """Chain of n >= 3 cells; cell i forwards everything to cell i+1.

    Demand curves are disturbance-free here.  Constructing the spec checks
    the chain hypotheses: 0 < f_i(s) < a_{i+1} on (0, a_i] for i < n, the
    inflow has a free-flow preimage in every cell, and x*_i + v < a_i.
    """

    n: int
    a: np.ndarray
    demands: tuple            # n PiecewiseLinearDemand entries
    v: float

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "demands", tuple(self.demands))
        if self.n < 3:
            raise NegativeParameter("n", self.n, float(self.n))
        if self.a.shape != (self.n,) or len(self.demands) != self.n:
            raise NegativeParameter("shape", self.n, float(self.n))
        if self.v <= 0:
            raise NegativeParameter("v", 0, float(self.v))
        for i, fdem in enumerate(self.demands):
            if abs(fdem.a - self.a[i]) > _TOL:
                raise NegativeParameter("demand.a", i, float(fdem.a))
            if i < self.n - 1:
                # positivity on (0, a_i] reduces to f(a_i) > 0; the peak is r*delta
                if fdem.value(self.a[i]) <= 0:
                    raise NegativeParameter("demand positivity", i, float(fdem.value(self.a[i])))
                if fdem.r * fdem.delta >= self.a[i + 1]:
                    raise NegativeParameter("demand peak vs capacity", i,
                                            float(fdem.r * fdem.delta))
        for i, fdem in enumerate(self.demands):
            if self.v > fdem.r * fdem.delta + 1e-12:
                raise NoFreeFlowPreimage(i, float(self.v), float(fdem.r * fdem.delta))
            if self.v / fdem.r + self.v >= self.a[i]:
                raise InfeasibleEquilibrium(
                    f"cell {i}: x*_i + v = {self.v / fdem.r + self.v:.6g} "
                    f"not below capacity {self.a[i]:.6g}"
                )

    def x_star(self) -> np.ndarray:
        return np.array([self.v / fdem.r for fdem in self.demands])


def freeway_equilibrium(fw: FreewaySpec) -> Equilibrium:
    return Equilibrium(x_star=fw.x_star(), f_star=np.full(fw.n, float(fw.v)))


def freeway_to_network(fw: FreewaySpec) -> ValidatedNetwork:
    """The general-network form induced by the chain (shared dynamics)."""
    n = fw.n
    P = np.zeros((n, n))
    for i in range(n - 1):
        P[i, i + 1] = 1.0
    Q = np.zeros(n)
    Q[n - 1] = 1.0
    v = np.zeros(n)
    v[0] = fw.v
    demands = tuple(DisturbedDemand(base=dem) for dem in fw.demands)
    return validate_network(NetworkSpec(
        n=n, a=fw.a.copy(), P=P, Q=Q, v=v, demands=demands,
        disturbance_box=DisturbanceBox.empty(),
    ))


def freeway_step(fw: FreewaySpec, x) -> np.ndarray:
    """Direct evaluation of the chain dynamics (same floats as step())."""
    n = fw.n
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise DomainViolation(f"state has shape {x.shape}, expected ({n},)")
    if np.any(x < -_TOL) or np.any(x - fw.a > _TOL):
        raise DomainViolation(f"state {x!r} outside S")
    x = np.clip(x, 0.0, fw.a)
    f = np.array([fw.demands[i].value(x[i]) for i in range(n)])
    out = np.empty(n)
    out[:-1] = np.minimum(fw.a[1:] - x[1:], f[:-1])
    out[-1] = f[-1]
    inflow = np.empty(n)
    inflow[0] = min(fw.a[0] - x[0], fw.v)
    inflow[1:] = np.minimum(fw.a[1:] - x[1:], f[:-1])
    x_next = x - out + inflow
    return np.minimum(np.maximum(x_next, 0.0), fw.a)
