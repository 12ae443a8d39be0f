"""Trajectory generation, decay estimation, sampled Lyapunov checks, and
certification-threshold sweeps.

All randomness flows through counter-based generators keyed by (seed,
stream) so that trials are reproducible independently of execution order.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .comparison import ComparisonMatrix
from .errors import (
    AlwaysCertifies,
    DegenerateTrajectory,
    DomainViolation,
    NegativeParameter,
    NeverCertifies,
)
from .model import (
    Equilibrium,
    FreewaySpec,
    ValidatedNetwork,
    equilibrium,
    freeway_step,
    freeway_to_network,
    step,
)
from .trapping import Box

FIT_FLOOR = 1e-12  # error magnitudes below this end the decay-fit window


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for (seed, stream) so parallel trials are
    reproducible without shared state."""
    entropy = [int(seed)] + [int(v) for v in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray        # [T+1, n]
    disturbances: np.ndarray  # [T, l]


@dataclass(frozen=True)
class DecayEstimate:
    m_hat: float       # overshoot coefficient
    sigma_hat: float   # decay rate per step (positive = contracting)
    r_squared: float


def _advance(system):
    if isinstance(system, FreewaySpec):
        return lambda x, d: freeway_step(system, x), 0
    net: ValidatedNetwork = system
    return lambda x, d: step(net, x, d), net.spec.disturbance_box.dim


def simulate(system, x0, disturbance_policy="none", T: int = 500,
             seed: int = 0) -> Trajectory:
    """Iterate the dynamics for T steps from x0.

    ``disturbance_policy`` is "none" (disturbance-free systems), "constant"
    paired as ("constant", d), "uniform" for i.i.d. uniform draws from the
    disturbance box, or ("sequence", array) with one row per step.
    Deterministic for a fixed seed.
    """
    if T < 1:
        raise NegativeParameter("T", 0, float(T))
    advance, dim = _advance(system)
    x0 = np.asarray(x0, dtype=float)
    a = system.a if isinstance(system, FreewaySpec) else system.spec.a
    if x0.shape != a.shape or np.any(x0 < -1e-12) or np.any(x0 - a > 1e-12):
        raise DomainViolation(f"x0 = {x0!r} outside S")

    mode = disturbance_policy if isinstance(disturbance_policy, str) \
        else disturbance_policy[0]
    rng = make_rng(seed)
    if mode == "sequence":
        seq = np.asarray(disturbance_policy[1], dtype=float).reshape(T, dim)
    states = np.empty((T + 1, a.size))
    ds = np.empty((T, dim))
    states[0] = np.clip(x0, 0.0, a)
    for t in range(T):
        if dim == 0 or mode == "none":
            d = np.zeros(dim)
        elif mode == "constant":
            d = np.asarray(disturbance_policy[1], dtype=float)
        elif mode == "uniform":
            dbox = system.spec.disturbance_box
            d = rng.uniform(dbox.lo, dbox.hi)
        elif mode == "sequence":
            d = seq[t]
        else:
            raise NegativeParameter("disturbance_policy", 0, float("nan"))
        ds[t] = d
        states[t + 1] = advance(states[t], d)
    return Trajectory(states=states, disturbances=ds)


def estimate_decay(traj: Trajectory, x_star) -> DecayEstimate:
    """Least-squares fit of log |x(t) - x*| against t.

    The first max(5, T/10) steps are excluded to skip the transient, and
    the window ends once the error drops to the floor.  sigma_hat is minus
    the fitted slope; m_hat rescales the intercept by the initial error.
    """
    x_star = np.asarray(x_star, dtype=float)
    errs = np.linalg.norm(traj.states - x_star[None, :], axis=1)
    if errs[0] <= FIT_FLOOR:
        raise DegenerateTrajectory("trajectory starts at the equilibrium")
    T = traj.states.shape[0] - 1
    start = max(5, T // 10)
    end = T + 1
    for t in range(start, T + 1):
        if errs[t] <= FIT_FLOOR:
            end = t
            break
    ts = np.arange(start, end, dtype=float)
    if ts.size < 2:
        raise DegenerateTrajectory("error floor reached before the fit window")
    ys = np.log(errs[start:end])
    slope, intercept = np.polyfit(ts, ys, 1)
    resid = ys - (slope * ts + intercept)
    total = ys - ys.mean()
    ss_tot = float(total @ total)
    ss_res = float(resid @ resid)
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return DecayEstimate(m_hat=float(np.exp(intercept) / errs[0]),
                         sigma_hat=float(-slope), r_squared=float(r2))


@dataclass(frozen=True)
class LyapunovCheck:
    samples: int
    max_violation: float       # negative means every sample satisfied it
    worst_x: np.ndarray
    worst_d: np.ndarray
    worst_component: int


def check_lyapunov_inequality(system, gamma: ComparisonMatrix, box: Box,
                              samples: int = 10_000, seed: int = 0,
                              eq: Equilibrium | None = None) -> LyapunovCheck:
    """Sample x in the box (and d in D) and compare V(step(x,d)) against
    G V(x) componentwise, V_i = |x_i - x*_i|.

    Reports the largest componentwise violation; a sound comparison matrix
    keeps it at rounding level.
    """
    if samples < 1:
        raise NegativeParameter("samples", 0, float(samples))
    if isinstance(system, FreewaySpec):
        net = freeway_to_network(system)
    else:
        net = system
    if eq is None:
        eq = equilibrium(net)
    dbox = net.spec.disturbance_box
    g = gamma.entries
    rng = make_rng(seed, 7)
    worst = -math.inf
    worst_x = np.zeros(net.spec.n)
    worst_d = np.zeros(dbox.dim)
    worst_i = -1
    for _ in range(samples):
        x = rng.uniform(box.lo, box.hi)
        d = rng.uniform(dbox.lo, dbox.hi) if dbox.dim else np.zeros(0)
        v_now = np.abs(x - eq.x_star)
        v_next = np.abs(step(net, x, d) - eq.x_star)
        gap = v_next - g @ v_now
        i = int(np.argmax(gap))
        if gap[i] > worst:
            worst, worst_x, worst_d, worst_i = float(gap[i]), x, d, i
    return LyapunovCheck(samples=samples, max_violation=worst,
                         worst_x=worst_x, worst_d=worst_d, worst_component=worst_i)


def sweep_parameter(template: Callable[[float], FreewaySpec],
                    parameter_range: tuple[float, float],
                    grid_n: int,
                    certifier: Callable[[FreewaySpec, int], bool],
                    tol: float = 1e-6,
                    log: list | None = None) -> float:
    """Largest parameter value (within tol) for which the certifier passes.

    Bisection assumes certifiability is monotone along the parameter: it
    must hold at the lower endpoint and fail at the upper one, otherwise
    NeverCertifies / AlwaysCertifies is raised.  Candidate outcomes are
    appended to ``log`` as (value, ok) pairs when given.
    """
    lo, hi = float(parameter_range[0]), float(parameter_range[1])
    if not hi > lo:
        raise NegativeParameter("parameter_range", 0, hi - lo)

    def check(p: float) -> bool:
        ok = bool(certifier(template(p), grid_n))
        if log is not None:
            log.append((p, ok))
        return ok

    if not check(lo):
        raise NeverCertifies(f"certifier fails at lower endpoint {lo!r}")
    if check(hi):
        raise AlwaysCertifies(f"certifier passes at upper endpoint {hi!r}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if check(mid):
            lo = mid
        else:
            hi = mid
    return lo


def trajectory_to_csv(traj: Trajectory) -> str:
    """CSV with header t,x_1,...,x_n; floats at 17 significant digits."""
    n = traj.states.shape[1]
    buf = io.StringIO()
    buf.write("t," + ",".join(f"x_{i + 1}" for i in range(n)) + "\n")
    for t, row in enumerate(traj.states):
        buf.write(str(t) + "," + ",".join(format(v, ".17g") for v in row) + "\n")
    return buf.getvalue()
