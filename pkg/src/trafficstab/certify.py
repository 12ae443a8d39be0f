"""End-to-end certification pipelines and auditable certificates.

A certificate is either GES_CERTIFIED or INCONCLUSIVE; the conditions here
are sufficient only, so the verdict is never "unstable".  Simulation
evidence against convergence is reported separately by the simulator.
Every certified result carries the full coefficient set, so the matrix and
its spectral test can be reproduced from the serialized report alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .comparison import (
    ComparisonMatrix,
    ComparisonParams,
    assemble_freeway_entries,
    assemble_general_entries,
    build_comparison_freeway,
    build_comparison_general,
    diag_gains,
    freeway_diag_gains,
    optimize_anchors,
    outflow_slopes,
    peak_outflows,
)
from .demand import DisturbedDemand, lipschitz_constant, outflow_slope
from .errors import NegativeEntry, TrafficStabError
from .model import (
    Equilibrium,
    FreewaySpec,
    NetworkSpec,
    ValidatedNetwork,
    equilibrium,
    freeway_equilibrium,
    validate_network,
)
from .spectral import (
    as_nonnegative_matrix,
    best_epsilon_refined_bound,
    row_sum_bound,
    spectral_radius,
)
from .trapping import Box, TrapReport, freeway_trapping_box

GES = "GES_CERTIFIED"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class Certificate:
    verdict: str
    method: str                      # general_network | freeway_chain | matrix_direct
    rho: float | None = None         # value the verdict was decided on
    bound_used: str | None = None    # row_sum | epsilon_refined | power_iteration
    gamma: np.ndarray | None = None
    params: ComparisonParams | None = None
    x_star: np.ndarray | None = None
    f_star: np.ndarray | None = None
    network: dict | None = None      # {"n", "a", "P", "Q", "v"} snapshot
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def certified(self) -> bool:
        return self.verdict == GES


def decide_from_entries(entries: np.ndarray) -> tuple[str, float, str]:
    """Cheapest-first verdict: row sum, refined row sum, power iteration."""
    rs = row_sum_bound(entries)
    if rs < 1.0:
        return GES, rs, "row_sum"
    refined, _ = best_epsilon_refined_bound(entries)
    if refined < 1.0:
        return GES, refined, "epsilon_refined"
    rho = spectral_radius(entries)
    verdict = GES if rho < 1.0 else INCONCLUSIVE
    return verdict, rho, "power_iteration"


def _network_snapshot(net: ValidatedNetwork) -> dict:
    s = net.spec
    return {"n": s.n, "a": s.a.copy(), "P": s.P.copy(),
            "Q": s.Q.copy(), "v": s.v.copy()}


def certify_network(spec, box: Box | None = None, omega="auto",
                    grid_n: int = 2000) -> Certificate:
    """Full pipeline for a general network on a (claimed) trapping box.

    The box is taken on trust for general networks (the constructive
    algorithms exist only for chains); ``verify_trap_empirically`` is the
    falsification tool.  Anchors are grid-optimized when ``omega`` is
    "auto".  Module errors surface as INCONCLUSIVE with the reason noted.
    """
    notes: list[str] = []
    try:
        net = spec if isinstance(spec, ValidatedNetwork) else validate_network(spec)
        if box is None:
            box = Box(np.zeros(net.spec.n), net.spec.a.copy())
        if np.any(net.spec.v == 0.0):
            notes.append("zero external inflow accepted (equilibrium may sit "
                         "on the boundary of S)")
        eq = equilibrium(net)
        lips = [lipschitz_constant(net.spec.demands[i],
                                   net.spec.disturbance_box if net.spec.disturbance_box.dim else None)
                for i in range(net.spec.n)]
        notes.append("demand slope bounds: "
                     + ",".join(format(v, ".6g") for v in lips))
        if isinstance(omega, str) and omega == "auto":
            anchors, gamma = optimize_anchors(net, eq, box, grid_n)
        else:
            anchors = np.asarray(omega, dtype=float)
            lam = diag_gains(net, eq, box, anchors, grid_n)
            params = ComparisonParams(
                box=box, anchors=anchors, diag_gains=lam,
                outflow_slopes=outflow_slopes(net, eq, box, grid_n),
                peak_outflows=peak_outflows(net, box))
            gamma = build_comparison_general(net, eq, params)
        if not np.all(np.isfinite(gamma.entries)):
            return Certificate(
                verdict=INCONCLUSIVE, method="general_network",
                params=gamma.params, x_star=eq.x_star, f_star=eq.f_star,
                network=_network_snapshot(net),
                notes=tuple(notes + ["a contraction coefficient diverged "
                                     "(anchor concedes too little supply)"]))
        verdict, rho, bound = decide_from_entries(gamma.entries)
        return Certificate(
            verdict=verdict, method="general_network", rho=rho,
            bound_used=bound, gamma=gamma.entries, params=gamma.params,
            x_star=eq.x_star, f_star=eq.f_star,
            network=_network_snapshot(net), notes=tuple(notes))
    except TrafficStabError as err:
        return Certificate(verdict=INCONCLUSIVE, method="general_network",
                           notes=tuple(notes + [f"{type(err).__name__}: {err}"]))


def certify_freeway(fw: FreewaySpec, grid_n: int = 1000) -> Certificate:
    """Chain pipeline: trapping box, contraction coefficients on it, then
    the tridiagonal comparison matrix with anchors at the box tops."""
    notes: list[str] = []
    try:
        trap: TrapReport = freeway_trapping_box(fw, grid_n)
        eq = freeway_equilibrium(fw)
        box = trap.box
        notes.append("trapping box hi: "
                     + ",".join(format(v, ".10g") for v in box.hi))
        notes.append("backward bounds: "
                     + ",".join(format(v, ".10g") for v in trap.backward_bounds))
        notes.append("transient bound: "
                     + ("unknown" if trap.transient_bound is None
                        else str(trap.transient_bound)))
        lam = freeway_diag_gains(fw, eq, box, grid_n)
        anchors = box.hi.copy()
        mu = np.array([
            outflow_slope(DisturbedDemand(base=fw.demands[i]),
                          float(eq.x_star[i]), float(eq.f_star[i]),
                          (float(box.lo[i]), float(box.hi[i])), grid_n)
            for i in range(fw.n)
        ])
        params = ComparisonParams(
            box=box, anchors=anchors, diag_gains=lam, outflow_slopes=mu,
            peak_outflows=np.array([fw.demands[i].max_on(float(box.lo[i]),
                                                         float(box.hi[i]))
                                    for i in range(fw.n)]))
        if np.any(lam >= 1.0):
            bad = ",".join(format(v, ".6g") for v in lam)
            return Certificate(
                verdict=INCONCLUSIVE, method="freeway_chain", params=params,
                x_star=eq.x_star, f_star=eq.f_star,
                notes=tuple(notes + [f"contraction coefficients not all "
                                     f"below 1: {bad}"]))
        gamma = build_comparison_freeway(fw, eq, params)
        verdict, rho, bound = decide_from_entries(gamma.entries)
        return Certificate(
            verdict=verdict, method="freeway_chain", rho=rho,
            bound_used=bound, gamma=gamma.entries, params=params,
            x_star=eq.x_star, f_star=eq.f_star, notes=tuple(notes))
    except TrafficStabError as err:
        return Certificate(verdict=INCONCLUSIVE, method="freeway_chain",
                           notes=tuple(notes + [f"{type(err).__name__}: {err}"]))


def certify_linear_comparison(entries) -> Certificate:
    """Direct verdict for a user-supplied nonnegative comparison matrix."""
    m = as_nonnegative_matrix(entries)  # raises NegativeEntry
    verdict, rho, bound = decide_from_entries(m)
    return Certificate(verdict=verdict, method="matrix_direct", rho=rho,
                       bound_used=bound, gamma=m)


def freeway_threshold_certifier(thresholds):
    """Certifier for parameter sweeps: trapping box construction must
    succeed and the resulting contraction coefficients must not exceed the
    fixed per-cell thresholds."""
    thresholds = np.asarray(thresholds, dtype=float)

    def certifier(fw: FreewaySpec, grid_n: int) -> bool:
        try:
            trap = freeway_trapping_box(fw, grid_n)
        except TrafficStabError:
            return False
        eq = freeway_equilibrium(fw)
        lam = freeway_diag_gains(fw, eq, trap.box, grid_n)
        return bool(np.all(lam <= thresholds + 1e-9))

    return certifier


# ---------------------------------------------------------------------------
# serialization / audit
# ---------------------------------------------------------------------------

def _fmt_vec(v) -> str:
    return ",".join(format(float(x), ".17g") for x in np.asarray(v).ravel())


def _fmt_sparse(P: np.ndarray) -> str:
    triples = [f"{i + 1}:{j + 1}:{format(P[i, j], '.17g')}"
               for i in range(P.shape[0]) for j in range(P.shape[1])
               if P[i, j] != 0.0]
    return ";".join(triples) if triples else "-"


def _parse_sparse(text: str, n: int) -> np.ndarray:
    P = np.zeros((n, n))
    if text.strip() != "-":
        for item in text.split(";"):
            i, j, rate = item.split(":")
            P[int(i) - 1, int(j) - 1] = float(rate)
    return P


def serialize_certificate(cert: Certificate) -> str:
    """Stable-order key:value report with the matrix as a CSV block."""
    lines = [f"verdict: {cert.verdict}", f"method: {cert.method}"]
    if cert.rho is not None:
        lines.append(f"rho: {format(cert.rho, '.17g')}")
        lines.append(f"bound_used: {cert.bound_used}")
    if cert.network is not None:
        net = cert.network
        lines.append(f"n: {net['n']}")
        lines.append(f"a: {_fmt_vec(net['a'])}")
        lines.append(f"P: {_fmt_sparse(net['P'])}")
        lines.append(f"Q: {_fmt_vec(net['Q'])}")
        lines.append(f"v: {_fmt_vec(net['v'])}")
    if cert.x_star is not None:
        lines.append(f"x_star: {_fmt_vec(cert.x_star)}")
        lines.append(f"f_star: {_fmt_vec(cert.f_star)}")
    if cert.params is not None:
        p = cert.params
        lines.append(f"box_lo: {_fmt_vec(p.box.lo)}")
        lines.append(f"box_hi: {_fmt_vec(p.box.hi)}")
        lines.append(f"anchors: {_fmt_vec(p.anchors)}")
        lines.append(f"diag_gains: {_fmt_vec(p.diag_gains)}")
        lines.append(f"outflow_slopes: {_fmt_vec(p.outflow_slopes)}")
        lines.append(f"peak_outflows: {_fmt_vec(p.peak_outflows)}")
    for note in cert.notes:
        lines.append(f"note: {note}")
    if cert.gamma is not None:
        lines.append("gamma:")
        for row in np.atleast_2d(cert.gamma):
            lines.append(",".join(format(float(x), ".17g") for x in row))
    return "\n".join(lines) + "\n"


def parse_certificate(text: str) -> Certificate:
    fields: dict[str, str] = {}
    notes: list[str] = []
    gamma_rows: list[list[float]] = []
    in_gamma = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if in_gamma:
            gamma_rows.append([float(x) for x in line.split(",")])
            continue
        if line == "gamma:":
            in_gamma = True
            continue
        key, _, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if key == "note":
            notes.append(value)
        else:
            fields[key] = value

    def vec(key):
        return np.array([float(x) for x in fields[key].split(",")]) \
            if key in fields else None

    network = None
    if "n" in fields:
        n = int(fields["n"])
        network = {"n": n, "a": vec("a"), "P": _parse_sparse(fields["P"], n),
                   "Q": vec("Q"), "v": vec("v")}
    params = None
    if "box_lo" in fields:
        params = ComparisonParams(
            box=Box(vec("box_lo"), vec("box_hi")),
            anchors=vec("anchors"), diag_gains=vec("diag_gains"),
            outflow_slopes=vec("outflow_slopes"),
            peak_outflows=vec("peak_outflows"))
    return Certificate(
        verdict=fields["verdict"], method=fields["method"],
        rho=float(fields["rho"]) if "rho" in fields else None,
        bound_used=fields.get("bound_used"),
        gamma=np.array(gamma_rows) if gamma_rows else None,
        params=params, x_star=vec("x_star"), f_star=vec("f_star"),
        network=network, notes=tuple(notes))


def verify_certificate(cert: Certificate) -> tuple[str, float]:
    """Recompute the verdict from the recorded coefficients alone.

    Rebuilds the comparison matrix from the serialized parameters (never
    from live suprema) and reruns the bound escalation; a sound certificate
    reproduces its verdict and decision value.
    """
    if cert.method == "matrix_direct":
        entries = cert.gamma
    elif cert.method == "freeway_chain":
        entries = assemble_freeway_entries(cert.x_star, cert.params)
    else:
        entries = assemble_general_entries(cert.network["P"], cert.x_star,
                                           cert.f_star, cert.params)
    verdict, rho, _ = decide_from_entries(entries)
    return verdict, rho
