"""Command-line front end.

Commands
    certify   build the comparison matrix and report the stability verdict
    simulate  roll out trajectories, write CSV, summarize the decay fit
    sweep     bisect a scalar parameter for the largest certifiable value
    rho       spectral bounds for a nonnegative matrix given as CSV
    trap      freeway trapping-box construction with provenance

Exit codes: 0 success / certified, 2 inconclusive (or box construction
infeasible), 1 error, 3 sweep never certifies, 4 sweep always certifies.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .certify import (
    certify_freeway,
    certify_linear_comparison,
    certify_network,
    freeway_threshold_certifier,
    serialize_certificate,
)
from .config import ConfigDocument, load_config
from .errors import AlwaysCertifies, NeverCertifies, TrafficStabError
from .model import FreewaySpec, freeway_equilibrium, equilibrium
from .simulate import estimate_decay, make_rng, simulate, sweep_parameter, trajectory_to_csv
from .spectral import best_epsilon_refined_bound, row_sum_bound, spectral_radius
from .trapping import Box, freeway_trapping_box

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2
EXIT_NEVER = 3
EXIT_ALWAYS = 4


def _write(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _grid_default(doc: ConfigDocument, args) -> int:
    if args.grid:
        return args.grid
    if "grid_n" in doc.certify:
        return int(doc.certify["grid_n"])
    return 1000 if doc.is_freeway else 2000


def cmd_certify(args) -> int:
    doc = load_config(args.config)
    grid_n = _grid_default(doc, args)
    if doc.is_freeway:
        cert = certify_freeway(doc.system, grid_n)
    else:
        box = None
        if "box" in doc.certify:
            b = doc.certify["box"]
            box = Box(np.asarray(b["lo"], dtype=float),
                      np.asarray(b["hi"], dtype=float))
        omega = doc.certify.get("omega", "auto")
        cert = certify_network(doc.system, box, omega, grid_n)
    if args.format == "csv" and cert.gamma is not None:
        text = "\n".join(",".join(format(v, ".17g") for v in row)
                         for row in cert.gamma) + "\n"
    else:
        text = serialize_certificate(cert)
    _write(text, args.out)
    return EXIT_OK if cert.certified else EXIT_INCONCLUSIVE


def cmd_simulate(args) -> int:
    doc = load_config(args.config)
    sim = doc.simulate
    T = int(sim.get("T", 500))
    trials = int(sim.get("trials", 1))
    seed = args.seed if args.seed is not None else int(sim.get("seed", 0))
    policy = sim.get("policy", "none" if doc.is_freeway else "uniform")
    system = doc.system
    if doc.is_freeway:
        eq = freeway_equilibrium(system)
        a = system.a
    else:
        eq = equilibrium(system)
        a = system.spec.a

    pieces = []
    summary = []
    for trial in range(trials):
        if "x0" in sim:
            x0 = np.asarray(sim["x0"], dtype=float)
        else:
            x0 = make_rng(seed, 1000 + trial).uniform(np.zeros(a.size), a)
        traj = simulate(system, x0, policy, T, seed + trial)
        pieces.append(trajectory_to_csv(traj))
        err = float(np.linalg.norm(traj.states[-1] - eq.x_star))
        try:
            dec = estimate_decay(traj, eq.x_star)
            summary.append(f"trial {trial}: final_error={err:.6e} "
                           f"sigma_hat={dec.sigma_hat:.6f} "
                           f"m_hat={dec.m_hat:.6f} r2={dec.r_squared:.6f}")
        except TrafficStabError as ex:
            summary.append(f"trial {trial}: final_error={err:.6e} decay_fit=({ex})")
    if args.out:
        if trials == 1:
            _write(pieces[0], args.out)
        else:
            for trial, csv_text in enumerate(pieces):
                _write(csv_text, f"{args.out}.t{trial}")
    else:
        sys.stdout.write(pieces[0])
    for line in summary:
        print(line)
    return EXIT_OK


def _sweep_template(doc: ConfigDocument, parameter: str, cell: int):
    fw: FreewaySpec = doc.system

    if parameter == "demand_q":
        def template(p: float) -> FreewaySpec:
            demands = list(fw.demands)
            demands[cell] = replace(demands[cell], q=float(p))
            return FreewaySpec(n=fw.n, a=fw.a.copy(), demands=tuple(demands), v=fw.v)
        return template
    if parameter == "inflow":
        def template(p: float) -> FreewaySpec:
            return FreewaySpec(n=fw.n, a=fw.a.copy(), demands=fw.demands, v=float(p))
        return template
    raise TrafficStabError(f"unknown sweep parameter {parameter!r}")


def cmd_sweep(args) -> int:
    doc = load_config(args.config)
    if not doc.is_freeway:
        raise TrafficStabError("sweep requires a freeway config")
    sw = doc.sweep
    parameter = args.param or sw.get("parameter")
    if not parameter:
        raise TrafficStabError("no sweep parameter given (flag --param or sweep section)")
    cell = int(sw.get("cell", doc.system.n)) - 1
    if args.range:
        lo, hi = (float(x) for x in args.range.split(","))
    else:
        lo, hi = (float(x) for x in sw["range"])
    grid_n = args.grid or int(sw.get("grid_n", 1000))
    template = _sweep_template(doc, parameter, cell)
    if "thresholds" in sw:
        certifier = freeway_threshold_certifier(np.asarray(sw["thresholds"], dtype=float))
    else:
        certifier = lambda fw, n: certify_freeway(fw, n).certified
    log: list = []
    try:
        threshold = sweep_parameter(template, (lo, hi), grid_n, certifier, log=log)
    except NeverCertifies as ex:
        print(f"never certifies: {ex}", file=sys.stderr)
        return EXIT_NEVER
    except AlwaysCertifies as ex:
        print(f"always certifies: {ex}", file=sys.stderr)
        return EXIT_ALWAYS
    print(f"{threshold:.6f}")
    log_text = "".join(f"{p:.17g},{'pass' if ok else 'fail'}\n" for p, ok in log)
    if args.out:
        _write("parameter,outcome\n" + log_text, args.out)
    return EXIT_OK


def cmd_rho(args) -> int:
    rows = []
    with open(args.matrix) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(x) for x in line.split(",")])
    m = np.asarray(rows, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise TrafficStabError(f"matrix is not square: shape {m.shape}")
    rs = row_sum_bound(m)
    refined, eps = best_epsilon_refined_bound(m)
    rho = spectral_radius(m)
    print(f"row_sum_bound: {rs:.12g}")
    print(f"epsilon_refined_bound: {refined:.12g} (epsilon = {eps:.3g})")
    print(f"spectral_radius: {rho:.12g}")
    verdict = certify_linear_comparison(m)
    print(f"verdict: {verdict.verdict} ({verdict.bound_used})")
    return EXIT_OK if verdict.certified else EXIT_INCONCLUSIVE


def cmd_trap(args) -> int:
    doc = load_config(args.config)
    if not doc.is_freeway:
        raise TrafficStabError("trap requires a freeway config")
    grid_n = _grid_default(doc, args)
    report = freeway_trapping_box(doc.system, grid_n)
    lines = ["box_lo: " + ",".join(format(v, ".10g") for v in report.box.lo),
             "box_hi: " + ",".join(format(v, ".10g") for v in report.box.hi),
             "transient_bound: " + ("unknown" if report.transient_bound is None
                                    else str(report.transient_bound))]
    for st in report.provenance:
        lines.append(f"step {st.label}: value={st.value:.10g} margin={st.margin:.3e}")
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="trafficstab",
        description="stability certification for discrete-time traffic networks")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config", help="YAML configuration file")
        p.add_argument("--grid", type=int, default=None, help="grid resolution")
        p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=("report", "csv"), default="report")

    p = sub.add_parser("certify", help="certify a configured system")
    common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="simulate trajectories, emit CSV")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="bisect a parameter for certifiability")
    common(p)
    p.add_argument("--param", default=None, help="parameter name (demand_q, inflow)")
    p.add_argument("--range", default=None, help="lo,hi override")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rho", help="spectral bounds for a CSV matrix")
    p.add_argument("matrix", help="CSV file with a square nonnegative matrix")
    p.set_defaults(func=cmd_rho)

    p = sub.add_parser("trap", help="freeway trapping-box construction")
    common(p)
    p.set_defaults(func=cmd_trap)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrafficStabError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
