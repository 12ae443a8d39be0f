"""YAML configuration documents for the command-line front end.

A document describes exactly one system: a ``network`` section (general
topology with sparse turning entries) or a ``freeway`` section (chain).
Optional ``certify``, ``simulate`` and ``sweep`` sections carry run
parameters.  All indices in the file are 1-based; parse errors report the
offending key path (and the line for YAML syntax errors).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError
from .demand import DisturbedDemand, PiecewiseLinearDemand
from .model import DisturbanceBox, FreewaySpec, NetworkSpec, ValidatedNetwork, validate_network


@dataclass(frozen=True)
class ConfigDocument:
    system: ValidatedNetwork | FreewaySpec
    certify: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    @property
    def is_freeway(self) -> bool:
        return isinstance(self.system, FreewaySpec)


def _need(section: dict, key: str, path: str):
    if key not in section:
        raise ConfigError(f"{path}.{key}: missing required key")
    return section[key]


def _vector(value, n: int, path: str) -> np.ndarray:
    if isinstance(value, (int, float)):
        return np.full(n, float(value))
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ConfigError(f"{path}: expected {n} values, got shape {arr.shape}")
    return arr


def _demand_list(entries, n: int, a: np.ndarray, path: str):
    if isinstance(entries, dict):
        entries = [entries] * n
    if len(entries) != n:
        raise ConfigError(f"{path}: expected {n} demand entries, got {len(entries)}")
    out = []
    for idx, item in enumerate(entries):
        try:
            out.append(PiecewiseLinearDemand(
                r=float(_need(item, "r", f"{path}[{idx + 1}]")),
                delta=float(_need(item, "delta", f"{path}[{idx + 1}]")),
                q=float(item.get("q", 0.0)),
                a=float(a[idx]),
            ))
        except ConfigError:
            raise
        except Exception as err:
            raise ConfigError(f"{path}[{idx + 1}]: {err}") from err
    return out


def _parse_network(section: dict) -> ValidatedNetwork:
    n = int(_need(section, "n", "network"))
    a = _vector(_need(section, "a", "network"), n, "network.a")
    P = np.zeros((n, n))
    for idx, triple in enumerate(section.get("turning", [])):
        try:
            i, j, rate = triple
        except Exception as err:
            raise ConfigError(f"network.turning[{idx + 1}]: expected "
                              f"(from, to, rate) triple") from err
        if not (1 <= int(i) <= n and 1 <= int(j) <= n):
            raise ConfigError(f"network.turning[{idx + 1}]: index out of 1..{n}")
        P[int(i) - 1, int(j) - 1] = float(rate)
    if "exit" in section:
        Q = _vector(section["exit"], n, "network.exit")
    else:
        Q = 1.0 - P.sum(axis=1)
    v = _vector(_need(section, "inflow", "network"), n, "network.inflow")

    mode = section.get("disturbance_mode", "constant")
    if mode not in ("constant", "slope"):
        raise ConfigError("network.disturbance_mode: must be constant or slope")
    if "disturbance" in section:
        dd = section["disturbance"]
        dbox = DisturbanceBox(np.asarray(_need(dd, "lo", "network.disturbance"), dtype=float),
                              np.asarray(_need(dd, "hi", "network.disturbance"), dtype=float))
    else:
        dbox = DisturbanceBox.empty()
    demands = tuple(DisturbedDemand(base=dem, mode=mode)
                    for dem in _demand_list(_need(section, "demands", "network"),
                                            n, a, "network.demands"))
    return validate_network(NetworkSpec(n=n, a=a, P=P, Q=Q, v=v, demands=demands,
                                        disturbance_box=dbox))


def _parse_freeway(section: dict) -> FreewaySpec:
    n = int(_need(section, "n", "freeway"))
    a = _vector(_need(section, "a", "freeway"), n, "freeway.a")
    demands = tuple(_demand_list(_need(section, "demands", "freeway"),
                                 n, a, "freeway.demands"))
    return FreewaySpec(n=n, a=a, demands=demands,
                       v=float(_need(section, "inflow", "freeway")))


def load_config(path: str) -> ConfigDocument:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else path
        raise ConfigError(f"{where}: invalid YAML: {err}") from err
    except OSError as err:
        raise ConfigError(f"{path}: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    has_net, has_fw = "network" in raw, "freeway" in raw
    if has_net == has_fw:
        raise ConfigError(f"{path}: exactly one of 'network'/'freeway' required")
    system = _parse_network(raw["network"]) if has_net \
        else _parse_freeway(raw["freeway"])
    for key in raw:
        if key not in ("network", "freeway", "certify", "simulate", "sweep"):
            raise ConfigError(f"{path}: unknown section '{key}'")
    return ConfigDocument(system=system,
                          certify=raw.get("certify", {}) or {},
                          simulate=raw.get("simulate", {}) or {},
                          sweep=raw.get("sweep", {}) or {})
