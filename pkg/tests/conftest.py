"""Shared fixtures: the two standard network families used across tests.

``cycle_network`` is a five-component network whose first three components
form a routing cycle (1 -> 2 -> 3 -> 1) with side spurs into components 4
and 5; all parameters are scalar-uniform.  ``chain`` is a five-cell freeway
whose last cell has a configurable discharge-drop slope.
"""

from __future__ import annotations

import numpy as np
import pytest

from trafficstab import (
    DisturbedDemand,
    FreewaySpec,
    NetworkSpec,
    PiecewiseLinearDemand,
    validate_network,
)


def cycle_network(v=0.4, v_spur=0.4, a=10.0, delta=5.0, r=0.55, q=0.1,
                  p=0.2, p_spur=0.1):
    P = np.zeros((5, 5))
    P[0, 1] = p
    P[1, 2] = p
    P[1, 4] = p_spur
    P[2, 0] = p
    P[2, 3] = p_spur
    Q = 1.0 - P.sum(axis=1)
    demands = tuple(
        DisturbedDemand(PiecewiseLinearDemand(r=r, delta=delta, q=q, a=a))
        for _ in range(5))
    spec = NetworkSpec(n=5, a=np.full(5, a), P=P, Q=Q,
                       v=np.array([v, v, v, v_spur, v_spur]), demands=demands)
    return validate_network(spec)


def chain(q_last=0.1, v=1.0, n=5, a=10.0):
    demands = [PiecewiseLinearDemand(r=0.5, delta=5.0, q=0.1, a=a)
               for _ in range(n - 1)]
    demands.append(PiecewiseLinearDemand(r=0.4, delta=5.0, q=q_last, a=a))
    return FreewaySpec(n=n, a=np.full(n, a), demands=tuple(demands), v=v)


@pytest.fixture(scope="session")
def cycle():
    return cycle_network()


@pytest.fixture(scope="session")
def chain_low():
    """Chain with a mild discharge drop, well inside the certifiable range."""
    return chain(0.1)


@pytest.fixture(scope="session")
def chain_high():
    """Chain with a steep discharge drop, beyond the certifiable range."""
    return chain(0.3)
