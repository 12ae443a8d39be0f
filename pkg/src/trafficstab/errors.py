"""Exception types raised across the toolkit.

Every error carries enough context (component index, offending value,
grid point) to reconstruct what failed without re-running the check.
"""

from __future__ import annotations


class TrafficStabError(Exception):
    """Base class for all toolkit errors."""


# ---------------------------------------------------------------------------
# network validation
# ---------------------------------------------------------------------------

class RowSumViolation(TrafficStabError):
    def __init__(self, i: int, total: float):
        self.i = i
        self.total = total
        super().__init__(
            f"component {i}: turning rates plus exit rate sum to {total!r}, expected 1"
        )


class SelfLoop(TrafficStabError):
    def __init__(self, i: int, rate: float):
        self.i = i
        self.rate = rate
        super().__init__(f"component {i}: self turning rate {rate!r} must be 0")


class SingularRouting(TrafficStabError):
    def __init__(self, det: float):
        self.det = det
        super().__init__(f"routing matrix is singular: |det(I - P^T)| = {abs(det):.3e}")


class NegativeParameter(TrafficStabError):
    def __init__(self, field: str, i: int, value: float):
        self.field = field
        self.i = i
        self.value = value
        super().__init__(f"{field}[{i}] = {value!r} is out of range")


# ---------------------------------------------------------------------------
# domains and equilibria
# ---------------------------------------------------------------------------

class DomainViolation(TrafficStabError):
    """State, occupancy or disturbance point outside its admissible set."""


class InfeasibleEquilibrium(TrafficStabError):
    """The uncongested equilibrium fails the feasibility inequality."""


class NoFreeFlowPreimage(TrafficStabError):
    def __init__(self, i: int, flow: float, cap: float):
        self.i = i
        super().__init__(
            f"component {i}: equilibrium flow {flow:.6g} exceeds the free-flow "
            f"range bound {cap:.6g}; no uncongested preimage"
        )


# ---------------------------------------------------------------------------
# coefficient computation / comparison matrix
# ---------------------------------------------------------------------------

class DegenerateInterval(TrafficStabError):
    """Interval [b, c] with c <= b where a proper interval is required."""


class Condition318Violation(TrafficStabError):
    def __init__(self, i: int, j: int, lhs: float, cap: float):
        self.i = i
        self.j = j
        super().__init__(
            f"supply headroom check failed for sender {i} -> receiver {j}: "
            f"{lhs:.6g} > capacity {cap:.6g}"
        )


class SupplyHypothesisViolation(TrafficStabError):
    def __init__(self, i: int, peak: float, cap: float):
        self.i = i
        super().__init__(
            f"cell {i}: peak outflow {peak:.6g} exceeds downstream capacity {cap:.6g}"
        )


# ---------------------------------------------------------------------------
# spectral module
# ---------------------------------------------------------------------------

class NonpositiveEpsilon(TrafficStabError):
    pass


class NegativeEntry(TrafficStabError):
    def __init__(self, i: int, j: int, value: float):
        self.i = i
        self.j = j
        super().__init__(f"matrix entry ({i},{j}) = {value!r} is negative")


# ---------------------------------------------------------------------------
# trapping boxes
# ---------------------------------------------------------------------------

class ConditionFails(TrafficStabError):
    def __init__(self, which: str, i: int, point: float, value: float):
        self.which = which
        self.i = i
        self.point = point
        self.value = value
        super().__init__(
            f"coordinate {i}: {which} condition fails at grid point {point:.6g} "
            f"(value {value:.6g})"
        )


class NoFeasibleGridPoint(TrafficStabError):
    def __init__(self, step: str):
        self.step = step
        super().__init__(f"trapping-box step {step}: no feasible grid point")


# ---------------------------------------------------------------------------
# simulation / sweeps
# ---------------------------------------------------------------------------

class DegenerateTrajectory(TrafficStabError):
    """Decay fit is undefined (trajectory starts at, or sits on, the equilibrium)."""


class NeverCertifies(TrafficStabError):
    """Parameter sweep: the certifier fails already at the lower endpoint."""


class AlwaysCertifies(TrafficStabError):
    """Parameter sweep: the certifier succeeds at the upper endpoint."""


# ---------------------------------------------------------------------------
# configuration / CLI
# ---------------------------------------------------------------------------

class ConfigError(TrafficStabError):
    """Malformed configuration document; message carries the key path."""
