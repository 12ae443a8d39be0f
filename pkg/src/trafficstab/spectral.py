"""Spectral-radius computation and cheap sufficient bounds for nonnegative
matrices.

Certification only ever needs "is the spectral radius below 1", so three
tools of increasing cost are provided: the max row sum, a refined row-sum
test with a free parameter epsilon, and the spectral radius itself via
power iteration cross-checked against a norm-squaring upper-bound sequence.
No general eigensolver is used; the matrices here are small.
"""

from __future__ import annotations

import numpy as np

from .errors import NegativeEntry, NonpositiveEpsilon

MAX_POWER_ITERATIONS = 10_000
MAX_SQUARINGS = 30


def as_nonnegative_matrix(entries) -> np.ndarray:
    """Validate and return a square entrywise-nonnegative float matrix."""
    m = np.asarray(entries, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NegativeEntry(-1, -1, float("nan"))
    if np.any(m < 0):
        i, j = np.unravel_index(int(np.argmin(m)), m.shape)
        raise NegativeEntry(int(i), int(j), float(m[i, j]))
    return m


def row_sum_bound(entries) -> float:
    """max_i sum_j m[i,j]; always an upper bound for the spectral radius."""
    m = as_nonnegative_matrix(entries)
    return float(m.sum(axis=1).max())


def epsilon_refined_bound(entries, eps: float) -> float:
    """Refined row-sum quantity; a value below 1 certifies rho(M) < 1.

    For each row i the quantity is

        sum_j (eps + m[i,j]) * sum_k (eps + m[j,k])
        -------------------------------------------
                n*eps + sum_j m[i,j]

    and the bound is the maximum over rows.  It is a sufficient test only,
    never an estimate of the spectral radius itself.
    """
    if not eps > 0:
        raise NonpositiveEpsilon(f"epsilon = {eps!r} must be positive")
    m = as_nonnegative_matrix(entries)
    n = m.shape[0]
    rows = m.sum(axis=1)
    inner = n * eps + rows                      # sum_k (eps + m[j,k])
    numer = (eps + m) @ inner
    return float((numer / (n * eps + rows)).max())


def best_epsilon_refined_bound(entries, num: int = 33) -> tuple[float, float]:
    """Scan a log grid of epsilon in [1e-8, 1], return (best value, epsilon)."""
    best_val, best_eps = float("inf"), 1.0
    for eps in np.logspace(-8, 0, num):
        val = epsilon_refined_bound(entries, float(eps))
        if val < best_val:
            best_val, best_eps = val, float(eps)
    return best_val, best_eps


def _gelfand_upper_bound(m: np.ndarray) -> float:
    """Norm-squaring sequence ||M^(2^k)||^(1/2^k) under the row-sum norm.

    Each term is an upper bound for the spectral radius and the sequence is
    nonincreasing; it can plateau for many squarings (e.g. row sums pinned
    at 1 until boundary decay propagates), so all squarings are always
    performed.  Matrices are renormalized between squarings and the
    accumulated log keeps the estimate well-scaled.
    """
    b = m.copy()
    log_acc = 0.0
    est = float("inf")
    for k in range(MAX_SQUARINGS + 1):
        norm = float(np.abs(b).sum(axis=1).max())
        if norm == 0.0:
            return 0.0
        log_acc += np.log(norm) / (2 ** k)
        est = float(np.exp(log_acc))
        scaled = b / norm
        b = scaled @ scaled
    return est


def spectral_radius_detailed(entries, tol: float = 1e-10) -> tuple[float, str, int]:
    """Spectral radius of a nonnegative matrix, with provenance.

    Power iteration runs on M + I (the shift makes the dominant eigenvalue
    of the shifted matrix 1 + rho, strictly largest in modulus, so the
    all-ones start vector converges even for oscillatory spectra).  The
    result must agree with the norm-squaring upper bound within 10*tol;
    otherwise the upper bound is returned, flagged, which preserves
    soundness for matrices where the iteration stalls (reducible or
    defective cases).

    Returns (rho, method, iterations) with method "power_iteration" or
    "gelfand".
    """
    if not tol > 0:
        raise NonpositiveEpsilon(f"tol = {tol!r} must be positive")
    m = as_nonnegative_matrix(entries)
    n = m.shape[0]
    if n == 0:
        return 0.0, "power_iteration", 0
    shifted = m + np.eye(n)
    x = np.full(n, 1.0 / np.sqrt(n))
    history: list[float] = []
    used = MAX_POWER_ITERATIONS
    for it in range(1, MAX_POWER_ITERATIONS + 1):
        y = shifted @ x
        new_est = float(np.linalg.norm(y))
        if new_est == 0.0:
            return 0.0, "power_iteration", it
        x = y / new_est
        history.append(new_est)
        if it >= 5 and abs(history[-1] - history[-2]) \
                < tol * 1e-3 * max(1.0, new_est):
            used = it
            break
    est = history[-1]
    if len(history) >= 3:
        # Aitken extrapolation of the geometric tail tightens slow iterations
        e1, e2, e3 = history[-3:]
        denom = (e3 - e2) - (e2 - e1)
        if denom != 0.0:
            acc = e3 - (e3 - e2) ** 2 / denom
            if np.isfinite(acc) and abs(acc - e3) < 1e-2 * max(1.0, e3):
                est = acc
    rho_power = max(est - 1.0, 0.0)
    rho_gelfand = _gelfand_upper_bound(m)
    if abs(rho_power - rho_gelfand) <= 10 * tol:
        return rho_power, "power_iteration", used
    return rho_gelfand, "gelfand", used


def spectral_radius(entries, tol: float = 1e-10) -> float:
    return spectral_radius_detailed(entries, tol)[0]


def tridiagonal_toeplitz_radius(n: int, diag: float, off: float) -> float:
    """Spectral radius of the n x n symmetric Toeplitz tridiagonal matrix
    with constant diagonal ``diag`` and off-diagonals ``off``.

    The eigenvalues are diag + 2*off*cos(i*pi/(n+1)), i = 1..n.
    """
    if n < 1:
        raise NonpositiveEpsilon(f"n = {n} must be >= 1")
    i = np.arange(1, n + 1)
    return float(np.abs(diag + 2.0 * off * np.cos(i * np.pi / (n + 1))).max())
