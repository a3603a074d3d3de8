"""Closed-form key-rate bound for the high-dimensional semi-quantum protocol.

All quantities are functions of the qubit count n (dimension N = 2**n) and
the depolarization parameters Q (forward/reverse legs) and Q_F (reflected
round trip). The brute-force helpers at the bottom build the explicit N x N
matrices whose trace norms the closed forms are supposed to equal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .attacks import DepolarizingModel, joint_prob_table
from .quantum_math import binary_entropy, trace_distance

MAX_N = 52
MAX_ORACLE_DIM = 64


class Scenario(enum.Enum):
    INDEPENDENT = "independent"
    DEPENDENT = "dependent"


class ToleranceError(ValueError):
    """No sign change of the key rate inside (0, 1/2)."""


def _check(n: int, Q: float) -> tuple[int, float, float]:
    if not 1 <= n <= MAX_N:
        raise ValueError(f"n must lie in [1, {MAX_N}], got {n}")
    if not 0.0 <= Q < 0.5:
        raise ValueError(f"Q must lie in [0, 1/2), got {Q}")
    N = 2**n
    return N, Q / (N - 1), 1.0 - Q


def lambda_x(n: int, Q: float) -> tuple[float, float]:
    """The two non-degenerate eigenvalues of the c = a operator."""
    N, a, b = _check(n, Q)
    root = a * math.sqrt(a * a * (N - 2) ** 2 + 4 * b * b * (N - 1))
    return 0.5 * (a * a * (N - 2) + root), 0.5 * (a * a * (N - 2) - root)


def lambda_y(n: int, Q: float) -> tuple[float, float]:
    """The two remaining eigenvalues of the c != a operator."""
    N, a, b = _check(n, Q)
    root = a * math.sqrt((b + a * (N - 3)) ** 2 + 4 * a * b * (N - 1))
    base = a * b + a * a * (N - 3)
    return 0.5 * (base + root), 0.5 * (base - root)


def delta_diag(n: int, Q: float) -> float:
    N, a, _ = _check(n, Q)
    if Q == 0:
        return 0.0
    lp, lm = lambda_x(n, Q)
    return (N - 2) * a * a + abs(lp) + abs(lm)


def delta_offdiag(n: int, Q: float) -> float:
    # the multiplicity N - 3 is -1 at N = 2; the formula still holds there
    N, a, b = _check(n, Q)
    if Q == 0:
        return 0.0
    lp, lm = lambda_y(n, Q)
    return (N - 3) * a * a + a * b + abs(lp) + abs(lm)


@dataclass(frozen=True)
class DeltaBreakdown:
    n: int
    Q: float
    lambda_x_plus: float
    lambda_x_minus: float
    lambda_y_plus: float
    lambda_y_minus: float
    delta_diag: float
    delta_offdiag: float
    delta: float


def delta_total(n: int, Q: float) -> DeltaBreakdown:
    """Upper bound on half the trace distance between the reflect and measure-resend cq-states."""
    N, _, _ = _check(n, Q)
    dd, do = delta_diag(n, Q), delta_offdiag(n, Q)
    delta = 0.5 * (dd + (N - 1) * do)
    return DeltaBreakdown(n, Q, *lambda_x(n, Q), *lambda_y(n, Q), dd, do, delta)


def continuity_penalty(n: int, delta: float) -> float:
    """delta * n + (1 + delta) * H(delta / (1 + delta))."""
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    return delta * n + (1 + delta) * binary_entropy(delta / (1 + delta))


def log2_nm1(n: int) -> float:
    """log2(2**n - 1) without cancellation at large n."""
    return n + math.log1p(-(2.0**-n)) / math.log(2)


def cond_entropy_zz(n: int, Q: float) -> float:
    """H(A1^Z | B^Z) under symmetric depolarizing noise."""
    if not 0.0 <= Q < 1.0:
        raise ValueError(f"Q must lie in [0, 1), got {Q}")
    if Q == 0:
        return 0.0
    return Q * log2_nm1(n) + binary_entropy(Q)


def cond_entropy_ff(n: int, Q_F: float) -> float:
    """H(A1^F | A2^F) in the reflect branch."""
    return cond_entropy_zz(n, Q_F)


@dataclass(frozen=True)
class KeyRatePoint:
    n: int
    Q: float
    Q_F: float
    delta: float
    h_ab_z: float
    h_af: float
    continuity_penalty: float
    keyrate: float

    def as_dict(self) -> dict:
        return asdict(self)


def keyrate(n: int, Q: float, Q_F: float) -> KeyRatePoint:
    """Lower bound on the asymptotic key rate (bits per key-distillation iteration).

    Negative values are returned as-is; they mark the abort regime.
    """
    _check(n, Q)
    if not 0.0 <= Q_F < 1.0:
        raise ValueError(f"Q_F must lie in [0, 1), got {Q_F}")
    delta = delta_total(n, Q).delta
    h_ab = cond_entropy_zz(n, Q)
    h_af = cond_entropy_ff(n, Q_F)
    wobble = (1 + delta) * binary_entropy(delta / (1 + delta))
    penalty = delta * n + wobble
    r = n * (1 - delta) - wobble - (Q + Q_F) * log2_nm1(n) - binary_entropy(Q) - binary_entropy(Q_F)
    return KeyRatePoint(n, Q, Q_F, delta, h_ab, h_af, penalty, r)


def scenario_qf(scenario: Scenario | str, Q: float) -> float:
    scenario = Scenario(scenario)
    if scenario is Scenario.INDEPENDENT:
        return 2 * Q * (1 - Q)
    return Q


def scenario_keyrate(n: int, Q: float, scenario: Scenario | str) -> KeyRatePoint:
    return keyrate(n, Q, scenario_qf(scenario, Q))


@dataclass(frozen=True)
class ToleranceResult:
    n: int
    scenario: Scenario
    threshold_Q: float
    bracket_width: float
    evaluations: int

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "scenario": self.scenario.value,
            "threshold_Q": self.threshold_Q,
            "bracket_width": self.bracket_width,
            "evaluations": self.evaluations,
        }


def noise_tolerance(
    n: int,
    scenario: Scenario | str,
    tol: float = 1e-6,
    scan_step: float = 1e-3,
) -> ToleranceResult:
    """Smallest Q in (0, 1/2) at which the key-rate bound reaches zero.

    A coarse scan locates the first sign change, then bisection narrows the
    bracket to ``tol``. The returned threshold is the bracket midpoint.
    """
    scenario = Scenario(scenario)
    evals = 0

    def r(q: float) -> float:
        nonlocal evals
        evals += 1
        return scenario_keyrate(n, q, scenario).keyrate

    q_max = 0.5 - 1e-12
    lo = 1e-12
    if r(lo) <= 0:
        raise ToleranceError(f"key rate is already non-positive at Q~0 for n={n}")
    hi = None
    q = lo
    while q < q_max:
        nxt = min(q + scan_step, q_max)
        if r(nxt) <= 0:
            lo, hi = q, nxt
            break
        q = nxt
    if hi is None:
        raise ToleranceError(f"no sign change of the key rate in (0, 1/2) for n={n}, {scenario.value}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if r(mid) > 0:
            lo = mid
        else:
            hi = mid
    return ToleranceResult(n, scenario, 0.5 * (lo + hi), hi - lo, evals)


def sweep(n_values: Iterable[int], scenario: Scenario | str, q_grid: Sequence[float]) -> list[KeyRatePoint]:
    """Key-rate table over the product of ``n_values`` and ``q_grid``, sorted by (n, Q)."""
    scenario = Scenario(scenario)
    rows = [scenario_keyrate(n, q, scenario) for n in sorted(set(n_values)) for q in q_grid]
    return sorted(rows, key=lambda p: (p.n, p.Q))


# --- brute-force oracles -----------------------------------------------------


def delta_ac_matrix(n: int, Q: float, a: int, c: int) -> np.ndarray:
    """N * sqrt(p(a,b,c) p(a,b',c)) for b != b', zero diagonal."""
    N = 2**n
    if N > MAX_ORACLE_DIM:
        raise ValueError(f"brute-force oracle limited to N <= {MAX_ORACLE_DIM}")
    p = joint_prob_table(DepolarizingModel(n, Q))[a, :, c]
    amp = np.sqrt(p)
    m = N * np.outer(amp, amp)
    np.fill_diagonal(m, 0.0)
    return m


def x_matrix(n: int, Q: float, a: int = 0) -> np.ndarray:
    return delta_ac_matrix(n, Q, a, a)


def y_matrix(n: int, Q: float, a: int = 0, c: int = 1) -> np.ndarray:
    if a == c:
        raise ValueError("the c != a operator needs distinct a and c")
    return delta_ac_matrix(n, Q, a, c)


def delta_bruteforce(n: int, Q: float) -> float:
    """(1/2N) sum_{a,c} ||Delta_{a,c} matrix|| over every (a, c) pair."""
    N = 2**n
    total = sum(trace_distance(delta_ac_matrix(n, Q, a, c)) for a in range(N) for c in range(N))
    return total / (2 * N)
