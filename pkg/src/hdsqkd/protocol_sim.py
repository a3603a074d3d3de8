"""Executable versions of the three protocols.

Two layers live here:

* exact evolution of the joint pure state of A1, A2 (the travelling register
  T once it comes home), B and Eve's memory E, used to check the one-way
  reduction and to compute entropies directly;
* Monte Carlo runs that sample every iteration from the Born probabilities of
  the exactly evolved states, with a seeded PCG64 generator.

The joint layout is always ``A1, A2, B, E`` with E = EF x ER.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .attacks import CollectiveAttack, OneWayAttack, build_rewind, induced_pb, reduce_attack
from .quantum_math import (
    BasisSpec,
    F,
    RegisterLayout,
    StateVector,
    Z,
    apply_operator,
    conditional_entropy,
    measure_register,
    partial_trace,
    pure_trace_distance,
    trace_distance,
)

MAX_AMPLITUDES = 2**21
MAX_MC_N = 3
REDUCTION_TOL = 1e-9


class CapacityError(RuntimeError):
    """Requested simulation exceeds the dense-state size cap."""


class Branch(enum.Enum):
    MEASURE_RESEND = "measure_resend"
    REFLECT = "reflect"


MR = Branch.MEASURE_RESEND
R = Branch.REFLECT


@dataclass(frozen=True)
class ProtocolConfig:
    n: int
    p_M: float = 0.5
    p_Z: float = 0.5
    seed: int = 0
    iterations: int = 10_000
    test_fraction: float = 1.0  # share of key iterations disclosed into the statistics

    def __post_init__(self):
        if not 1 <= self.n <= MAX_MC_N:
            raise CapacityError(f"Monte Carlo runs support 1 <= n <= {MAX_MC_N}, got n={self.n}")
        for name in ("p_M", "p_Z", "test_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def N(self) -> int:
        return 2**self.n


def _check_cap(amplitudes: int) -> None:
    if amplitudes > MAX_AMPLITUDES:
        raise CapacityError(f"state with {amplitudes} amplitudes exceeds the cap of {MAX_AMPLITUDES}")


def _layout(N: int, d_e: int) -> RegisterLayout:
    return RegisterLayout((("A1", N), ("A2", N), ("B", N), ("E", d_e)))


def _basis(kind, n: int) -> np.ndarray:
    return BasisSpec(kind, n).matrix()


# --- exact evolution ---------------------------------------------------------


def _cnot_copy(psi: np.ndarray, t_axis: int, b_axis: int) -> np.ndarray:
    """Bitwise CNOT from T onto B: |t>|b> -> |t>|b xor t>."""
    N = psi.shape[t_axis]
    out = np.empty_like(psi)
    idx = np.arange(N)
    for t in range(N):
        src = [slice(None)] * psi.ndim
        dst = [slice(None)] * psi.ndim
        src[t_axis] = dst[t_axis] = t
        # after fixing T, the B axis shifts down by one if it came before T
        b_pos = b_axis - (1 if b_axis > t_axis else 0)
        out[tuple(dst)] = np.take(psi[tuple(src)], idx ^ t, axis=b_pos)
    return out


def _ent_tensor(attack: CollectiveAttack, branch: Branch, final: bool) -> np.ndarray:
    N, d_f, d_r = attack.N, attack.forward_dim, attack.reverse_dim
    _check_cap(N**3 * d_f * d_r)
    psi = np.zeros((N, N, N, d_f, d_r), dtype=complex)
    for a in range(N):
        psi[a, a, 0, 0, 0] = 1 / math.sqrt(N)
    psi = attack.apply_forward(psi, t_axis=1, ef_axis=3)
    if branch is MR:
        psi = _cnot_copy(psi, t_axis=1, b_axis=2)
    if final:
        psi = attack.apply_reverse(psi, t_axis=1, ef_axis=3, er_axis=4)
    return psi


def ent_state(attack: CollectiveAttack, branch: Branch, final: bool = True) -> StateVector:
    """Joint state of the entanglement-based protocol after U_R (or at t* if not ``final``)."""
    psi = _ent_tensor(attack, Branch(branch), final)
    return StateVector(_layout(attack.N, attack.ancilla_dim), psi.reshape(-1))


def _prepared(pb: np.ndarray, branch: Branch) -> np.ndarray:
    """Coefficient c[b, B]: sqrt(p(b)) with B = b (measure-resend) or B = 0 (reflect)."""
    N = pb.size
    coef = np.zeros((N, N))
    if branch is MR:
        coef[np.arange(N), np.arange(N)] = np.sqrt(pb)
    else:
        coef[:, 0] = np.sqrt(pb)
    return coef


def ow_state(attack: OneWayAttack, branch: Branch) -> StateVector:
    """Joint state of the one-way protocol after Eve's operator."""
    branch = Branch(branch)
    N = attack.N
    _check_cap(N**3 * attack.ancilla_dim)
    u = attack.output_states()  # [b, a, c, e]
    coef = _prepared(attack.pb, branch)
    psi = np.einsum("bB,bace->acBe", coef, u)
    return StateVector(_layout(N, attack.ancilla_dim), psi.reshape(-1))


def joint_state_at_tstar(protocol: str, attack: CollectiveAttack, branch: Branch) -> StateVector:
    """Pure joint state just before U_R.

    For ``"ent"`` this is the two-way protocol after U_F and B's operation; for
    ``"ow"`` it is the rewind operator applied to B's one-way preparation.
    """
    branch = Branch(branch)
    if protocol == "ent":
        return ent_state(attack, branch, final=False)
    if protocol != "ow":
        raise ValueError(f"protocol must be 'ent' or 'ow', got {protocol!r}")
    N, d_f, d_r = attack.N, attack.forward_dim, attack.reverse_dim
    _check_cap(N**3 * d_f * d_r)
    rw = build_rewind(attack).reshape(N, N, d_f, N)  # [a, c, ef, b]
    coef = _prepared(induced_pb(attack), branch)
    psi = np.zeros((N, N, N, d_f, d_r), dtype=complex)
    psi[..., 0] = np.einsum("bB,acfb->acBf", coef, rw)
    return StateVector(_layout(N, attack.ancilla_dim), psi.reshape(-1))


@dataclass
class ReductionReport:
    attack: dict
    distances: dict[str, float]
    max_trace_distance: float
    threshold: float = REDUCTION_TOL

    @property
    def passed(self) -> bool:
        return self.max_trace_distance <= self.threshold

    def as_dict(self) -> dict:
        return {
            "attack_descriptor": self.attack,
            "distances": self.distances,
            "max_trace_distance": self.max_trace_distance,
            "threshold": self.threshold,
            "pass": self.passed,
        }


def verify_reduction(attack: CollectiveAttack) -> ReductionReport:
    """Compare the two-way and reduced one-way joint states branch by branch.

    Distances are trace norms of differences of the pure joint density
    operators, both at t* and after the final attack step.
    """
    reduced = reduce_attack(attack)
    distances = {}
    for branch in Branch:
        mid_ent = joint_state_at_tstar("ent", attack, branch).amplitudes
        mid_ow = joint_state_at_tstar("ow", attack, branch).amplitudes
        distances[f"{branch.value}@tstar"] = pure_trace_distance(mid_ent, mid_ow)
        fin_ent = ent_state(attack, branch).amplitudes
        fin_ow = ow_state(reduced, branch).amplitudes
        distances[f"{branch.value}@final"] = pure_trace_distance(fin_ent, fin_ow)
    return ReductionReport(attack.describe(), distances, max(distances.values()))


def outcome_table(state: StateVector, basis) -> np.ndarray:
    """Born probabilities p[a1, a2, b] with A1, A2 measured in ``basis`` and B in Z.

    A1 is read in the complex-conjugate basis: on sum_a |a, a> that outcome x
    steers A2 into basis state x, so a1 labels the state effectively sent.
    """
    N = state.layout.dim("A1")
    n = int(math.log2(N))
    V = _basis(basis, n)
    psi = state.tensor()
    psi = apply_operator(psi, V.T, [0])
    psi = apply_operator(psi, V.conj().T, [1])
    return np.sum(np.abs(psi) ** 2, axis=3)


# --- exact entropies ---------------------------------------------------------


@dataclass(frozen=True)
class ExactAnalysis:
    """Entropies and observables computed directly from the joint states."""

    n: int
    Q: float
    Q_F: float
    h_a_e_mu: float
    h_a_b_mu: float
    h_a_e_rho: float
    delta_hat: float

    @property
    def keyrate_true(self) -> float:
        return self.h_a_e_mu - self.h_a_b_mu


def _cq_a1_e(state: StateVector, n: int):
    return measure_register(partial_trace(state, {"A1", "E"}), "A1", BasisSpec(Z, n))


def exact_analysis(attack: CollectiveAttack) -> ExactAnalysis:
    """H(A1^Z|E) in both branches, H(A1^Z|B^Z), Q, Q_F and the exact trace distance."""
    n = attack.n
    mu = ent_state(attack, MR)
    rho = ent_state(attack, R)
    mu_ae = _cq_a1_e(mu, n)
    rho_ae = _cq_a1_e(rho, n)

    mu_ab = partial_trace(mu, {"A1", "B"})
    mu_ab = measure_register(measure_register(mu_ab, "A1", BasisSpec(Z, n)), "B", BasisSpec(Z, n))
    p_ab = np.real(np.diag(mu_ab.matrix)).reshape(attack.N, attack.N)
    p_f = outcome_table(rho, F).sum(axis=2)

    return ExactAnalysis(
        n=n,
        Q=float(1 - np.trace(p_ab)),
        Q_F=float(1 - np.trace(p_f)),
        h_a_e_mu=conditional_entropy(mu_ae, "A1", {"E"}),
        h_a_b_mu=conditional_entropy(mu_ab, "A1", {"B"}),
        h_a_e_rho=conditional_entropy(rho_ae, "A1", {"E"}),
        delta_hat=0.5 * trace_distance(rho_ae.matrix - mu_ae.matrix),
    )


# --- Monte Carlo -------------------------------------------------------------


@dataclass(frozen=True)
class IterationRecord:
    a_basis: str
    b_op: str
    a_index: int  # prepared state (SQKD) or A1 outcome (ent / one-way)
    b_outcome: Optional[int]
    a_return_outcome: int  # return measurement (SQKD) or A2 outcome
    key_contrib: Optional[tuple[str, str]]


@dataclass
class ObservedStatistics:
    """Counts gathered by one run.

    ``key_counts[a, b, c]`` counts disclosed key-distillation iterations;
    ``f_counts[x, y]`` counts reflect iterations in the Fourier basis.
    """

    n: int
    protocol: str
    iterations: int
    key_counts: np.ndarray
    f_counts: np.ndarray
    b_counts: np.ndarray

    @property
    def N(self) -> int:
        return 2**self.n

    @property
    def p_abc(self) -> np.ndarray:
        total = self.key_counts.sum()
        return self.key_counts / total if total else np.zeros_like(self.key_counts, dtype=float)

    @property
    def p_b(self) -> np.ndarray:
        total = self.b_counts.sum()
        return self.b_counts / total if total else np.zeros(self.N)

    @property
    def p_f(self) -> np.ndarray:
        total = self.f_counts.sum()
        return self.f_counts / total if total else np.zeros_like(self.f_counts, dtype=float)


@dataclass
class SimulationResult:
    config: ProtocolConfig
    stats: ObservedStatistics
    a_basis_z: np.ndarray
    b_measure: np.ndarray
    a_index: np.ndarray
    b_outcome: np.ndarray  # -1 on reflect
    c_outcome: np.ndarray
    disclosed: np.ndarray = field(repr=False)

    @property
    def key_mask(self) -> np.ndarray:
        return self.a_basis_z & self.b_measure

    @property
    def raw_key_a(self) -> np.ndarray:
        return self.a_index[self.key_mask]

    @property
    def raw_key_b(self) -> np.ndarray:
        return self.b_outcome[self.key_mask]

    @property
    def raw_key_bits(self) -> int:
        return int(self.key_mask.sum()) * self.config.n

    def raw_key_strings(self) -> tuple[str, str]:
        n = self.config.n
        return (
            "".join(format(int(v), f"0{n}b") for v in self.raw_key_a),
            "".join(format(int(v), f"0{n}b") for v in self.raw_key_b),
        )

    @property
    def raw_key_error_rate(self) -> float:
        """Fraction of raw-key bits on which A and B disagree."""
        if not self.key_mask.any():
            return 0.0
        diff = np.bitwise_xor(self.raw_key_a, self.raw_key_b)
        flips = sum(bin(int(v)).count("1") for v in diff)
        return flips / self.raw_key_bits

    def records(self) -> Iterator[IterationRecord]:
        n = self.config.n
        for i in range(self.config.iterations):
            key = bool(self.a_basis_z[i] and self.b_measure[i])
            b = int(self.b_outcome[i]) if self.b_measure[i] else None
            yield IterationRecord(
                a_basis="Z" if self.a_basis_z[i] else "F",
                b_op="MeasureResend" if self.b_measure[i] else "Reflect",
                a_index=int(self.a_index[i]),
                b_outcome=b,
                a_return_outcome=int(self.c_outcome[i]),
                key_contrib=(format(int(self.a_index[i]), f"0{n}b"), format(b, f"0{n}b")) if key else None,
            )


def _sample_rows(cdfs: np.ndarray, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw: for each i pick the first index with cdfs[rows[i]] > u[i]."""
    out = np.empty(rows.size, dtype=np.int64)
    for r in np.unique(rows):
        mask = rows == r
        cdf = cdfs[r]
        out[mask] = np.minimum(np.searchsorted(cdf, u[mask] * cdf[-1], side="right"), cdf.size - 1)
    return out


def _choices(config: ProtocolConfig, rng: np.random.Generator):
    it = config.iterations
    a_z = rng.random(it) < config.p_Z
    b_mr = rng.random(it) < config.p_M
    u = rng.random(it)
    disclose = rng.random(it) < config.test_fraction
    return a_z, b_mr, u, disclose


def _collect(config, protocol, a_z, b_mr, a_idx, b_out, c_out, disclose) -> SimulationResult:
    N = config.N
    key = a_z & b_mr
    sel = key & disclose
    key_counts = np.zeros((N, N, N), dtype=np.int64)
    np.add.at(key_counts, (a_idx[sel], b_out[sel], c_out[sel]), 1)
    b_counts = np.bincount(b_out[b_mr], minlength=N).astype(np.int64)
    f_sel = ~a_z & ~b_mr
    f_counts = np.zeros((N, N), dtype=np.int64)
    np.add.at(f_counts, (a_idx[f_sel], c_out[f_sel]), 1)
    stats = ObservedStatistics(config.n, protocol, config.iterations, key_counts, f_counts, b_counts)
    return SimulationResult(config, stats, a_z, b_mr, a_idx, b_out, c_out, disclose)


def sqkd_tables(attack: CollectiveAttack) -> tuple[np.ndarray, np.ndarray]:
    """Born tables for the prepare-and-measure protocol.

    Returns ``mr[s, x, b, c]`` (joint probability of B's result b and A's
    return result c given A sent basis state x of basis s) and ``refl[s, x, c]``.
    """
    N, n = attack.N, attack.n
    d_f, d_r = attack.forward_dim, attack.reverse_dim
    _check_cap(N * d_f * d_r)
    mr = np.zeros((2, N, N, N))
    refl = np.zeros((2, N, N))
    for s, kind in enumerate((Z, F)):
        V = _basis(kind, n)
        for x in range(N):
            psi = np.zeros((N, d_f, d_r), dtype=complex)
            psi[:, 0, 0] = V[:, x]
            psi = attack.apply_forward(psi, 0, 1)

            back = attack.apply_reverse(psi, 0, 1, 2)
            refl[s, x] = np.sum(np.abs(apply_operator(back, V.conj().T, [0])) ** 2, axis=(1, 2))

            pb = np.sum(np.abs(psi) ** 2, axis=(1, 2))
            for b in np.flatnonzero(pb > 1e-15):
                collapsed = np.zeros_like(psi)
                collapsed[b] = psi[b]  # resend |b>, Eve's memory stays correlated
                back = attack.apply_reverse(collapsed, 0, 1, 2)
                mr[s, x, b] = np.sum(np.abs(apply_operator(back, V.conj().T, [0])) ** 2, axis=(1, 2))
    return mr, refl


def run_sqkd(config: ProtocolConfig, attack: CollectiveAttack) -> SimulationResult:
    """Prepare-and-measure protocol: A sends a Z or F state, B measures-and-resends or reflects."""
    if attack.n != config.n:
        raise ValueError("attack and config disagree on n")
    N = config.N
    mr, refl = sqkd_tables(attack)
    rng = np.random.default_rng(config.seed)
    a_z, b_mr, u, disclose = _choices(config, rng)
    x = rng.integers(0, N, size=config.iterations)
    s = np.where(a_z, 0, 1)
    row = s * N + x

    b_out = np.full(config.iterations, -1, dtype=np.int64)
    c_out = np.empty(config.iterations, dtype=np.int64)
    mr_cdf = np.cumsum(mr.reshape(2 * N, N * N), axis=1)
    joint = _sample_rows(mr_cdf, row[b_mr], u[b_mr])
    b_out[b_mr], c_out[b_mr] = np.divmod(joint, N)
    r_cdf = np.cumsum(refl.reshape(2 * N, N), axis=1)
    c_out[~b_mr] = _sample_rows(r_cdf, row[~b_mr], u[~b_mr])
    return _collect(config, "sqkd", a_z, b_mr, x, b_out, c_out, disclose)


def _run_from_states(config: ProtocolConfig, protocol: str, states: dict) -> SimulationResult:
    N, n = config.N, config.n
    rng = np.random.default_rng(config.seed)
    a_z, b_mr, u, disclose = _choices(config, rng)
    # rows: (branch, basis) -> flattened p[a1, a2, b]
    tables = []
    for branch in (MR, R):
        for kind in (Z, F):
            tables.append(outcome_table(states[branch], kind).reshape(-1))
    cdfs = np.cumsum(np.array(tables), axis=1)
    row = np.where(b_mr, 0, 2) + np.where(a_z, 0, 1)
    joint = _sample_rows(cdfs, row, u)
    a1, rest = np.divmod(joint, N * N)
    a2, b = np.divmod(rest, N)
    b_out = np.where(b_mr, b, -1)
    return _collect(config, protocol, a_z, b_mr, a1, b_out, a2, disclose)


def run_ent(config: ProtocolConfig, attack: CollectiveAttack) -> SimulationResult:
    """Entanglement-based two-way protocol with B's CNOT copy on measure-and-resend."""
    if attack.n != config.n:
        raise ValueError("attack and config disagree on n")
    states = {branch: ent_state(attack, branch) for branch in Branch}
    return _run_from_states(config, "ent", states)


def run_ow(config: ProtocolConfig, attack: OneWayAttack) -> SimulationResult:
    """One-way protocol: B prepares the p(b)-weighted copies and sends A1 A2 to A."""
    if attack.n != config.n:
        raise ValueError("attack and config disagree on n")
    states = {branch: ow_state(attack, branch) for branch in Branch}
    return _run_from_states(config, "ow", states)


def estimate_noise(stats: ObservedStatistics) -> tuple[float, float]:
    """(Q_hat, Q_F_hat): Z disagreement of A1 and B on key iterations, F disagreement on reflect."""
    key_total = stats.key_counts.sum()
    f_total = stats.f_counts.sum()
    if key_total == 0 or f_total == 0:
        raise ValueError("need samples in both the key and the reflect-Fourier branches")
    ab = stats.key_counts.sum(axis=2)
    q_hat = 1 - np.trace(ab) / key_total
    qf_hat = 1 - np.trace(stats.f_counts) / f_total
    return float(q_hat), float(qf_hat)
