"""Channel statistics and concrete collective attacks.

A collective attack is stored as a pair of unitaries. ``U_F`` acts on the
travelling register T and Eve's forward memory EF. ``U_R`` acts either on T and
a fresh reverse memory ER, or on T, EF and ER together when Eve reuses her
forward memory on the way back. Both memories start in their index-0 state,
which plays the role of |chi>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .quantum_math import DensityOperator, apply_operator, random_unitary

PB_ZERO = 1e-14
UNITARY_TOL = 1e-9
ISOMETRY_TOL = 1e-10


class ReductionError(RuntimeError):
    """The rewind construction failed (zero p(b) in strict mode, or not an isometry)."""


@dataclass(frozen=True)
class DepolarizingModel:
    n: int
    Q: float
    Q_F: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if not 0.0 <= self.Q < 1.0:
            raise ValueError(f"Q must lie in [0, 1), got {self.Q}")
        if self.Q_F is not None and not 0.0 <= self.Q_F < 1.0:
            raise ValueError(f"Q_F must lie in [0, 1), got {self.Q_F}")

    @property
    def N(self) -> int:
        return 2**self.n

    @property
    def alpha(self) -> float:
        return self.Q / (self.N - 1)

    @property
    def beta(self) -> float:
        return 1.0 - self.Q


def _check_index(model: DepolarizingModel, *idx: int) -> None:
    for i in idx:
        if not 0 <= i < model.N:
            raise ValueError(f"index {i} out of range for N={model.N}")


def cond_prob(model: DepolarizingModel, x: int, y: int) -> float:
    """Probability of observing x when y was sent through one channel use."""
    _check_index(model, x, y)
    return model.beta if x == y else model.alpha


def joint_prob(model: DepolarizingModel, a: int, b: int, c: int) -> float:
    """p(a, b, c) for the measure-and-resend branch with independent channels."""
    _check_index(model, a, b, c)
    fwd = model.beta if b == a else model.alpha
    rev = model.beta if c == b else model.alpha
    return fwd * rev / model.N


def joint_prob_table(model: DepolarizingModel) -> np.ndarray:
    """Array p[a, b, c] with the same values as :func:`joint_prob`."""
    N = model.N
    step = np.full((N, N), model.alpha)
    np.fill_diagonal(step, model.beta)
    return step[:, :, None] * step[None, :, :] / N


def depolarize(op: DensityOperator, Q: float) -> DensityOperator:
    """(1 - N Q/(N-1)) sigma + Q/(N-1) I on a single register."""
    if len(op.layout.dims) != 1:
        raise ValueError("depolarize acts on a single-register operator")
    N = op.layout.total_dim
    if N < 2:
        raise ValueError("depolarize needs a register of dimension at least 2")
    if not 0.0 <= Q <= (N - 1) / N + 1e-15:
        raise ValueError(f"Q={Q} outside the completely positive range [0, {(N - 1) / N}]")
    mat = (1 - N * Q / (N - 1)) * op.matrix + (Q / (N - 1)) * np.eye(N)
    return DensityOperator(op.layout, mat)


def weyl_operator(N: int, k: int, l: int) -> np.ndarray:
    """X^k Z^l with X|j> = |j+1 mod N> and Z|j> = w^j |j>."""
    shift = np.roll(np.eye(N), k, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(N) * l / N))
    return shift @ clock


def complete_unitary(isometry: np.ndarray, ancilla_dim: int) -> np.ndarray:
    """Extend an isometry defined on |x>|0>_anc to a unitary on system x ancilla.

    ``isometry`` has shape (d * ancilla_dim, d); column x is the image of |x>|0>.
    """
    D, d = isometry.shape
    if D != d * ancilla_dim:
        raise ValueError(f"isometry shape {isometry.shape} inconsistent with ancilla dim {ancilla_dim}")
    gram = isometry.conj().T @ isometry
    if np.max(np.abs(gram - np.eye(d))) > ISOMETRY_TOL:
        raise ValueError("columns are not orthonormal")
    U = np.zeros((D, D), dtype=complex)
    inputs = np.arange(d) * ancilla_dim
    U[:, inputs] = isometry
    others = np.setdiff1d(np.arange(D), inputs)
    if others.size:
        U[:, others] = null_space(isometry.conj().T)
    return U


@dataclass(frozen=True, eq=False)
class CollectiveAttack:
    """Two-way attack (U_F, U_R).

    ``U_F`` is square on T x EF. ``U_R`` is square on T x ER, or on T x EF x ER
    when ``reverse_uses_memory`` is set.
    """

    n: int
    forward_dim: int
    reverse_dim: int
    U_F: np.ndarray
    U_R: np.ndarray
    reverse_uses_memory: bool = False
    label: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        N = self.N
        if self.U_F.shape != (N * self.forward_dim,) * 2:
            raise ValueError(f"U_F shape {self.U_F.shape} does not match N={N}, forward_dim={self.forward_dim}")
        d_r = N * self.reverse_dim * (self.forward_dim if self.reverse_uses_memory else 1)
        if self.U_R.shape != (d_r, d_r):
            raise ValueError(f"U_R shape {self.U_R.shape}, expected {(d_r, d_r)}")
        for name, U in (("U_F", self.U_F), ("U_R", self.U_R)):
            dev = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
            if dev > UNITARY_TOL:
                raise ValueError(f"{name} is not unitary (deviation {dev:.3g})")

    @property
    def N(self) -> int:
        return 2**self.n

    @property
    def ancilla_dim(self) -> int:
        return self.forward_dim * self.reverse_dim

    @property
    def chi(self) -> np.ndarray:
        chi = np.zeros(self.ancilla_dim, dtype=complex)
        chi[0] = 1.0
        return chi

    def forward_states(self) -> np.ndarray:
        """e[a, b] = (<b| x I) U_F (|a> x |chi>), shape (N, N, forward_dim)."""
        N, d = self.N, self.forward_dim
        cols = self.U_F[:, np.arange(N) * d]  # images of |a>|0>
        return cols.T.reshape(N, N, d)

    def apply_forward(self, psi: np.ndarray, t_axis: int, ef_axis: int) -> np.ndarray:
        return apply_operator(psi, self.U_F, [t_axis, ef_axis])

    def apply_reverse(self, psi: np.ndarray, t_axis: int, ef_axis: int, er_axis: int) -> np.ndarray:
        axes = [t_axis, ef_axis, er_axis] if self.reverse_uses_memory else [t_axis, er_axis]
        return apply_operator(psi, self.U_R, axes)

    def describe(self) -> dict:
        return {"kind": self.label, "n": self.n, **self.params}


@dataclass(frozen=True, eq=False)
class OneWayAttack:
    """Attack (p(b), U) against the one-way protocol.

    ``action[:, b]`` is U(|b, b> x |chi>) laid out as A1 x A2 x E. Only these
    inputs are ever prepared, so U is stored on that subspace.
    """

    n: int
    pb: np.ndarray
    action: np.ndarray
    ancilla_dim: int

    def __post_init__(self):
        N = self.N
        pb = np.asarray(self.pb, dtype=float)
        if pb.shape != (N,) or pb.min() < 0 or abs(pb.sum() - 1) > 1e-12:
            raise ValueError(f"p(b) must be a probability vector of length {N}")
        object.__setattr__(self, "pb", pb)
        if self.action.shape != (N * N * self.ancilla_dim, N):
            raise ValueError(f"action shape {self.action.shape} inconsistent with n={self.n}")

    @property
    def N(self) -> int:
        return 2**self.n

    @classmethod
    def from_operator(cls, n: int, pb: np.ndarray, U: np.ndarray, ancilla_dim: int = 1) -> "OneWayAttack":
        """Build from a full unitary on A1 x A2 x E."""
        N = 2**n
        cols = (np.arange(N) * N + np.arange(N)) * ancilla_dim
        return cls(n, pb, U[:, cols], ancilla_dim)

    def output_states(self) -> np.ndarray:
        """Action as a tensor u[b, a, c, e]."""
        N = self.N
        return self.action.T.reshape(N, N, N, self.ancilla_dim)

    def orthogonal_form(self) -> np.ndarray:
        """e[a, b, c] = (<a, c| x I) U |b, b, chi>, shape (N, N, N, ancilla_dim).

        Under the symmetric-attack argument these satisfy
        <e_{a,b,c}|e_{a,b',c}> = N p(a,b,c) delta_{b b'} with p(a,b,c) = |e_{a,b,c}|^2 / N.
        """
        return self.output_states().transpose(1, 0, 2, 3)


def identity_attack(n: int) -> CollectiveAttack:
    N = 2**n
    return CollectiveAttack(n, 1, 1, np.eye(N, dtype=complex), np.eye(N, dtype=complex), label="identity")


def _depolarizing_isometry(N: int, Q: float) -> np.ndarray:
    q = N * Q / (N - 1)
    weights = np.full(N * N, q / N**2)
    weights[0] += 1 - q
    V = np.zeros((N * N * N, N), dtype=complex)
    for k in range(N):
        for l in range(N):
            W = weyl_operator(N, k, l)
            flag = k * N + l
            # image of |y> is sum_kl sqrt(w_kl) W_kl|y> |kl>
            V.reshape(N, N * N, N)[:, flag, :] += math.sqrt(weights[flag]) * W
    return V


def weyl_dilation_attack(n: int, Q: float) -> CollectiveAttack:
    """Stinespring dilation of the depolarizing channel on each leg.

    The channel is the Weyl twirl sum_kl w_kl W_kl . W_kl^dag with
    w_00 = 1 - q + q/N^2 and w_kl = q/N^2 otherwise, q = N Q/(N - 1),
    each Weyl error tagged by an orthogonal ancilla flag.
    """
    N = 2**n
    if not 0.0 <= Q < (N - 1) / N:
        raise ValueError(f"Q={Q} outside [0, {(N - 1) / N})")
    U = complete_unitary(_depolarizing_isometry(N, Q), N * N)
    return CollectiveAttack(n, N * N, N * N, U, U.copy(), label="weyl", params={"q": Q})


def measure_resend_attack(n: int, Q: float) -> CollectiveAttack:
    """Eve records the sent Z value on every leg and flips it with probability Q."""
    N = 2**n
    if not 0.0 <= Q <= 1.0:
        raise ValueError(f"Q={Q} outside [0, 1]")
    step = np.full((N, N), Q / (N - 1))
    np.fill_diagonal(step, 1 - Q)
    V = np.zeros((N, N * N, N), dtype=complex)
    for a in range(N):
        for b in range(N):
            V[b, a * N + b, a] = math.sqrt(step[b, a])
    U = complete_unitary(V.reshape(N * N * N, N), N * N)
    return CollectiveAttack(n, N * N, N * N, U, U.copy(), label="measure-resend", params={"q": Q})


def random_attack(
    n: int,
    rng: np.random.Generator,
    forward_dim: int | None = None,
    reverse_dim: int = 2,
    reverse_uses_memory: bool = True,
) -> CollectiveAttack:
    N = 2**n
    forward_dim = N if forward_dim is None else forward_dim
    U_F = random_unitary(N * forward_dim, rng)
    d_r = N * reverse_dim * (forward_dim if reverse_uses_memory else 1)
    U_R = random_unitary(d_r, rng)
    return CollectiveAttack(n, forward_dim, reverse_dim, U_F, U_R, reverse_uses_memory, label="random")


def induced_pb(attack: CollectiveAttack) -> np.ndarray:
    """p(b) = (1/N) sum_a <e_{a,b}|e_{a,b}>."""
    e = attack.forward_states()
    norms = np.sum(np.abs(e) ** 2, axis=2)
    return norms.sum(axis=0) / attack.N


def build_rewind(attack: CollectiveAttack, strict: bool = False) -> np.ndarray:
    """Rewind isometry on span{|b, b>}: Rw|b,b> = sum_a |a, b, e_{a,b}> / sqrt(N p(b)).

    Returns an array of shape (N * N * forward_dim, N) laid out as A1 x A2 x EF.
    Columns with p(b) below ``PB_ZERO`` are left at zero (outside the domain)
    unless ``strict`` is set, in which case they raise.
    """
    N, d = attack.N, attack.forward_dim
    e = attack.forward_states()
    pb = induced_pb(attack)
    support = pb >= PB_ZERO
    if strict and not support.all():
        raise ReductionError(f"p(b) vanishes for b in {np.flatnonzero(~support).tolist()}")
    rw = np.zeros((N, N, d, N), dtype=complex)
    for b in np.flatnonzero(support):
        rw[:, b, :, b] = e[:, b, :] / math.sqrt(N * pb[b])
    rw = rw.reshape(N * N * d, N)
    gram = rw[:, support].conj().T @ rw[:, support]
    dev = np.max(np.abs(gram - np.eye(int(support.sum()))))
    if dev > ISOMETRY_TOL:
        raise ReductionError(f"rewind operator is not an isometry (deviation {dev:.3g})")
    return rw


def reduce_attack(attack: CollectiveAttack, strict: bool = False) -> OneWayAttack:
    """One-way attack (p(b), (I x U_R) Rw) reproducing the two-way joint state."""
    N = attack.N
    rw = build_rewind(attack, strict=strict)
    d_f, d_r = attack.forward_dim, attack.reverse_dim
    # columns indexed by b: tensor [A1, A2, EF, ER, b] with ER in |0>
    psi = np.zeros((N, N, d_f, d_r, N), dtype=complex)
    psi[:, :, :, 0, :] = rw.reshape(N, N, d_f, N)
    psi = attack.apply_reverse(psi, t_axis=1, ef_axis=2, er_axis=3)
    return OneWayAttack(n=attack.n, pb=induced_pb(attack), action=psi.reshape(-1, N), ancilla_dim=d_f * d_r)
