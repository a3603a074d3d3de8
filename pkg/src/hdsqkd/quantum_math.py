"""Finite-dimensional state algebra over named registers.

Everything here is dense and exact up to floating point. Registers are
addressed by name and composed with the convention that the first register
in a layout is the most significant index block of the Kronecker product.
Entropies are in bits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

HERMITIAN_TOL = 1e-9
NORM_TOL = 1e-9
EIG_CLAMP = 1e-12


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered (name, dim) pairs describing a composite Hilbert space."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(name), int(dim)) for name, dim in self.registers)
        object.__setattr__(self, "registers", regs)
        names = [name for name, _ in regs]
        if len(set(names)) != len(names):
            raise ValueError(f"register names must be unique, got {names}")
        if any(dim < 1 for _, dim in regs):
            raise ValueError(f"register dims must be positive, got {regs}")
        if not regs:
            raise ValueError("layout needs at least one register")

    @classmethod
    def of(cls, **dims: int) -> "RegisterLayout":
        return cls(tuple(dims.items()))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.registers)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown register {name!r}; layout has {self.names}") from None

    def dim(self, name: str) -> int:
        return self.dims[self.index(name)]

    def subset(self, names: Iterable[str]) -> "RegisterLayout":
        wanted = set(names)
        for name in wanted:
            self.index(name)
        return RegisterLayout(tuple(r for r in self.registers if r[0] in wanted))

    def __add__(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout(self.registers + other.registers)


@dataclass(frozen=True, eq=False)
class StateVector:
    layout: RegisterLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.layout.total_dim:
            raise ValueError(
                f"{amps.size} amplitudes for a layout of dimension {self.layout.total_dim}"
            )
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (squared norm {norm:.12g})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, index: int, dim: int, name: str = "A") -> "StateVector":
        if not 0 <= index < dim:
            raise ValueError(f"basis index {index} out of range for dim {dim}")
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls(RegisterLayout(((name, dim),)), amps)

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per register."""
        return self.amplitudes.reshape(self.layout.dims)

    def to_density(self) -> "DensityOperator":
        return DensityOperator(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    layout: RegisterLayout
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        d = self.layout.total_dim
        if mat.shape != (d, d):
            raise ValueError(f"matrix shape {mat.shape} does not match layout dimension {d}")
        mat = _symmetrize(mat)
        tr = np.trace(mat).real
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"density operator has trace {tr:.12g}")
        object.__setattr__(self, "matrix", mat)

    def eigenvalues(self) -> np.ndarray:
        evals = np.linalg.eigvalsh(self.matrix)
        if evals.min() < -HERMITIAN_TOL:
            raise ValueError(f"operator is not positive semidefinite (eigenvalue {evals.min():.3g})")
        return evals


class BasisKind(enum.Enum):
    COMPUTATIONAL = "Z"
    FOURIER = "F"


@dataclass(frozen=True)
class BasisSpec:
    kind: BasisKind
    n: int

    @property
    def dim(self) -> int:
        return 2**self.n

    def matrix(self) -> np.ndarray:
        """Unitary whose column x is the x-th basis vector."""
        if self.kind is BasisKind.COMPUTATIONAL:
            return np.eye(self.dim, dtype=complex)
        return fourier_matrix(self.n)


Z = BasisKind.COMPUTATIONAL
F = BasisKind.FOURIER


def _symmetrize(mat: np.ndarray) -> np.ndarray:
    dev = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
    if dev > HERMITIAN_TOL:
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3g})")
    return (mat + mat.conj().T) / 2


def fourier_matrix(n: int) -> np.ndarray:
    """Columns are the Fourier basis vectors |F_x> for an n-qubit register."""
    N = 2**n
    y = np.arange(N)
    return np.exp(-2j * np.pi * np.outer(y, y) / N) / math.sqrt(N)


def fourier_vector(x: int, n: int, name: str = "A") -> StateVector:
    """Return |F_x> = N^{-1/2} sum_y exp(-pi i x y / 2^{n-1}) |y>."""
    N = 2**n
    if not 0 <= x < N:
        raise ValueError(f"Fourier index {x} out of range for n={n}")
    y = np.arange(N)
    amps = np.exp(-1j * np.pi * x * y / 2 ** (n - 1)) / math.sqrt(N)
    return StateVector(RegisterLayout(((name, N),)), amps)


State = Union[StateVector, DensityOperator]


def tensor(items: Sequence[State]) -> State:
    """Kronecker product in the given order; layouts are concatenated."""
    if not items:
        raise ValueError("tensor of an empty sequence")
    kinds = {type(item) for item in items}
    if len(kinds) != 1:
        raise TypeError("cannot mix state vectors and density operators in a tensor product")
    layout = items[0].layout
    for item in items[1:]:
        layout = layout + item.layout
    if isinstance(items[0], StateVector):
        amps = items[0].amplitudes
        for item in items[1:]:
            amps = np.kron(amps, item.amplitudes)
        return StateVector(layout, amps)
    mat = items[0].matrix
    for item in items[1:]:
        mat = np.kron(mat, item.matrix)
    return DensityOperator(layout, mat)


def partial_trace(op: State, keep: Iterable[str]) -> DensityOperator:
    """Reduce to the registers in ``keep`` (returned in layout order).

    Pure states are reduced without forming the full density matrix.
    """
    keep = set(keep)
    if not keep:
        raise ValueError("keep must name at least one register")
    layout = op.layout
    for name in keep:
        layout.index(name)
    kept = [i for i, name in enumerate(layout.names) if name in keep]
    traced = [i for i in range(len(layout.dims)) if i not in kept]
    out_layout = layout.subset(keep)
    dk = out_layout.total_dim
    dims = layout.dims

    if isinstance(op, StateVector):
        psi = op.tensor().transpose(kept + traced).reshape(dk, -1)
        return DensityOperator(out_layout, psi @ psi.conj().T)

    k = len(dims)
    rho = op.matrix.reshape(dims + dims)
    perm = kept + traced + [k + i for i in kept] + [k + i for i in traced]
    rho = rho.transpose(perm).reshape(dk, layout.total_dim // dk, dk, layout.total_dim // dk)
    return DensityOperator(out_layout, np.einsum("ijkj->ik", rho))


def _split(layout: RegisterLayout, register: str) -> tuple[int, int, int]:
    i = layout.index(register)
    before = math.prod(layout.dims[:i])
    after = math.prod(layout.dims[i + 1 :])
    return before, layout.dims[i], after


def measure_register(op: State, register: str, basis: BasisSpec) -> DensityOperator:
    """Dephase ``register`` in ``basis``: sum_k (P_k x I) op (P_k x I)."""
    if isinstance(op, StateVector):
        op = op.to_density()
    before, d, after = _split(op.layout, register)
    if basis.dim != d:
        raise ValueError(f"basis of dimension {basis.dim} for register {register!r} of dim {d}")
    V = basis.matrix()
    rho = op.matrix.reshape(before, d, after, before, d, after)
    # rotate the register into the measurement basis, keep its diagonal, rotate back
    rho = np.einsum("xi,aibcjd,jy->axbcyd", V.conj().T, rho, V, optimize=True)
    rho = rho * np.eye(d)[None, :, None, None, :, None]
    rho = np.einsum("ix,axbcyd,yj->aibcjd", V, rho, V.conj().T, optimize=True)
    D = op.layout.total_dim
    return DensityOperator(op.layout, rho.reshape(D, D))


def _entropy_of_spectrum(evals: np.ndarray) -> float:
    evals = np.where(np.abs(evals) < EIG_CLAMP, 0.0, evals)
    if evals.min() < -HERMITIAN_TOL:
        raise ValueError(f"negative eigenvalue {evals.min():.3g} in entropy")
    pos = evals[evals > 0]
    return float(-np.sum(pos * np.log2(pos)))


def von_neumann_entropy(op: Union[State, np.ndarray]) -> float:
    """-tr(rho log2 rho), with 0 log 0 = 0."""
    if isinstance(op, StateVector):
        return 0.0
    mat = op.matrix if isinstance(op, DensityOperator) else _symmetrize(np.asarray(op, dtype=complex))
    return _entropy_of_spectrum(np.linalg.eigvalsh(mat))


def entropy(op: State, registers: Iterable[str]) -> float:
    return von_neumann_entropy(partial_trace(op, registers))


def conditional_entropy(op: State, target: str, given: Iterable[str]) -> float:
    """H(target | given) = H(target, given) - H(given)."""
    given = set(given)
    if target in given:
        raise ValueError(f"register {target!r} is both target and conditioning system")
    op.layout.index(target)
    if not given:
        return entropy(op, {target})
    return entropy(op, given | {target}) - entropy(op, given)


def trace_distance(x: np.ndarray) -> float:
    """Trace norm of a Hermitian matrix (sum of absolute eigenvalues).

    This is the unnormalized ||X||; halve it for the usual distance between states.
    """
    x = _symmetrize(np.asarray(x, dtype=complex))
    return float(np.sum(np.abs(np.linalg.eigvalsh(x))))


def pure_trace_distance(psi: np.ndarray, phi: np.ndarray) -> float:
    """||psi psi^dag - phi phi^dag|| for unit vectors, without forming outer products.

    Works in the two-dimensional span of the vectors so that nearly identical
    states give a distance of order machine epsilon, not its square root.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    _, r = np.linalg.qr(np.stack([psi, phi], axis=1))
    a, b = r[:, 0], r[:, 1]
    m = np.outer(a, a.conj()) - np.outer(b, b.conj())
    return float(np.sum(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy argument {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def apply_operator(state: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Apply a square matrix to the given axes of an amplitude tensor.

    ``op`` acts on the Kronecker product of the listed axes, in the listed order.
    """
    axes = list(axes)
    sub = [state.shape[i] for i in axes]
    d = math.prod(sub)
    if op.shape != (d, d):
        raise ValueError(f"operator of shape {op.shape} on axes of total dim {d}")
    rest = [i for i in range(state.ndim) if i not in axes]
    moved = state.transpose(axes + rest).reshape(d, -1)
    out = (op @ moved).reshape(sub + [state.shape[i] for i in rest])
    return out.transpose(np.argsort(axes + rest))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-like unitary from the QR decomposition of a complex Gaussian matrix."""
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(g)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_state(layout: RegisterLayout, rng: np.random.Generator) -> StateVector:
    d = layout.total_dim
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return StateVector(layout, v / np.linalg.norm(v))
