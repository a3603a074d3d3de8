import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdsqkd.quantum_math import (
    BasisSpec,
    DensityOperator,
    F,
    RegisterLayout,
    StateVector,
    Z,
    binary_entropy,
    conditional_entropy,
    fourier_matrix,
    fourier_vector,
    measure_register,
    partial_trace,
    pure_trace_distance,
    random_state,
    tensor,
    trace_distance,
    von_neumann_entropy,
)


def ket(i, d, name):
    return StateVector.basis(i, d, name)


def plus(name):
    return StateVector(RegisterLayout(((name, 2),)), np.array([1, 1]) / math.sqrt(2))


def test_layout_invariants():
    lay = RegisterLayout.of(A=2, B=3, E=4)
    assert lay.total_dim == 24
    assert lay.names == ("A", "B", "E")
    with pytest.raises(ValueError):
        RegisterLayout((("A", 2), ("A", 2)))
    with pytest.raises(KeyError):
        lay.index("T")


def test_state_vector_rejects_unnormalized():
    with pytest.raises(ValueError):
        StateVector(RegisterLayout.of(A=2), np.array([1.0, 1.0]))


def test_density_operator_rejects_non_hermitian():
    with pytest.raises(ValueError):
        DensityOperator(RegisterLayout.of(A=2), np.array([[0.5, 0.1], [0.0, 0.5]]))


@pytest.mark.parametrize(
    "x, n, expected",
    [
        (0, 1, np.array([1, 1]) / math.sqrt(2)),
        (1, 1, np.array([1, -1]) / math.sqrt(2)),
        (1, 2, 0.5 * np.array([1, -1j, -1, 1j])),
    ],
)
def test_fourier_vector(x, n, expected):
    np.testing.assert_allclose(fourier_vector(x, n).amplitudes, expected, atol=1e-15)


def test_fourier_vector_range():
    with pytest.raises(ValueError):
        fourier_vector(4, 2)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("kind", [Z, F])
def test_basis_unitary_and_unbiased(n, kind):
    V = BasisSpec(kind, n).matrix()
    assert np.max(np.abs(V.conj().T @ V - np.eye(2**n))) <= 1e-10
    if kind is F:
        assert np.max(np.abs(np.abs(V) ** 2 - 1 / 2**n)) <= 1e-12
        for x in range(2**n):
            np.testing.assert_allclose(V[:, x], fourier_vector(x, n).amplitudes, atol=1e-13)


def test_tensor_examples():
    s = tensor([ket(0, 2, "A"), ket(1, 2, "B")])
    np.testing.assert_array_equal(s.amplitudes, [0, 1, 0, 0])
    assert s.layout.total_dim == 4

    lay = RegisterLayout.of(A=2)
    eye = DensityOperator(lay, np.eye(2) / 2)
    prod = tensor([eye, DensityOperator(RegisterLayout.of(B=2), np.eye(2) / 2)])
    np.testing.assert_allclose(prod.matrix, np.eye(4) / 4)

    s = tensor([plus("A"), ket(0, 2, "B")])
    np.testing.assert_allclose(s.amplitudes, np.array([1, 0, 1, 0]) / math.sqrt(2))

    with pytest.raises(TypeError):
        tensor([ket(0, 2, "A"), eye])


def brute_partial_trace(rho, dims, keep_idx):
    """Double-loop partial trace over every register not in keep_idx."""
    k = len(dims)
    kept_dims = [dims[i] for i in keep_idx]
    dk = math.prod(kept_dims)
    out = np.zeros((dk, dk), dtype=complex)
    for i in range(rho.shape[0]):
        mi = np.unravel_index(i, dims)
        for j in range(rho.shape[1]):
            mj = np.unravel_index(j, dims)
            if any(mi[r] != mj[r] for r in range(k) if r not in keep_idx):
                continue
            ki = np.ravel_multi_index([mi[r] for r in keep_idx], kept_dims)
            kj = np.ravel_multi_index([mj[r] for r in keep_idx], kept_dims)
            out[ki, kj] += rho[i, j]
    return out


def test_partial_trace_examples():
    rho_a = DensityOperator(RegisterLayout.of(A=2), np.array([[0.7, 0.2j], [-0.2j, 0.3]]))
    zero_b = ket(0, 2, "B").to_density()
    red = partial_trace(tensor([rho_a, zero_b]), {"A"})
    np.testing.assert_allclose(red.matrix, rho_a.matrix, atol=1e-15)

    bell = StateVector(RegisterLayout.of(A=2, B=2), np.array([1, 0, 0, 1]) / math.sqrt(2))
    for side in ("A", "B"):
        np.testing.assert_allclose(partial_trace(bell, {side}).matrix, np.eye(2) / 2, atol=1e-15)

    with pytest.raises(KeyError):
        partial_trace(bell, {"E"})


@pytest.mark.parametrize("seed", range(5))
def test_partial_trace_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    lay = RegisterLayout.of(A=2, B=3, E=2)
    psi = random_state(lay, rng)
    rho = psi.to_density()
    for keep, idx in [({"A", "B"}, [0, 1]), ({"A", "E"}, [0, 2]), ({"B"}, [1])]:
        oracle = brute_partial_trace(rho.matrix, lay.dims, idx)
        np.testing.assert_allclose(partial_trace(rho, keep).matrix, oracle, atol=1e-12)
        np.testing.assert_allclose(partial_trace(psi, keep).matrix, oracle, atol=1e-12)


def test_measure_register_examples():
    p = plus("A").to_density()
    np.testing.assert_allclose(measure_register(p, "A", BasisSpec(Z, 1)).matrix, np.eye(2) / 2, atol=1e-15)

    diag = DensityOperator(RegisterLayout.of(A=4), np.diag([0.1, 0.2, 0.3, 0.4]))
    np.testing.assert_allclose(measure_register(diag, "A", BasisSpec(Z, 2)).matrix, diag.matrix, atol=1e-15)

    with pytest.raises(ValueError):
        measure_register(diag, "A", BasisSpec(Z, 1))


@pytest.mark.parametrize("seed", range(4))
def test_fourier_measurement_matches_projector_sum(seed):
    rng = np.random.default_rng(seed)
    rho = random_state(RegisterLayout.of(A1=4, A2=2), rng).to_density()
    V = fourier_matrix(2)
    oracle = np.zeros((8, 8), dtype=complex)
    for k in range(4):
        proj = np.kron(np.outer(V[:, k], V[:, k].conj()), np.eye(2))
        oracle += proj @ rho.matrix @ proj
    np.testing.assert_allclose(measure_register(rho, "A1", BasisSpec(F, 2)).matrix, oracle, atol=1e-12)


def test_von_neumann_entropy_examples():
    assert von_neumann_entropy(plus("A").to_density()) == pytest.approx(0.0, abs=1e-12)
    for n in (1, 2, 3):
        N = 2**n
        mixed = DensityOperator(RegisterLayout.of(A=N), np.eye(N) / N)
        assert von_neumann_entropy(mixed) == pytest.approx(n, abs=1e-12)
    d = DensityOperator(RegisterLayout.of(A=4), np.diag([0.5, 0.25, 0.25, 0.0]))
    assert von_neumann_entropy(d) == pytest.approx(1.5, abs=1e-12)


def test_entropy_rejects_negative_spectrum():
    with pytest.raises(ValueError):
        von_neumann_entropy(np.diag([1.1, -0.1]))


def test_conditional_entropy_examples():
    rho_a = DensityOperator(RegisterLayout.of(A=2), np.diag([0.8, 0.2]))
    rho_b = DensityOperator(RegisterLayout.of(B=2), np.diag([0.6, 0.4]))
    prod = tensor([rho_a, rho_b])
    assert conditional_entropy(prod, "A", {"B"}) == pytest.approx(von_neumann_entropy(rho_a), abs=1e-12)

    for n in (1, 2):
        N = 2**n
        amps = np.zeros(N * N)
        amps[np.arange(N) * N + np.arange(N)] = 1 / math.sqrt(N)
        pair = StateVector(RegisterLayout.of(A=N, B=N), amps)
        assert conditional_entropy(pair, "A", {"B"}) == pytest.approx(-n, abs=1e-12)

    s0 = np.array([1, 0, 0])
    s1 = np.array([0, 1, 0])
    cq = 0.5 * np.kron(np.diag([1, 0]), np.outer(s0, s0)) + 0.5 * np.kron(np.diag([0, 1]), np.outer(s1, s1))
    cq = DensityOperator(RegisterLayout.of(A=2, E=3), cq)
    assert conditional_entropy(cq, "A", {"E"}) == pytest.approx(0.0, abs=1e-12)

    with pytest.raises(ValueError):
        conditional_entropy(cq, "A", {"A"})


def test_trace_distance_examples():
    assert trace_distance(np.zeros((3, 3))) == 0.0
    assert trace_distance(np.diag([1.0, -1.0])) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        trace_distance(np.array([[0, 1], [0, 0]]))


def test_trace_distance_matches_singular_values():
    rng = np.random.default_rng(11)
    for _ in range(100):
        d = int(rng.integers(2, 12))
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        h = g + g.conj().T
        oracle = np.sum(np.linalg.svd(h, compute_uv=False))
        assert abs(trace_distance(h) - oracle) <= 1e-9 * oracle


def test_pure_trace_distance_matches_dense():
    rng = np.random.default_rng(5)
    lay = RegisterLayout.of(A=3, B=4)
    for _ in range(20):
        psi = random_state(lay, rng).amplitudes
        phi = random_state(lay, rng).amplitudes
        dense = trace_distance(np.outer(psi, psi.conj()) - np.outer(phi, phi.conj()))
        assert pure_trace_distance(psi, phi) == pytest.approx(dense, abs=1e-12)
    assert pure_trace_distance(psi, psi) < 1e-14
    assert pure_trace_distance(psi, 1j * psi) < 1e-14


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (1.0, 0.0), (0.5, 1.0), (0.11, 0.499915958164528)])
def test_binary_entropy(x, expected):
    assert binary_entropy(x) == pytest.approx(expected, abs=1e-12)


def test_binary_entropy_range():
    with pytest.raises(ValueError):
        binary_entropy(1.5)


@given(st.floats(0, 1))
def test_binary_entropy_symmetric(x):
    assert binary_entropy(x) == pytest.approx(binary_entropy(1 - x), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(2, 5))
def test_pure_bipartite_entropies_agree(seed, da, db):
    psi = random_state(RegisterLayout.of(A=da, B=db), np.random.default_rng(seed))
    ha = von_neumann_entropy(partial_trace(psi, {"A"}))
    hb = von_neumann_entropy(partial_trace(psi, {"B"}))
    assert ha == pytest.approx(hb, abs=1e-9)
    assert 0 <= ha <= math.log2(min(da, db)) + 1e-9


def test_entropic_uncertainty_relation():
    rng = np.random.default_rng(2024)
    for k in range(200):
        n = 1 + k % 2
        N = 2**n
        lay = RegisterLayout.of(A=N, B=int(rng.integers(2, 5)), E=int(rng.integers(2, 5)))
        psi = random_state(lay, rng).to_density()
        h_ze = conditional_entropy(measure_register(psi, "A", BasisSpec(Z, n)), "A", {"E"})
        h_fb = conditional_entropy(measure_register(psi, "A", BasisSpec(F, n)), "A", {"B"})
        assert h_ze + h_fb >= n - 1e-7
