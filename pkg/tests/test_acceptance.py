"""Acceptance criteria, each checked at its stated tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import numpy as np
import pytest

from hdsqkd import keyrate_analysis as ka
from hdsqkd.attacks import identity_attack, measure_resend_attack, random_attack, weyl_dilation_attack
from hdsqkd.cli import main
from hdsqkd.keyrate_analysis import Scenario
from hdsqkd.protocol_sim import ProtocolConfig, exact_analysis, run_sqkd, verify_reduction
from hdsqkd.quantum_math import (
    BasisSpec,
    F,
    RegisterLayout,
    Z,
    conditional_entropy,
    measure_register,
    random_state,
    trace_distance,
)

Q_GRID = [round(0.01 + 0.04 * k, 2) for k in range(12)]


def test_ac1_delta_closed_form_vs_bruteforce(record_property):
    record_property("criterion", "AC1 delta_diag/delta_offdiag vs brute-force trace norms, rel 1e-9")
    worst = 0.0
    for n in (1, 2, 3, 4):
        N = 2**n
        for Q in Q_GRID:
            dd = trace_distance(ka.x_matrix(n, Q))
            worst = max(worst, abs(ka.delta_diag(n, Q) - dd) / dd)
            for c in range(1, N):
                do = trace_distance(ka.y_matrix(n, Q, 0, c))
                worst = max(worst, abs(ka.delta_offdiag(n, Q) - do) / do)
    assert worst <= 1e-9


def test_ac2_reduction_holds(record_property):
    record_property("criterion", "AC2 verify_reduction max trace distance <= 1e-9")
    attacks = [identity_attack(1), identity_attack(2)]
    for n in (1, 2):
        for Q in (0.05, 0.2):
            attacks += [weyl_dilation_attack(n, Q), measure_resend_attack(n, Q)]
    rng = np.random.default_rng(20240601)
    attacks += [random_attack(1, rng) for _ in range(50)]
    attacks += [random_attack(2, rng) for _ in range(10)]
    worst = max(verify_reduction(a).max_trace_distance for a in attacks)
    assert worst <= 1e-9


def test_ac3_noise_tolerance(record_property):
    record_property("criterion", "AC3 thresholds at n=50 in range and increasing over n in {1,2,5,50}")
    dep = [ka.noise_tolerance(n, Scenario.DEPENDENT).threshold_Q for n in (1, 2, 5, 50)]
    ind = [ka.noise_tolerance(n, Scenario.INDEPENDENT).threshold_Q for n in (1, 2, 5, 50)]
    assert 0.27 <= dep[-1] <= 0.31
    assert 0.23 <= ind[-1] <= 0.27
    for seq in (dep, ind):
        assert all(x < y for x, y in zip(seq, seq[1:]))


def test_ac4_keyrate_noiseless_and_monotone(record_property):
    record_property("criterion", "AC4 keyrate(n,0,0) == n and strictly decreasing on 0.001 grid to threshold")
    for n in range(1, 11):
        assert ka.keyrate(n, 0.0, 0.0).keyrate == n
    for scenario in Scenario:
        for n in (1, 2, 5, 50):
            t = ka.noise_tolerance(n, scenario).threshold_Q
            grid = np.arange(0, int(t * 1000) + 1) / 1000
            r = [ka.scenario_keyrate(n, float(q), scenario).keyrate for q in grid]
            assert all(x > y for x, y in zip(r, r[1:])), (scenario, n)


@pytest.mark.parametrize("Q", [0.02, 0.05])
def test_ac5_bound_is_sound_for_weyl_attack(record_property, Q):
    record_property("criterion", f"AC5 exact rate >= analyzer rate - 1e-7 (n=1, weyl, Q={Q})")
    ex = exact_analysis(weyl_dilation_attack(1, Q))
    bound = ka.keyrate(1, ex.Q, ex.Q_F).keyrate
    assert ex.keyrate_true >= bound - 1e-7


def _reference_pabc(N, Q):
    """Case-by-case joint distribution of the depolarizing model, written out independently."""
    alpha, beta = Q / (N - 1), 1 - Q
    p = np.empty((N, N, N))
    for a in range(N):
        for b in range(N):
            for c in range(N):
                if b == a:
                    p[a, b, c] = beta * beta if c == b else alpha * beta
                else:
                    p[a, b, c] = alpha * beta if c == b else alpha * alpha
    return p / N


def test_ac6_monte_carlo_statistics(record_property):
    record_property("criterion", "AC6 Monte Carlo p(a,b,c) and p(b) within 3 SE (n=1, Q=0.1, 1e5 iterations)")
    res = run_sqkd(ProtocolConfig(1, seed=12345, iterations=100_000), weyl_dilation_attack(1, 0.1))
    st = res.stats
    total = st.key_counts.sum()
    p = _reference_pabc(2, 0.1)
    se = np.sqrt(total * p * (1 - p))
    assert np.all(np.abs(st.key_counts - total * p) <= 3 * se)
    nb = st.b_counts.sum()
    assert np.all(np.abs(st.b_counts - nb / 2) <= 3 * np.sqrt(nb * 0.25))


def test_ac7_uncertainty_and_continuity(record_property):
    record_property("criterion", "AC7 uncertainty relation on 200 states and continuity bound on all rho/mu pairs")
    rng = np.random.default_rng(77)
    for k in range(200):
        n = 1 + k % 2
        N = 2**n
        lay = RegisterLayout.of(A=N, B=int(rng.integers(2, 5)), E=int(rng.integers(2, 5)))
        rho = random_state(lay, rng).to_density()
        h_ze = conditional_entropy(measure_register(rho, "A", BasisSpec(Z, n)), "A", {"E"})
        h_fb = conditional_entropy(measure_register(rho, "A", BasisSpec(F, n)), "A", {"B"})
        assert h_ze + h_fb >= n - 1e-7

    attacks = []
    for n in (1, 2):
        for Q in (0.02, 0.1, 0.25):
            attacks += [weyl_dilation_attack(n, Q), measure_resend_attack(n, Q)]
        attacks += [random_attack(n, rng) for _ in range(5)]
    for attack in attacks:
        ex = exact_analysis(attack)
        gap = abs(ex.h_a_e_rho - ex.h_a_e_mu)
        assert gap <= ka.continuity_penalty(attack.n, ex.delta_hat) + 1e-9


def test_ac8_cli_byte_identical(record_property, tmp_path):
    record_property("criterion", "AC8 identical CLI invocations give byte-identical output")
    runs = [
        ["sweep", "--n", "1,2,5,50", "--q", "0:0.35:0.005", "--scenario", "independent"],
        ["sweep", "--n", "3", "--format", "json"],
        ["tolerance", "--n", "1,50", "--scenario", "dependent"],
        ["simulate", "--n", "1", "--attack", "weyl", "--q", "0.1", "--iters", "5000", "--seed", "7"],
        ["verify", "--attack", "random", "--n", "1", "--count", "3", "--seed", "2"],
    ]
    for i, argv in enumerate(runs):
        outs = []
        for j in range(2):
            path = tmp_path / f"{i}-{j}"
            assert main(argv + ["--output", str(path)]) == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]
