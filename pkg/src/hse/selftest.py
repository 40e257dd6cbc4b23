"""Fast oracle-equivalence checks: every optimised path against a dense reference."""
from __future__ import annotations

import numpy as np

from .fibonacci import fibonacci_word, schedule
from .krylov import count_sectors_formula, frozen_state_count, largest_sector_formula, pair_flip_components
from .metrics import TemporalEnsemble, haar_moment_dense, hs_distance_sq, power_sums, temporal_moment_dense
from .models import build_circuit
from .qudit import apply_gate_array, sample_haar_states, sample_haar_unitary

__all__ = ["run_selftest"]


def _check_delta_gram(rng):
    worst = 0.0
    for dim in range(2, 7):
        for k in (1, 2, 3):
            states = sample_haar_states(int(rng.integers(1, 30)), dim, rng)
            ens = TemporalEnsemble(dim, k_max=k).extend(states)
            dense = hs_distance_sq(temporal_moment_dense(states, k), haar_moment_dense(dim, k))
            worst = max(worst, abs(ens.delta(k) - dense))
    return worst < 1e-10, f"max |gram - dense| = {worst:.2e}"


def _check_routes(rng):
    states = sample_haar_states(200, 5, rng)
    a = power_sums(states, (1, 2), route="gram")
    b = power_sums(states, (1, 2), route="frame")
    err = float(np.max(np.abs(a - b) / a))
    return err < 1e-10, f"gram vs frame relative error {err:.2e}"


def _check_haar_22(rng):
    swap = np.eye(4)[[0, 2, 1, 3]]
    err = float(np.max(np.abs(haar_moment_dense(2, 2) - (np.eye(4) + swap) / 6)))
    return err < 1e-15, f"(I + SWAP)/6 deviation {err:.1e}"


def _check_gate(rng):
    n, d = 3, 3
    gate = sample_haar_unitary(d * d, rng)
    psi = sample_haar_states(1, d**n, rng)[0]
    worst = 0.0
    for left in range(n - 1):
        full = np.kron(np.kron(np.eye(d**left), gate), np.eye(d ** (n - left - 2)))
        worst = max(worst, float(np.max(np.abs(full @ psi - apply_gate_array(psi, gate, left, n, d)))))
    return worst < 1e-12, f"contraction vs Kronecker {worst:.1e}"


def _check_step(rng):
    circuit = build_circuit("generic", 4, 2, rng)
    u = circuit.step_matrix("A")
    err = float(np.max(np.abs(u.conj().T @ u - np.eye(16))))
    return err < 1e-12, f"step unitarity {err:.1e}"


def _check_fibonacci(rng):
    ok = fibonacci_word(5) == "01001010" and schedule(7).symbols == "ABAABAB"
    return ok, "W5 and the first seven letters"


def _check_krylov(rng):
    bad = []
    for d in (3, 4):
        for n in range(2, 6):
            if d**n > 5000:
                continue
            dec = pair_flip_components(n, d)
            want = [count_sectors_formula(n, d), frozen_state_count(n, d)]
            got = [len(dec.sectors), dec.dims.count(1)]
            if n % 2 == 0:
                want.append(largest_sector_formula(n, d))
                got.append(max(dec.dims))
            if want != got:
                bad.append((n, d))
    return not bad, "sector graph vs closed forms" + (f"; mismatch at {bad}" if bad else "")


CHECKS = [
    ("delta_gram vs dense moments", _check_delta_gram),
    ("power-sum routes agree", _check_routes),
    ("Haar moment D=2 k=2", _check_haar_22),
    ("gate contraction vs Kronecker", _check_gate),
    ("brickwork step unitary", _check_step),
    ("Fibonacci schedule", _check_fibonacci),
    ("Krylov sectors vs formulas", _check_krylov),
]


def run_selftest(seed: int = 0) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    return [(name, *check(rng)) for name, check in CHECKS]
