"""Discretised ensemble entropy for an ergodic and a fragmented circuit.

A DEE near zero means the temporal ensemble fills the coarse-grained Hilbert
space like Haar states do. A start confined to a small sector stays well
below zero. Reduced sizes (M=300 references, 5 repetitions) keep this quick.

    python demos/dee_comparison.py
"""
import numpy as np

from hse import build_circuit, new_basis_state, run_dee_experiment

HORIZON = 5000
checkpoints = [50, 500, HORIZON]
seq = np.random.SeedSequence(3)
circ_seq, est_seq = seq.spawn(2)

cases = {
    "generic |0000>": (build_circuit("generic", 4, 2, np.random.default_rng(circ_seq)), new_basis_state(4, 2)),
    "pair-flip |0000>, d=3": (build_circuit("pair_flip", 4, 3, np.random.default_rng(circ_seq)), new_basis_state(4, 3)),
}
for (name, (circuit, psi)), rng_seq in zip(cases.items(), est_seq.spawn(len(cases))):
    res = run_dee_experiment(circuit, psi, HORIZON, 300, 0.1, 5, np.random.default_rng(rng_seq), checkpoints=checkpoints)
    cells = "  ".join(f"T={T}: {m:+.3f}" for T, m in zip(res.checkpoints, res.mean))
    print(f"{name:24s} M'={res.m_prime.min()}  {cells}")
