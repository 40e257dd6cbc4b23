"""Autocorrelators, half-chain entanglement and the Krylov report side by side.

    python demos/diagnostics_tour.py
"""
import json

import numpy as np

from hse import autocorrelator_series, bipartite_entropy_series, build_circuit, new_basis_state, page_entropy
from hse.diagnostics import local_observable
from hse.runner import krylov_report

rng = np.random.default_rng(5)
generic = build_circuit("generic", 4, 2, rng)
scar = build_circuit("scar", 4, 2, rng, "P1")
hsf = build_circuit("pair_flip", 4, 3, rng)

sz, s1 = local_observable("sigma_z", 2), local_observable("spin1_z", 3)
for name, circuit, obs in (("generic", generic, sz), ("scar", scar, sz), ("pair-flip d=3", hsf, s1)):
    a = autocorrelator_series(circuit, obs, 2, 500, normalize=True)
    print(f"{name:14s} A(t)/A(0): t=1 {a[1]:+.3f}   mean over t in [100, 500] {a[100:].mean():+.4f}")

print(f"\nPage value for N=4 qubits: {page_entropy(4, 2):.4f}")
for name, circuit, psi in (("generic |0000>", generic, new_basis_state(4, 2)),
                           ("scar |0000>", scar, new_basis_state(4, 2)),
                           ("scar |1111>", scar, new_basis_state(4, 2, [1, 1, 1, 1]))):
    s = bipartite_entropy_series(circuit, psi, 1000)
    print(f"{name:16s} late-time S_half = {s[500:].mean():.4f}")

print("\nKrylov report, N=6, d=3:")
print(json.dumps(krylov_report(6, 3), indent=1))
