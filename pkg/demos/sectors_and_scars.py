"""Constrained dynamics: scars, fragmented sectors and a conserved charge.

Each case evolves basis states for 10^4 steps and compares the full-space
distance Delta^(1) with the value it must saturate at when the dynamics is
confined to a D'-dimensional subspace, 1/D' - 1/D.

    python demos/sectors_and_scars.py
"""
import numpy as np

from hse import build_circuit, cross_haar_distance, pair_flip_components, power_sums, scar_projector, scar_subspace
from hse.metrics import delta_from_sums

T = 10_000
rng = np.random.default_rng(11)


def delta1(circuit, index):
    psi = np.zeros(circuit.dim, complex)
    psi[index] = 1.0
    states = circuit.evolve(psi, T)
    s = power_sums(states, (1,), checkpoints=[T])[0, 0]
    return float(delta_from_sums(s, T, 1, circuit.dim))


print("-- single scar, N=4 qubits, P1 projector")
scar = build_circuit("scar", 4, 2, rng, "P1")
basis = scar_subspace(scar_projector("P1", 2), 4)
print("scar subspace dimension:", basis.shape[1])
for label in ("0000", "1111"):
    got = delta1(scar, int(label, 2))
    sub = 1 if label == "0000" else 15
    print(f"|{label}>  Delta1 = {got:.4e}   1/D' - 1/D = {cross_haar_distance(16, sub, 1):.4e}")

print("\n-- pair-flip fragmentation, N=4 qutrits")
dec = pair_flip_components(4, 3)
print("sector histogram:", dec.dimension_histogram())
hsf = build_circuit("pair_flip", 4, 3, rng)
for label in ("0120", "0012", "0000"):
    idx = int(label, 3)
    sub = len(dec.sector_containing(idx))
    print(f"|{label}>  D'={sub:2d}  Delta1 = {delta1(hsf, idx):.4e}   target {cross_haar_distance(81, sub, 1):.4e}")

print("\n-- pair-flip with qubits: staggered magnetisation sectors")
dec2 = pair_flip_components(4, 2)
sym = build_circuit("pair_flip", 4, 2, rng)
for sector, m in zip(dec2.sectors, dec2.labels):
    idx = int(sector[0])
    print(f"m={m:+d}  D'={len(sector)}  Delta1 = {delta1(sym, idx):.4e}   "
          f"target {cross_haar_distance(16, len(sector), 1):.4e}")
