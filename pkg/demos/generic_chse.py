"""How fast does one Fibonacci-driven brickwork circuit approach Haar moments?

Runs a single generic N=4 qubit circuit from |0000> and prints the moment
distances Delta^(1), Delta^(2) on a log grid, the fitted log-log slopes, and
where Delta^(2) meets the floor 4B(D)^2/D that time-independent dynamics
cannot go below.

    python demos/generic_chse.py
"""
import numpy as np

from hse import build_circuit, checkpoint_grid, hs_lower_bound, new_basis_state, power_sums
from hse.metrics import delta_from_sums

N, D_LOCAL, HORIZON = 4, 2, 20_000

rng = np.random.default_rng(7)
circuit = build_circuit("generic", N, D_LOCAL, rng)
states = circuit.evolve(new_basis_state(N, D_LOCAL), HORIZON)

grid = np.array(checkpoint_grid(HORIZON, per_decade=5))
sums = power_sums(states, (1, 2), checkpoints=grid)
d1 = delta_from_sums(sums[:, 0], grid, 1, circuit.dim)
d2 = delta_from_sums(sums[:, 1], grid, 2, circuit.dim)
floor = hs_lower_bound(circuit.dim)

print(f"{'T':>7} {'Delta1':>10} {'Delta2':>10}  Delta2/floor")
for T, a, b in zip(grid, d1, d2):
    print(f"{T:>7d} {a:10.3e} {b:10.3e}  {b / floor:8.3f}")

window = (grid >= 100) & (grid <= 10_000)
for name, vals in (("Delta1", d1), ("Delta2", d2)):
    slope = np.polyfit(np.log10(grid[window]), np.log10(vals[window]), 1)[0]
    print(f"{name} slope over [1e2, 1e4]: {slope:.3f}")

below = grid[d2 <= floor]
print("Delta2 first below 4B^2/D at T =", below[0] if below.size else "not reached")
