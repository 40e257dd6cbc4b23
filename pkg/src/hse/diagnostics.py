"""Infinite-temperature autocorrelators and half-chain entanglement."""
from __future__ import annotations

import math

import numpy as np

from .fibonacci import schedule
from .models import CircuitModel
from .qudit import partial_trace_half_array, von_neumann_entropy

__all__ = [
    "local_observable",
    "embed_site_operator",
    "autocorrelator_series",
    "heisenberg_operator",
    "bipartite_entropy_series",
    "page_entropy",
]

OPERATOR_DIM_CAP = 256


def local_observable(kind: str, local_dim: int) -> np.ndarray:
    """``sigma_z = diag(1, -1)`` for qubits; ``S^z = diag(1, 0, -1)`` for qutrits.

    Qutrit levels 0, 1, 2 carry spin labels +1, 0, -1.
    """
    if kind == "sigma_z":
        if local_dim != 2:
            raise ValueError("sigma_z needs local_dim = 2")
        return np.diag([1.0, -1.0]).astype(complex)
    if kind == "spin1_z":
        if local_dim != 3:
            raise ValueError("spin1_z needs local_dim = 3")
        return np.diag([1.0, 0.0, -1.0]).astype(complex)
    raise ValueError(f"unknown observable {kind!r}")


def embed_site_operator(op: np.ndarray, site: int, n_sites: int, local_dim: int) -> np.ndarray:
    if not 0 <= site < n_sites:
        raise IndexError(f"site {site} outside chain of {n_sites}")
    left = np.eye(local_dim**site)
    right = np.eye(local_dim ** (n_sites - site - 1))
    return np.kron(np.kron(left, op), right)


def autocorrelator_series(
    circuit: CircuitModel, obs: np.ndarray, site: int, horizon: int, normalize: bool = False
) -> np.ndarray:
    """``A(t) = Tr[O(t) O] / D`` for ``t = 0..horizon``.

    ``Tr[U^dag O U O] = Tr[O (U O U^dag)]``, so the embedded observable is
    pushed forward as ``U_t X U_t^dag`` gate by gate instead of rebuilding the
    Heisenberg product at every step.

    Parameters
    ----------
    normalize : bool
        Divide by ``A(0) = Tr(o^2) / d`` so that every series starts at 1.
        For ``S^z`` the raw value at ``t = 0`` is ``2/3``.
    """
    dim = circuit.dim
    if dim > OPERATOR_DIM_CAP:
        raise ValueError(f"operator evolution capped at D = {OPERATOR_DIM_CAP}, got {dim}")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    o = embed_site_operator(obs, site, circuit.n_sites, circuit.local_dim).astype(complex)

    def trace_with(x):
        value = np.vdot(o, x) / dim  # Tr[O X] with O Hermitian
        if abs(value.imag) > 1e-10:
            raise ArithmeticError(f"autocorrelator picked up an imaginary part {value.imag:.3e}")
        return value.real

    x = o
    out = np.empty(horizon + 1)
    out[0] = trace_with(x)
    for t, label in enumerate(schedule(horizon).symbols, start=1):
        # X -> U X U^dag: gates act on the row index, then on the column index
        x = circuit.apply_step(x, label)
        x = circuit.apply_step(x.conj().T, label).conj().T
        out[t] = trace_with(x)
    if normalize:
        if out[0] <= 0:
            raise ValueError("observable has zero norm; cannot normalise")
        out /= out[0]
    return out


def heisenberg_operator(circuit: CircuitModel, op: np.ndarray, t: int) -> np.ndarray:
    """``U(t)^dag O U(t)`` for a full ``D x D`` operator, by two-sided gate contraction.

    ``U(t) = V_t ... V_1``, so the latest step sits innermost and is applied first.
    """
    if circuit.dim > OPERATOR_DIM_CAP:
        raise ValueError(f"operator evolution capped at D = {OPERATOR_DIM_CAP}, got {circuit.dim}")
    x = np.asarray(op, dtype=complex)
    for label in reversed(schedule(t).symbols):
        x = circuit.apply_step_inverse(x, label)  # V^dag X
        x = circuit.apply_step_inverse(x.conj().T, label).conj().T  # (V^dag X) V
    return x


def bipartite_entropy_series(circuit: CircuitModel, initial, horizon: int, times=None) -> np.ndarray:
    """Half-chain entanglement entropy (nats) of ``psi(t)``, ``t = 0..horizon``.

    ``times`` restricts the output to selected steps.
    """
    if circuit.n_sites % 2:
        raise ValueError("half-chain entropy needs an even number of sites")
    wanted = None if times is None else set(int(t) for t in times)
    out = []
    for t, psi in enumerate(circuit.iter_states(initial, horizon + 1)):
        if wanted is None or t in wanted:
            rho = partial_trace_half_array(psi, circuit.n_sites, circuit.local_dim)
            out.append(von_neumann_entropy(rho))
    return np.asarray(out)


def page_entropy(n_sites: int, local_dim: int) -> float:
    """``N/2 ln d - 1/2``."""
    if n_sites % 2:
        raise ValueError("needs an even number of sites")
    return 0.5 * n_sites * math.log(local_dim) - 0.5
