"""Dense state-vector primitives for chains of qudits.

Basis encoding is big-endian base ``d``: site 0 is the most significant digit,
so the basis index of ``|s_0 s_1 ... s_{N-1}>`` is ``sum_j s_j d**(N-1-j)``.
Every module in the package relies on this convention.

Gates act on arrays whose leading axis is the ``d**N`` basis index. Any
trailing axes are treated as a batch, which lets the same kernels evolve
several states at once or act on the columns of an operator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "StateVector",
    "new_basis_state",
    "basis_index",
    "basis_digits",
    "apply_gate_array",
    "apply_layer_array",
    "apply_two_site_gate",
    "apply_layer",
    "layer_sites",
    "inner_product",
    "partial_trace_half",
    "partial_trace_half_array",
    "von_neumann_entropy",
    "sample_haar_state",
    "sample_haar_states",
    "sample_haar_state_in_subspace",
    "sample_haar_unitary",
    "is_unitary",
]

ENTROPY_EIGENVALUE_FLOOR = 1e-12


@dataclass(frozen=True)
class StateVector:
    """Pure state of ``n_sites`` qudits of local dimension ``local_dim``."""

    n_sites: int
    local_dim: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.local_dim < 2:
            raise ValueError(f"local_dim must be >= 2, got {self.local_dim}")
        if self.n_sites < 1:
            raise ValueError(f"n_sites must be >= 1, got {self.n_sites}")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.local_dim**self.n_sites,):
            raise ValueError(
                f"expected {self.local_dim**self.n_sites} amplitudes, got shape {amps.shape}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def with_amplitudes(self, amplitudes: np.ndarray) -> "StateVector":
        return StateVector(self.n_sites, self.local_dim, amplitudes)


def basis_index(digits: Sequence[int], local_dim: int) -> int:
    """Big-endian base-``local_dim`` index of a product of computational levels."""
    idx = 0
    for s in digits:
        s = int(s)
        if not 0 <= s < local_dim:
            raise ValueError(f"digit {s} outside [0, {local_dim})")
        idx = idx * local_dim + s
    return idx


def basis_digits(index: int, n_sites: int, local_dim: int) -> tuple[int, ...]:
    if not 0 <= index < local_dim**n_sites:
        raise ValueError(f"index {index} outside [0, {local_dim**n_sites})")
    out = []
    for _ in range(n_sites):
        index, r = divmod(index, local_dim)
        out.append(r)
    return tuple(reversed(out))


def new_basis_state(
    n_sites: int,
    local_dim: int,
    digits: Sequence[int] | None = None,
    plus: bool | Sequence[bool] = False,
) -> StateVector:
    """Product state with each site in a computational level or in ``|+>``.

    ``plus`` may be a single flag (all sites) or one flag per site; a flagged
    site is put in the uniform superposition over its ``local_dim`` levels and
    its entry in ``digits`` is ignored.

    >>> new_basis_state(4, 3, [1, 1, 1, 1]).amplitudes.argmax()
    40
    """
    if local_dim < 2:
        raise ValueError(f"local_dim must be >= 2, got {local_dim}")
    if isinstance(plus, (bool, np.bool_)):
        plus = [bool(plus)] * n_sites
    plus = list(plus)
    if len(plus) != n_sites:
        raise ValueError("need one plus flag per site")
    if digits is None:
        digits = [0] * n_sites
    digits = list(digits)
    if len(digits) != n_sites:
        raise ValueError(f"need {n_sites} digits, got {len(digits)}")
    psi = np.ones(1, dtype=complex)
    for s, p in zip(digits, plus):
        site = np.zeros(local_dim, dtype=complex)
        if p:
            site[:] = 1.0 / np.sqrt(local_dim)
        else:
            s = int(s)
            if not 0 <= s < local_dim:
                raise ValueError(f"digit {s} outside [0, {local_dim})")
            site[s] = 1.0
        # product-state construction only; gates never use Kronecker expansion
        psi = np.kron(psi, site)
    return StateVector(n_sites, local_dim, psi)


def _check_gate(gate: np.ndarray, local_dim: int) -> np.ndarray:
    gate = np.asarray(gate)
    if gate.shape != (local_dim**2, local_dim**2):
        raise ValueError(
            f"gate of shape {gate.shape} does not act on two sites of dimension {local_dim}"
        )
    return gate


def apply_gate_array(
    psi: np.ndarray, gate: np.ndarray, left_site: int, n_sites: int, local_dim: int
) -> np.ndarray:
    """Apply a two-site gate on sites ``(left_site, left_site + 1)``.

    ``psi`` has shape ``(d**N, *batch)``. The contraction touches only the
    two-site sub-index, so the cost is ``O(D d**2)`` per batch element.
    """
    d = local_dim
    gate = _check_gate(gate, d)
    if not 0 <= left_site < n_sites - 1:
        raise IndexError(f"left_site {left_site} invalid for {n_sites} sites")
    psi = np.asarray(psi)
    if psi.shape[0] != d**n_sites:
        raise ValueError(f"state dimension {psi.shape[0]} != {d}**{n_sites}")
    batch = psi.shape[1:]
    left = d**left_site
    right = d ** (n_sites - left_site - 2)
    view = psi.reshape(left, d * d, right, -1)
    out = np.moveaxis(np.tensordot(gate, view, axes=([1], [1])), 0, 1)
    return out.reshape((d**n_sites,) + batch)


def layer_sites(n_sites: int, parity: str) -> list[int]:
    """Left sites covered by an even or odd brickwork layer (open chain)."""
    if parity == "even":
        start = 0
    elif parity == "odd":
        start = 1
    else:
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    return list(range(start, n_sites - 1, 2))


def apply_layer_array(
    psi: np.ndarray, gate: np.ndarray, parity: str, n_sites: int, local_dim: int
) -> np.ndarray:
    for site in layer_sites(n_sites, parity):
        psi = apply_gate_array(psi, gate, site, n_sites, local_dim)
    return psi


def apply_two_site_gate(state: StateVector, gate: np.ndarray, left_site: int) -> StateVector:
    out = apply_gate_array(state.amplitudes, gate, left_site, state.n_sites, state.local_dim)
    return state.with_amplitudes(out)


def apply_layer(state: StateVector, gate: np.ndarray, parity: str) -> StateVector:
    """Apply ``gate`` on every bond of the even or odd sublattice.

    Even parity covers bonds ``(0,1), (2,3), ...``; odd parity covers
    ``(1,2), (3,4), ...``. Sites not covered by a bond are left untouched.
    """
    out = apply_layer_array(state.amplitudes, gate, parity, state.n_sites, state.local_dim)
    return state.with_amplitudes(out)


def inner_product(a: StateVector | np.ndarray, b: StateVector | np.ndarray) -> complex:
    """``<a|b>``, conjugating ``a``."""
    va = a.amplitudes if isinstance(a, StateVector) else np.asarray(a)
    vb = b.amplitudes if isinstance(b, StateVector) else np.asarray(b)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    return complex(np.vdot(va, vb))


def partial_trace_half_array(psi: np.ndarray, n_sites: int, local_dim: int) -> np.ndarray:
    """Reduced density matrix of the last ``N/2`` sites of a pure state."""
    if n_sites % 2:
        raise ValueError(f"partial_trace_half needs an even number of sites, got {n_sites}")
    half = local_dim ** (n_sites // 2)
    m = np.asarray(psi).reshape(half, half)
    # rho_B[b, b'] = sum_a psi[a, b] conj(psi[a, b'])
    return m.T @ m.conj()


def partial_trace_half(state: StateVector) -> np.ndarray:
    return partial_trace_half_array(state.amplitudes, state.n_sites, state.local_dim)


def von_neumann_entropy(rho: np.ndarray, atol: float = 1e-12) -> float:
    """Entropy ``-Tr rho ln rho`` in nats.

    Eigenvalues below ``1e-12`` are dropped (``x ln x -> 0``).
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > atol:
        raise ValueError("density matrix is not Hermitian")
    lam = np.linalg.eigvalsh(rho)
    lam = lam[lam > ENTROPY_EIGENVALUE_FLOOR]
    return float(max(0.0, -np.sum(lam * np.log(lam))))


def sample_haar_states(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` Haar-random unit vectors as rows of a ``(count, dim)`` array."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z


def sample_haar_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    return sample_haar_states(1, dim, rng)[0]


def sample_haar_state_in_subspace(
    basis_indices: Iterable[int], dim: int, rng: np.random.Generator
) -> np.ndarray:
    """Haar state on the span of some computational basis vectors, embedded in ``C^dim``."""
    idx = np.asarray(list(basis_indices), dtype=np.int64)
    if idx.size == 0:
        raise ValueError("basis index set is empty")
    if np.unique(idx).size != idx.size:
        raise ValueError("duplicate basis indices")
    if idx.min() < 0 or idx.max() >= dim:
        raise ValueError(f"basis indices must lie in [0, {dim})")
    psi = np.zeros(dim, dtype=complex)
    psi[idx] = sample_haar_state(idx.size, rng)
    return psi


def sample_haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a Ginibre matrix.

    The phases of ``R``'s diagonal are pushed back into ``Q``; without this
    correction the output depends on the QR gauge and is not Haar.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def is_unitary(u: np.ndarray, atol: float = 1e-12) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) < atol)
