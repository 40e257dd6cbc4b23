"""Local bricks for the four circuit families and the brickwork drive built from them.

Families
--------
generic
    ``U = exp(-i H)`` with ``H`` a random Hermitian matrix.
scar
    ``U = exp(+i P H P)`` for a two-site projector ``P``; every state killed
    by ``P`` on all bonds is a fixed point of the whole circuit.
pair_flip
    Haar block on ``span{|aa>}`` plus random phases on ``|ab>``, ``a != b``.
    For ``d >= 3`` this fragments the Hilbert space; for ``d = 2`` it only
    conserves the staggered magnetisation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .fibonacci import schedule
from .qudit import StateVector, apply_gate_array, apply_layer_array, sample_haar_unitary

__all__ = [
    "FAMILIES",
    "PROJECTOR_KINDS",
    "CircuitModel",
    "random_hermitian",
    "unitary_from_generator",
    "scar_projector",
    "scar_embedded_gate",
    "bond_operator",
    "scar_subspace",
    "scar_dimension",
    "pair_flip_gate",
    "build_circuit",
]

FAMILIES = ("generic", "scar", "pair_flip")
PROJECTOR_KINDS = ("P1", "P2", "Pexp", "Plin")
BRICK_ORDER = (("A", "even"), ("A", "odd"), ("B", "even"), ("B", "odd"))

NULL_SPACE_RTOL = 1e-9
DENSE_CAP = 4096


def random_hermitian(dim: int, rng: np.random.Generator, method: str = "upper") -> np.ndarray:
    """Random Hermitian generator with entries built from uniform ``[0, 1)`` draws.

    ``method="upper"`` draws the independent entries of ``H`` directly: real and
    imaginary parts of each above-diagonal element and the (real) diagonal are
    uniform on ``[0, 1)``, the rest follows by conjugation.
    ``method="symmetrized"`` returns ``(G + G^dag) / 2`` for a matrix ``G``
    whose real and imaginary parts are all uniform; its entries are then
    averages of two uniforms and the spectrum is narrower.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if method == "upper":
        iu = np.triu_indices(dim, 1)
        h = np.zeros((dim, dim), dtype=complex)
        h[iu] = rng.random(iu[0].size) + 1j * rng.random(iu[0].size)
        h += h.conj().T
        h[np.diag_indices(dim)] = rng.random(dim)
        return h
    if method == "symmetrized":
        g = rng.random((dim, dim)) + 1j * rng.random((dim, dim))
        return (g + g.conj().T) / 2
    raise ValueError(f"unknown method {method!r}")


def unitary_from_generator(h: np.ndarray, sign: int = -1) -> np.ndarray:
    """``exp(i * sign * H)`` through the eigendecomposition of ``H``."""
    h = np.asarray(h, dtype=complex)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-10:
        raise ValueError("generator is not Hermitian")
    lam, v = np.linalg.eigh(h)
    return (v * np.exp(1j * sign * lam)) @ v.conj().T


def _ket(d: int, a: int, b: int) -> np.ndarray:
    v = np.zeros(d * d, dtype=complex)
    v[a * d + b] = 1.0
    return v


def scar_projector(kind: str, local_dim: int) -> np.ndarray:
    """Two-site projector whose kernel holds the protected pair states.

    ``P1`` removes ``|00>``; ``P2`` also removes ``|11>``; ``Pexp`` removes the
    whole qubit block ``{|00>, |01>, |10>, |11>}``; ``Plin`` removes
    ``|00>, |11>`` and the normalised ``|+-> - |-+>`` (which is proportional
    to ``|10> - |01>``).
    """
    d = local_dim
    if kind not in PROJECTOR_KINDS:
        raise ValueError(f"unknown projector kind {kind!r}; choose from {PROJECTOR_KINDS}")
    if d < 2:
        raise ValueError("local_dim must be >= 2")
    removed = [_ket(d, 0, 0)]
    if kind in ("P2", "Pexp", "Plin"):
        removed.append(_ket(d, 1, 1))
    if kind == "Pexp":
        removed += [_ket(d, 0, 1), _ket(d, 1, 0)]
    if kind == "Plin":
        plus = np.zeros(d, dtype=complex)
        minus = np.zeros(d, dtype=complex)
        plus[:2] = [1, 1]
        minus[:2] = [1, -1]
        phi = np.kron(plus, minus) - np.kron(minus, plus)
        removed.append(phi / np.linalg.norm(phi))
    p = np.eye(d * d, dtype=complex)
    for v in removed:
        p -= np.outer(v, v.conj())
    return p


def scar_embedded_gate(h: np.ndarray, projector: np.ndarray) -> np.ndarray:
    """``exp(i P H P)``; states annihilated by ``P`` are exact fixed points."""
    h = np.asarray(h)
    projector = np.asarray(projector)
    if h.shape != projector.shape:
        raise ValueError(f"generator {h.shape} and projector {projector.shape} differ")
    return unitary_from_generator(projector @ h @ projector, +1)


def bond_operator(op: np.ndarray, left_site: int, n_sites: int, local_dim: int) -> np.ndarray:
    """Dense ``D x D`` matrix of a two-site operator on one bond."""
    dim = local_dim**n_sites
    return apply_gate_array(np.eye(dim, dtype=complex), op, left_site, n_sites, local_dim)


def scar_subspace(projector: np.ndarray, n_sites: int, cap: int = DENSE_CAP) -> np.ndarray:
    """Orthonormal basis (columns) of the states annihilated by ``P`` on every bond."""
    if n_sites < 2:
        raise ValueError("need at least two sites")
    d = int(round(np.sqrt(projector.shape[0])))
    dim = d**n_sites
    if dim > cap:
        raise ValueError(f"Hilbert space dimension {dim} exceeds dense cap {cap}")
    total = sum(bond_operator(projector, n, n_sites, d) for n in range(n_sites - 1))
    lam, vecs = np.linalg.eigh(total)
    # the bond sum is PSD, so eigenvalues are its singular values
    null = lam < NULL_SPACE_RTOL * max(lam.max(), 1.0)
    return vecs[:, null]


def scar_dimension(projector: np.ndarray, n_sites: int, cap: int = DENSE_CAP) -> int:
    return scar_subspace(projector, n_sites, cap).shape[1]


def pair_flip_gate(local_dim: int, rng: np.random.Generator) -> np.ndarray:
    """Pair-flip brick: Haar ``U(d)`` on ``span{|aa>}``, random phases on ``|ab>``."""
    d = local_dim
    if d < 2:
        raise ValueError("local_dim must be >= 2")
    u = np.zeros((d * d, d * d), dtype=complex)
    diag = np.arange(d) * (d + 1)
    u[np.ix_(diag, diag)] = sample_haar_unitary(d, rng)
    phases = rng.uniform(0.0, 2 * np.pi, size=d * d)
    for a in range(d):
        for b in range(d):
            if a != b:
                u[a * d + b, a * d + b] = np.exp(1j * phases[a * d + b])
    return u


@dataclass
class CircuitModel:
    """Four bricks ``U_e^A, U_o^A, U_e^B, U_o^B`` on an open chain.

    One time step with label ``X`` applies ``U_o^X U_e^X``: the even layer first.
    """

    n_sites: int
    local_dim: int
    bricks: dict[tuple[str, str], np.ndarray]
    family: str = "generic"
    projector_kind: str | None = None
    _step_cache: dict[str, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.local_dim**self.n_sites

    def apply_step(self, psi: np.ndarray, label: str) -> np.ndarray:
        """Apply ``U_o^X U_e^X`` to an array with leading axis ``D`` by gate contraction."""
        psi = apply_layer_array(psi, self.bricks[label, "even"], "even", self.n_sites, self.local_dim)
        return apply_layer_array(psi, self.bricks[label, "odd"], "odd", self.n_sites, self.local_dim)

    def apply_step_inverse(self, psi: np.ndarray, label: str) -> np.ndarray:
        """Apply ``(U_o^X U_e^X)^dag = U_e^X^dag U_o^X^dag``."""
        psi = apply_layer_array(psi, self.bricks[label, "odd"].conj().T, "odd", self.n_sites, self.local_dim)
        return apply_layer_array(psi, self.bricks[label, "even"].conj().T, "even", self.n_sites, self.local_dim)

    def step_matrix(self, label: str) -> np.ndarray:
        """Dense ``D x D`` propagator of one step, assembled by acting on the identity.

        The product is replaced by its nearest unitary (polar factor), so that
        rounding in the bricks does not accumulate into norm drift over
        ``10**5`` steps.
        """
        if label not in self._step_cache:
            u = self.apply_step(np.eye(self.dim, dtype=complex), label)
            w, _, vh = np.linalg.svd(u)
            self._step_cache[label] = w @ vh
        return self._step_cache[label]

    def iter_states(self, initial, horizon: int) -> Iterator[np.ndarray]:
        """Yield ``psi(0), ..., psi(horizon - 1)``; ``initial`` may carry a trailing batch axis."""
        psi = initial.amplitudes if isinstance(initial, StateVector) else np.asarray(initial, dtype=complex)
        if psi.shape[0] != self.dim:
            raise ValueError(f"state dimension {psi.shape[0]} != {self.dim}")
        steps = {lab: self.step_matrix(lab) for lab in "AB"}
        labels = schedule(max(horizon - 1, 0)).symbols
        yield psi
        for lab in labels:
            psi = steps[lab] @ psi
            yield psi

    def evolve(self, initial, horizon: int) -> np.ndarray:
        """Temporal ensemble ``psi(0..horizon-1)`` stacked along axis 0.

        Single state in → ``(horizon, D)``; batch ``(D, B)`` in → ``(B, horizon, D)``.
        """
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        psi0 = initial.amplitudes if isinstance(initial, StateVector) else np.asarray(initial, dtype=complex)
        out = np.empty((horizon,) + psi0.shape, dtype=complex)
        for t, psi in enumerate(self.iter_states(psi0, horizon)):
            out[t] = psi
        if psi0.ndim == 1:
            return out
        return np.ascontiguousarray(np.moveaxis(out, 2, 0))


def build_circuit(
    family: str,
    n_sites: int,
    local_dim: int,
    rng: np.random.Generator,
    projector_kind: str = "P1",
) -> CircuitModel:
    """Draw the four bricks of one circuit instance, in the order eA, oA, eB, oB."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    if n_sites < 2:
        raise ValueError("need at least two sites")
    if local_dim < 2:
        raise ValueError("local_dim must be >= 2")
    bricks = {}
    if family == "scar":
        projector = scar_projector(projector_kind, local_dim)
    for key in BRICK_ORDER:
        if family == "generic":
            bricks[key] = unitary_from_generator(random_hermitian(local_dim**2, rng), -1)
        elif family == "scar":
            bricks[key] = scar_embedded_gate(random_hermitian(local_dim**2, rng), projector)
        else:
            bricks[key] = pair_flip_gate(local_dim, rng)
    return CircuitModel(
        n_sites,
        local_dim,
        bricks,
        family=family,
        projector_kind=projector_kind if family == "scar" else None,
    )
