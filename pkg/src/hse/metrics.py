"""Distances between temporal-ensemble moments and Haar moments.

The k-th temporal moment of ``psi_0..psi_{T-1}`` and the Haar moment on a
``D'``-dimensional space both live in the symmetric subspace of ``(C^D)^{⊗k}``.
Their squared Hilbert-Schmidt distance therefore collapses to

    Delta = S_k / T**2 - 1 / C(D' + k - 1, k),    S_k = sum_{t,t'} |<psi_t|psi_t'>|**(2k),

provided every state lies in the ``D'``-dimensional space (``D' = D`` for the
full Hilbert space). Only the overlap power sums ``S_k`` are ever accumulated;
the dense ``D**k x D**k`` matrices are kept for small sizes as a test oracle.

Two exact routes produce ``S_k`` for every prefix length:

* Gram route: overlaps of each new state with all earlier ones, ``O(T**2 D)``.
* Frame route: ``S_k = ||sum_t v_t v_t^dag||_F**2`` with ``v_t = psi_t^{⊗k}``
  stored in an isometric symmetric-subspace basis, ``O(T C(D+k-1,k)**2)``.

``power_sums`` picks the cheaper one.
"""
from __future__ import annotations

import functools
import itertools
import math
from typing import Sequence

import numpy as np

__all__ = [
    "DENSE_CAP",
    "sym_dim",
    "haar_moment_dense",
    "temporal_moment_dense",
    "hs_distance_sq",
    "TemporalEnsemble",
    "accumulate_state",
    "delta_gram",
    "delta_from_sums",
    "power_sums",
    "symmetric_power",
    "bound_B",
    "hs_lower_bound",
    "cross_haar_distance",
]

DENSE_CAP = 4096
FRAME_CAP = 1024  # largest symmetric-subspace dimension held as a dense frame operator


def sym_dim(dim: int, order: int) -> int:
    """Dimension ``C(D + k - 1, k)`` of the symmetric subspace of ``(C^D)^{⊗k}``."""
    if dim < 1 or order < 1:
        raise ValueError("need dim >= 1 and order >= 1")
    return math.comb(dim + order - 1, order)


def _permutation_operator(dim: int, perm: Sequence[int]) -> np.ndarray:
    k = len(perm)
    eye = np.eye(dim**k).reshape((dim,) * k + (dim**k,))
    return eye.transpose(tuple(perm) + (k,)).reshape(dim**k, dim**k)


def haar_moment_dense(dim: int, order: int, cap: int = DENSE_CAP) -> np.ndarray:
    """``sum_pi P_pi / (D (D+1) ... (D+k-1))`` as a dense matrix."""
    if dim**order > cap:
        raise ValueError(
            f"D**k = {dim**order} exceeds dense cap {cap}; use the overlap power sums instead"
        )
    total = sum(_permutation_operator(dim, p) for p in itertools.permutations(range(order)))
    return total / math.prod(dim + j for j in range(order))


def temporal_moment_dense(states, order: int, cap: int = DENSE_CAP) -> np.ndarray:
    states = np.atleast_2d(np.asarray(states, dtype=complex))
    if states.shape[0] == 0:
        raise ValueError("empty ensemble")
    dim = states.shape[1]
    if dim**order > cap:
        raise ValueError(f"D**k = {dim**order} exceeds dense cap {cap}")
    rho = np.zeros((dim**order, dim**order), dtype=complex)
    for psi in states:
        v = psi
        for _ in range(order - 1):
            v = np.kron(v, psi)
        rho += np.outer(v, v.conj())
    return rho / states.shape[0]


def hs_distance_sq(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.real(np.vdot(diff, diff)))


def bound_B(dim: int) -> float:
    """Trace-distance floor ``1/(D+1) - 1/sqrt(2D(D+1))`` for time-independent dynamics."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    return 1.0 / (dim + 1) - 1.0 / math.sqrt(2.0 * dim * (dim + 1))


def hs_lower_bound(dim: int) -> float:
    """Hilbert-Schmidt version ``4 B(D)**2 / D`` of the same floor."""
    return 4.0 * bound_B(dim) ** 2 / dim


def cross_haar_distance(dim: int, sub_dim: int, order: int) -> float:
    """Squared HS distance between the Haar moments of ``C^D`` and of a ``D'``-dim subspace."""
    if not 1 <= sub_dim <= dim:
        raise ValueError(f"need 1 <= sub_dim <= dim, got {sub_dim}, {dim}")
    return 1.0 / sym_dim(sub_dim, order) - 1.0 / sym_dim(dim, order)


def delta_from_sums(sums, counts, order: int, effective_dim: int):
    """``S_k / T**2 - 1 / C(D' + k - 1, k)``, elementwise."""
    counts = np.asarray(counts, dtype=float)
    return np.asarray(sums, dtype=float) / counts**2 - 1.0 / sym_dim(effective_dim, order)


class TemporalEnsemble:
    """Running overlap power sums ``S_1..S_kmax`` of a growing state sequence.

    States are retained (memory ``O(T D)``) so each new state can be overlapped
    with every earlier one.
    """

    def __init__(self, dim: int, k_max: int = 2):
        if dim < 1 or k_max < 1:
            raise ValueError("need dim >= 1 and k_max >= 1")
        self.dim = dim
        self.k_max = k_max
        self._states = np.empty((16, dim), dtype=complex)
        self.count = 0
        self.gram_power_sums = np.zeros(k_max)

    @property
    def states(self) -> np.ndarray:
        return self._states[: self.count]

    def accumulate(self, state) -> "TemporalEnsemble":
        psi = np.asarray(getattr(state, "amplitudes", state), dtype=complex)
        if psi.shape != (self.dim,):
            raise ValueError(f"state shape {psi.shape} != ({self.dim},)")
        orders = np.arange(1, self.k_max + 1)
        overlaps = np.abs(self.states.conj() @ psi) ** 2
        self_overlap = abs(np.vdot(psi, psi)) ** 2
        self.gram_power_sums += self_overlap**orders + 2 * np.sum(
            overlaps[:, None] ** orders[None, :], axis=0
        )
        if self.count == self._states.shape[0]:
            grown = np.empty((2 * self.count, self.dim), dtype=complex)
            grown[: self.count] = self._states
            self._states = grown
        self._states[self.count] = psi
        self.count += 1
        return self

    def extend(self, states) -> "TemporalEnsemble":
        for psi in states:
            self.accumulate(psi)
        return self

    def power_sum(self, order: int) -> float:
        if not 1 <= order <= self.k_max:
            raise ValueError(f"order {order} not tracked (k_max = {self.k_max})")
        return float(self.gram_power_sums[order - 1])

    def delta(self, order: int, effective_dim: int | None = None) -> float:
        return delta_gram(self, order, effective_dim)


def accumulate_state(ensemble: TemporalEnsemble, state) -> TemporalEnsemble:
    return ensemble.accumulate(state)


def delta_gram(ensemble: TemporalEnsemble, order: int, effective_dim: int | None = None) -> float:
    if ensemble.count == 0:
        raise ValueError("empty ensemble")
    d_eff = ensemble.dim if effective_dim is None else effective_dim
    return float(delta_from_sums(ensemble.power_sum(order), ensemble.count, order, d_eff))


@functools.lru_cache(maxsize=32)
def _symmetric_basis(dim: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    combos = np.array(list(itertools.combinations_with_replacement(range(dim), order)))
    weights = np.array(
        [
            math.sqrt(math.factorial(order) / math.prod(math.factorial(m) for m in np.unique(c, return_counts=True)[1]))
            for c in combos
        ]
    )
    return combos, weights


def symmetric_power(states: np.ndarray, order: int) -> np.ndarray:
    """Rows ``psi^{⊗k}`` expressed in an orthonormal basis of the symmetric subspace.

    Component for a multiset ``{i_1 <= ... <= i_k}`` with multiplicities ``m``
    is ``sqrt(k! / prod m!) * prod psi_i``; inner products match those of the
    full tensor powers: ``<v_a|v_b> = <psi_a|psi_b>**k``.
    """
    states = np.atleast_2d(states)
    if order == 1:
        return states
    combos, weights = _symmetric_basis(states.shape[1], order)
    out = states[:, combos[:, 0]] * weights
    for col in range(1, order):
        out *= states[:, combos[:, col]]
    return out


def _gram_route(states: np.ndarray, orders: Sequence[int], block: int) -> np.ndarray:
    n = states.shape[0]
    orders_arr = np.asarray(orders)
    rows = np.empty((n, len(orders)))
    conj = states.conj()
    for a in range(0, n, block):
        b = min(a + block, n)
        absq = np.abs(conj[a:b] @ states[:b].T) ** 2
        # row t keeps columns t' <= t: earlier ones count twice, the diagonal once
        cols = np.arange(b)[None, :]
        t = np.arange(a, b)[:, None]
        weight = np.where(cols < t, 2.0, np.where(cols == t, 1.0, 0.0))
        for j, k in enumerate(orders_arr):
            rows[a:b, j] = np.sum(weight * absq**k, axis=1)
    return np.cumsum(rows, axis=0)


def _frame_route(states: np.ndarray, order: int, block: int) -> np.ndarray:
    v = symmetric_power(states, order)
    n, m = v.shape
    frame = np.zeros((m, m), dtype=complex)
    rows = np.empty(n)
    for a in range(0, n, block):
        b = min(a + block, n)
        vb = v[a:b]
        cross = np.real(np.sum((vb.conj() @ frame) * vb, axis=1))
        absq = np.abs(vb.conj() @ vb.T) ** 2
        within = np.tril(absq, -1).sum(axis=1) * 2 + np.diagonal(absq)
        rows[a:b] = 2 * cross + within
        frame += vb.T @ vb.conj()
    return np.cumsum(rows)


def _frame_checkpoints(states: np.ndarray, order: int, checkpoints: np.ndarray, block: int) -> np.ndarray:
    # S_k(T) = ||sum_{t<T} v_t v_t^dag||_F^2, so only the frame itself is needed
    m = sym_dim(states.shape[1], order)
    frame = np.zeros((m, m), dtype=complex)
    out = np.empty(len(checkpoints))
    done = 0
    for c, stop in enumerate(checkpoints):
        for a in range(done, stop, block):
            vb = symmetric_power(states[a : min(a + block, stop)], order)
            frame += vb.T @ vb.conj()
        done = stop
        out[c] = np.real(np.vdot(frame, frame))
    return out


def _use_frame(route: str, dim: int, order: int, n: int) -> bool:
    if route not in ("auto", "gram", "frame"):
        raise ValueError(f"unknown route {route!r}")
    m = sym_dim(dim, order)
    if route == "frame":
        return True
    return route == "auto" and m <= FRAME_CAP and 2 * m * m < n * dim / 2


def power_sums(
    states,
    orders: Sequence[int] = (1, 2),
    checkpoints: Sequence[int] | None = None,
    block: int = 256,
    route: str = "auto",
) -> np.ndarray:
    """Prefix overlap power sums ``S_k`` of a state sequence.

    Without ``checkpoints`` row ``T - 1`` holds the sums over ``psi_0..psi_{T-1}``
    for every ``T``; with them, one row per requested prefix length.
    ``route`` is ``"gram"``, ``"frame"`` or ``"auto"``; all agree up to rounding.
    """
    states = np.atleast_2d(np.asarray(states, dtype=complex))
    n, dim = states.shape
    orders = [int(k) for k in orders]
    if checkpoints is not None:
        checkpoints = np.asarray(checkpoints, dtype=np.int64)
        if checkpoints.size and (checkpoints.min() < 1 or checkpoints.max() > n or np.any(np.diff(checkpoints) <= 0)):
            raise ValueError("checkpoints must be strictly increasing within [1, len(states)]")
    rows = n if checkpoints is None else len(checkpoints)
    out = np.empty((rows, len(orders)))
    gram_cols = []
    for j, k in enumerate(orders):
        if not _use_frame(route, dim, k, n):
            gram_cols.append(j)
        elif checkpoints is None:
            out[:, j] = _frame_route(states, k, block)
        else:
            out[:, j] = _frame_checkpoints(states, k, checkpoints, block)
    if gram_cols:
        full = _gram_route(states, [orders[j] for j in gram_cols], block)
        out[:, gram_cols] = full if checkpoints is None else full[checkpoints - 1]
    return out
