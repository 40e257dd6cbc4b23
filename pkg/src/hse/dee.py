"""Discretised ensemble entropy: binned KL comparison of temporal and Haar ensembles.

Hilbert space is coarse-grained into the Voronoi cells of ``M'`` Haar-random
reference states (largest overlap wins). Temporal states and fresh Haar states
are binned into those cells and the DEE is minus the KL divergence
``-sum_j p_T[j] log2(p_T[j] / p_H[j])``. A Haar bin can be empty at finite
sample size, so one pseudo-count is added to every Haar bin; the temporal
histogram is left raw.

Each reference set draws its own Haar comparison states, which only tightens
the estimate relative to sharing one comparison sample across sets.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import CircuitModel
from .qudit import sample_haar_states

__all__ = [
    "ReferenceSet",
    "BinHistogram",
    "DeeResult",
    "filter_reference_states",
    "build_reference_set",
    "assign_bins",
    "bin_states",
    "dee",
    "run_dee_experiment",
]

HAAR_PSEUDO_COUNT = 1.0


@dataclass(frozen=True)
class ReferenceSet:
    dim: int
    states: np.ndarray  # (M', D)
    epsilon: float
    requested: int

    @property
    def size(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class BinHistogram:
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def filter_reference_states(states: np.ndarray, epsilon: float) -> np.ndarray:
    """Greedily drop any state whose overlap with an already kept one exceeds ``1 - epsilon``."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must lie in [0, 1)")
    states = np.asarray(states, dtype=complex)
    ov = np.abs(states.conj() @ states.T)
    np.fill_diagonal(ov, 0.0)
    close = ov > 1.0 - epsilon
    if not close.any():
        return states
    keep = np.ones(states.shape[0], dtype=bool)
    for j in range(states.shape[0]):
        if keep[j] and np.any(close[j, :j] & keep[:j]):
            keep[j] = False
    return states[keep]


def build_reference_set(count: int, epsilon: float, dim: int, rng: np.random.Generator) -> ReferenceSet:
    if count < 2:
        raise ValueError("need at least two reference states")
    kept = filter_reference_states(sample_haar_states(count, dim, rng), epsilon)
    if kept.shape[0] < 2:
        raise ValueError(f"only {kept.shape[0]} reference state(s) survive filtering; lower epsilon")
    return ReferenceSet(dim, kept, float(epsilon), count)


def assign_bins(states: np.ndarray, refs: ReferenceSet, block: int = 2048) -> np.ndarray:
    """Index of the reference state with largest overlap, per row; ties go to the lowest index."""
    states = np.atleast_2d(np.asarray(states, dtype=complex))
    if states.shape[1] != refs.dim:
        raise ValueError(f"state dimension {states.shape[1]} != reference dimension {refs.dim}")
    out = np.empty(states.shape[0], dtype=np.int64)
    ref_conj = refs.states.conj().T
    for a in range(0, states.shape[0], block):
        ov = np.abs(states[a : a + block] @ ref_conj)
        out[a : a + block] = np.argmax(ov, axis=1)
    return out


def bin_states(states, refs: ReferenceSet) -> BinHistogram:
    return BinHistogram(np.bincount(assign_bins(states, refs), minlength=refs.size))


def dee(temporal: BinHistogram, haar: BinHistogram, pseudo_count: float = HAAR_PSEUDO_COUNT) -> float:
    """``-sum_j p_T log2(p_T / p_H)`` with ``p_H`` smoothed by ``pseudo_count`` per bin."""
    t = np.asarray(temporal.counts, dtype=float)
    h = np.asarray(haar.counts, dtype=float) + pseudo_count
    if t.shape != h.shape:
        raise ValueError("histograms have different numbers of bins")
    if t.sum() <= 0:
        raise ValueError("temporal histogram is empty")
    if h.sum() <= 0:
        raise ValueError("Haar histogram is empty")
    p_t = t / t.sum()
    p_h = h / h.sum()
    nz = p_t > 0
    return float(-np.sum(p_t[nz] * np.log2(p_t[nz] / p_h[nz])))


@dataclass
class DeeResult:
    checkpoints: np.ndarray
    values: np.ndarray  # (repeats, checkpoints)
    m_prime: np.ndarray  # (repeats,)
    epsilon: float
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def minimum(self) -> np.ndarray:
        return self.values.min(axis=0)

    @property
    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    @property
    def maximum(self) -> np.ndarray:
        return self.values.max(axis=0)


def _prefix_histograms(bins: np.ndarray, checkpoints: np.ndarray, size: int) -> list[BinHistogram]:
    counts = np.zeros(size, dtype=np.int64)
    out, done = [], 0
    for stop in checkpoints:
        counts += np.bincount(bins[done:stop], minlength=size)
        done = stop
        out.append(BinHistogram(counts.copy()))
    return out


def run_dee_experiment(
    circuit: CircuitModel,
    initial,
    horizon: int,
    count: int,
    epsilon: float,
    repeats: int,
    rng: np.random.Generator,
    subspace=None,
    checkpoints=None,
    temporal_states: np.ndarray | None = None,
) -> DeeResult:
    """DEE of the temporal ensemble ``psi(0..T-1)`` at each checkpoint ``T``.

    Every repetition draws a fresh reference set and ``horizon`` fresh Haar
    states; the first ``T`` of each sequence enter the histograms at
    checkpoint ``T``. With ``subspace`` the Haar comparison states are drawn
    inside that span, while the bins stay full-space. ``subspace`` is either
    a 1-D array of basis indices or a ``(D, D')`` isometry whose columns span
    the subspace.
    """
    if checkpoints is None:
        checkpoints = np.array([horizon])
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    if checkpoints.min() < 1 or checkpoints.max() > horizon or np.any(np.diff(checkpoints) <= 0):
        raise ValueError("checkpoints must be strictly increasing within [1, horizon]")
    if temporal_states is None:
        temporal_states = circuit.evolve(initial, horizon)
    dim = temporal_states.shape[1]
    support = None if subspace is None else np.asarray(subspace)
    if support is not None and support.ndim == 2 and support.shape[0] != dim:
        raise ValueError(f"isometry has {support.shape[0]} rows, states have dimension {dim}")
    values = np.empty((repeats, checkpoints.size))
    m_prime = np.empty(repeats, dtype=np.int64)
    for r, child in enumerate(rng.spawn(repeats)):
        refs = build_reference_set(count, epsilon, dim, child)
        m_prime[r] = refs.size
        if support is None:
            haar = sample_haar_states(horizon, dim, child)
        elif support.ndim == 2:
            haar = sample_haar_states(horizon, support.shape[1], child) @ support.T
        else:
            haar = np.zeros((horizon, dim), dtype=complex)
            haar[:, support.astype(np.int64)] = sample_haar_states(horizon, support.size, child)
        t_hists = _prefix_histograms(assign_bins(temporal_states, refs), checkpoints, refs.size)
        h_hists = _prefix_histograms(assign_bins(haar, refs), checkpoints, refs.size)
        values[r] = [dee(a, b) for a, b in zip(t_hists, h_hists)]
    return DeeResult(checkpoints, values, m_prime, float(epsilon))
