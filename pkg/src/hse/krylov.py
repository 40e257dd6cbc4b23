"""Krylov sectors of the pair-flip circuit and closed-form sector counts.

Pair-flip bricks only mix ``|aa>`` with ``|bb>`` on a bond, with a dense block
in that equal-pair subspace, so two basis states share a sector exactly when a
chain of ``aa <-> bb`` replacements on bonds links them. Sectors are the
connected components of that graph.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .qudit import StateVector

__all__ = [
    "KrylovDecomposition",
    "pair_flip_components",
    "count_sectors_formula",
    "largest_sector_formula",
    "frozen_state_count",
    "commutant_dimension",
    "staggered_sector_label",
    "leakage",
]

SIZE_CAP = 10**6


@dataclass
class KrylovDecomposition:
    """Partition of the ``d**N`` basis indices into dynamically disconnected sectors.

    Sectors are sorted by their smallest basis index. For ``d = 2`` each sector
    also carries its staggered-magnetisation label.
    """

    n_sites: int
    local_dim: int
    sectors: list[np.ndarray]
    sector_of: np.ndarray
    labels: list[int] | None = None

    @property
    def dims(self) -> list[int]:
        return [len(s) for s in self.sectors]

    def sector_containing(self, index: int) -> np.ndarray:
        return self.sectors[int(self.sector_of[index])]

    def dimension_histogram(self) -> dict[int, int]:
        """``{sector dimension: number of sectors}``."""
        dims, counts = np.unique(self.dims, return_counts=True)
        return {int(a): int(b) for a, b in zip(dims, counts)}

    def to_json(self) -> str:
        payload = {
            "n_sites": self.n_sites,
            "local_dim": self.local_dim,
            "sectors": {str(i): s.tolist() for i, s in enumerate(self.sectors)},
        }
        if self.labels is not None:
            payload["staggered_magnetisation"] = {str(i): m for i, m in enumerate(self.labels)}
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "KrylovDecomposition":
        payload = json.loads(text)
        n, d = payload["n_sites"], payload["local_dim"]
        sectors = [np.asarray(payload["sectors"][str(i)], dtype=np.int64) for i in range(len(payload["sectors"]))]
        sector_of = np.empty(d**n, dtype=np.int64)
        for i, s in enumerate(sectors):
            sector_of[s] = i
        labels = payload.get("staggered_magnetisation")
        if labels is not None:
            labels = [labels[str(i)] for i in range(len(sectors))]
        return cls(n, d, sectors, sector_of, labels)


def _digits(n_sites: int, local_dim: int) -> np.ndarray:
    idx = np.arange(local_dim**n_sites)
    powers = local_dim ** np.arange(n_sites - 1, -1, -1)
    return (idx[:, None] // powers[None, :]) % local_dim


def pair_flip_components(n_sites: int, local_dim: int, cap: int = SIZE_CAP) -> KrylovDecomposition:
    d = local_dim
    if n_sites < 1 or d < 2:
        raise ValueError("need n_sites >= 1 and local_dim >= 2")
    dim = d**n_sites
    if dim > cap:
        raise ValueError(f"Hilbert space dimension {dim} exceeds cap {cap}")
    digits = _digits(n_sites, d)
    idx = np.arange(dim)
    src, dst = [], []
    # every bond is covered by the even or the odd layer; linking aa -> 00
    # at each bond connects all aa <-> bb flips
    for bond in range(n_sites - 1):
        a = digits[:, bond]
        equal = (a == digits[:, bond + 1]) & (a != 0)
        weight = d ** (n_sites - 2 - bond) * (d + 1)
        src.append(idx[equal])
        dst.append(idx[equal] - a[equal] * weight)
    src = np.concatenate(src) if src else np.empty(0, dtype=np.int64)
    dst = np.concatenate(dst) if dst else np.empty(0, dtype=np.int64)
    graph = coo_matrix((np.ones(src.size), (src, dst)), shape=(dim, dim))
    _, raw = connected_components(graph, directed=False)
    # relabel by smallest member so ids do not depend on the graph library
    first = np.full(raw.max() + 1, dim, dtype=np.int64)
    np.minimum.at(first, raw, idx)
    order = np.argsort(first)
    relabel = np.empty_like(order)
    relabel[order] = np.arange(order.size)
    sector_of = relabel[raw]
    sort = np.argsort(sector_of, kind="stable")
    bounds = np.flatnonzero(np.diff(sector_of[sort])) + 1
    sectors = np.split(idx[sort], bounds)
    labels = None
    if d == 2:
        labels = [staggered_sector_label(int(s[0]), n_sites) for s in sectors]
    return KrylovDecomposition(n_sites, d, sectors, sector_of, labels)


def count_sectors_formula(n_sites: int, local_dim: int) -> int:
    """``((d-1)**(N+1) - 1) / (d - 2)`` sectors for ``d >= 3``."""
    if local_dim < 3:
        raise ValueError("formula holds for d >= 3; for d = 2 use commutant_dimension (N + 1)")
    return ((local_dim - 1) ** (n_sites + 1) - 1) // (local_dim - 2)


def largest_sector_formula(n_sites: int, local_dim: int) -> int:
    """Dimension of the sector of ``|0...0>`` for even ``N``.

    Basis states in this sector are the words that reduce to the empty word
    when adjacent equal letters cancel, i.e. closed walks of length ``N`` on
    the ``d``-regular tree. With ``N = 2n`` their number is

        sum_{j=1}^{n} j / (2n - j) * C(2n - j, n) * d**j * (d - 1)**(n - j).

    Evaluated in exact rational arithmetic.
    """
    if n_sites % 2:
        raise ValueError("largest-sector formula needs an even number of sites")
    if local_dim < 3:
        raise ValueError("formula holds for d >= 3")
    n = n_sites // 2
    if n == 0:
        return 1
    d = local_dim
    total = sum(
        Fraction(j, 2 * n - j) * math.comb(2 * n - j, n) * d**j * (d - 1) ** (n - j)
        for j in range(1, n + 1)
    )
    if total.denominator != 1:
        raise ArithmeticError(f"non-integral sector dimension {total}")
    return int(total)


def frozen_state_count(n_sites: int, local_dim: int) -> int:
    """Basis states with no equal neighbours: ``d (d-1)**(N-1)``."""
    if n_sites < 1 or local_dim < 2:
        raise ValueError("need n_sites >= 1 and local_dim >= 2")
    return local_dim * (local_dim - 1) ** (n_sites - 1)


def commutant_dimension(n_sites: int, local_dim: int) -> int:
    if n_sites < 1:
        raise ValueError("need n_sites >= 1")
    if local_dim == 2:
        return n_sites + 1
    return count_sectors_formula(n_sites, local_dim)


def staggered_sector_label(basis_index: int, n_sites: int) -> int:
    """``sum_j (-1)**j n_j`` over qubit occupations, site 0 carrying sign +1."""
    if not 0 <= basis_index < 2**n_sites:
        raise ValueError(f"index {basis_index} is not a {n_sites}-qubit basis index")
    m = 0
    for j in range(n_sites):
        bit = (basis_index >> (n_sites - 1 - j)) & 1
        m += bit if j % 2 == 0 else -bit
    return m


def leakage(state, sector) -> float:
    """Probability weight outside the given basis-index set."""
    psi = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
    mask = np.ones(psi.shape[0], dtype=bool)
    mask[np.asarray(sector, dtype=np.int64)] = False
    return float(np.sum(np.abs(psi[mask]) ** 2))
