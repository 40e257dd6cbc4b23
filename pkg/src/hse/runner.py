"""Config-driven experiment runs: instance sweeps, percentile bands, seeded CSV output.

Every run is fixed by an :class:`ExperimentConfig`. Instance ``i`` draws its
circuit from ``SeedSequence(seed, spawn_key=(i,))``, which is the ``i``-th
child of ``SeedSequence(seed).spawn``; replaying the master seed therefore
reproduces every table bit for bit, independent of worker count.

Output layout in ``config.out``::

    instance_<i>.csv   per-instance series
    aggregate.csv      mean, p10, p90 across instances per checkpoint
    sectors.json       Krylov sectors (krylov runs and pair-flip runs)
    manifest.json      config, seeds, checkpoint grid, sha256 of every file

Floats are written with ``repr`` (shortest round-trip decimal).
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.linalg import null_space

from . import __version__
from .dee import run_dee_experiment
from .diagnostics import autocorrelator_series, bipartite_entropy_series, local_observable
from .krylov import (
    KrylovDecomposition,
    count_sectors_formula,
    frozen_state_count,
    largest_sector_formula,
    pair_flip_components,
)
from .metrics import cross_haar_distance, delta_from_sums, hs_lower_bound, power_sums
from .models import FAMILIES, PROJECTOR_KINDS, build_circuit, scar_projector, scar_subspace
from .qudit import new_basis_state

__all__ = [
    "EXPERIMENTS",
    "PRESETS",
    "ConfigError",
    "NumericalInvariantError",
    "ExperimentConfig",
    "RunRecord",
    "load_config",
    "checkpoint_grid",
    "aggregate_instances",
    "child_seed_sequence",
    "parse_initial_states",
    "run_experiment",
    "krylov_report",
]

EXPERIMENTS = ("gbw", "scar", "multiscar", "hsf", "symmetry", "dee", "diagnostics", "krylov")
NORM_TOL = 1e-10
LEAKAGE_TOL = 1e-10


def delta_floor(order: int) -> float:
    """Most negative distance that rounding alone can produce.

    States pass the norm check at ``NORM_TOL``, so each ``|<a|b>|**(2k)``
    can sit ``~2k NORM_TOL`` below its exact value.
    """
    return -2.0 * order * NORM_TOL


DELTA_HEADER = ["initial", "T", "k", "delta_full", "delta_subspace", "bound_lb", "cross_bound"]
DEE_HEADER = ["initial", "T", "dee_min", "dee_mean", "dee_max", "m_prime", "epsilon", "seed"]
DIAG_HEADER = ["t", "value", "observable", "model", "instance"]


class ConfigError(ValueError):
    """Invalid experiment configuration; raised before any compute."""


class NumericalInvariantError(ArithmeticError):
    """A conserved quantity (norm, sector confinement, Δ >= 0) was violated."""


# family and defaults per experiment; the config file and CLI flags override these
PRESETS: dict[str, dict[str, Any]] = {
    "gbw": dict(family="generic", n_sites=4, local_dim=2, horizon=10_000, instances=100,
                moments=[1, 2], initial_states=["zeros", "plus"]),
    "scar": dict(family="scar", n_sites=4, local_dim=2, horizon=10_000, instances=100,
                 moments=[1, 2], initial_states=["basis:0000", "basis:1111"], projector_kind="P1"),
    "multiscar": dict(family="scar", n_sites=4, local_dim=3, horizon=100_000, instances=1,
                      moments=[1], initial_states=["basis:2222"], projector_kind="Plin"),
    "hsf": dict(family="pair_flip", n_sites=4, local_dim=3, horizon=10_000, instances=1,
                moments=[1, 2], initial_states=["all_basis"]),
    "symmetry": dict(family="pair_flip", n_sites=4, local_dim=2, horizon=10_000, instances=1,
                     moments=[1, 2], initial_states=["all_basis"]),
    "dee": dict(family="generic", n_sites=4, local_dim=2, horizon=10_000, instances=1,
                moments=[1], initial_states=["zeros"]),
    "diagnostics": dict(family="generic", n_sites=4, local_dim=2, horizon=1000, instances=5,
                        moments=[1], initial_states=["zeros"]),
    "krylov": dict(family="pair_flip", n_sites=4, local_dim=3, horizon=1, instances=1,
                   moments=[1], initial_states=[]),
}


@dataclass
class ExperimentConfig:
    """All knobs of one run.

    ``initial_states`` entries are ``"zeros"``, ``"plus"``, ``"basis:<digits>"``,
    ``"index:<i>"`` or ``"all_basis"``. ``subspace`` is ``"auto"`` (declare the
    dynamical sector of each start where one exists) or ``"off"``.
    """

    experiment: str
    family: str = "generic"
    n_sites: int = 4
    local_dim: int = 2
    horizon: int = 10_000
    instances: int = 1
    moments: list[int] = field(default_factory=lambda: [1, 2])
    initial_states: list[str] = field(default_factory=lambda: ["zeros"])
    projector_kind: str = "P1"
    subspace: str = "auto"
    seed: int = 0
    out: str | None = None
    per_decade: int = 30
    # DEE estimator
    reference_count: int = 1000
    epsilon: float = 0.1
    repeats: int = 20
    dee_subspace: bool = False
    # diagnostics
    observable: str | None = None
    site: int | None = None
    normalize_autocorrelator: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment' field")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {unknown}")
        experiment = data["experiment"]
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
        merged = {**PRESETS[experiment], **data}
        try:
            config = cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        config.validate()
        return config

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        for name in ("n_sites", "local_dim", "horizon", "instances", "seed", "per_decade",
                     "reference_count", "repeats"):
            value = getattr(self, name)
            need(isinstance(value, (int, np.integer)) and not isinstance(value, bool),
                 f"{name} must be an integer, got {value!r}")
        need(self.experiment in EXPERIMENTS, f"unknown experiment {self.experiment!r}")
        need(self.family in FAMILIES, f"unknown family {self.family!r}; choose from {FAMILIES}")
        need(self.horizon >= 1, "horizon must be >= 1")
        need(self.instances >= 1, "instances must be >= 1")
        need(self.n_sites >= 2, "n_sites must be >= 2")
        need(self.local_dim >= 2, "local_dim must be >= 2")
        need(self.local_dim <= 10, "local_dim above 10 is not supported by digit labels")
        need(self.seed >= 0, "seed must be non-negative")
        need(self.per_decade >= 1, "per_decade must be >= 1")
        need(isinstance(self.moments, (list, tuple)) and len(self.moments) > 0, "moments must be a non-empty list")
        need(all(isinstance(k, (int, np.integer)) and k >= 1 for k in self.moments), "every k must be an integer >= 1")
        need(len(set(self.moments)) == len(self.moments), "moments must not repeat")
        need(self.projector_kind in PROJECTOR_KINDS, f"unknown projector kind {self.projector_kind!r}")
        need(self.subspace in ("auto", "off"), "subspace must be 'auto' or 'off'")
        need(0.0 <= self.epsilon < 1.0, "epsilon must lie in [0, 1)")
        need(self.reference_count >= 2, "reference_count must be >= 2")
        need(self.repeats >= 1, "repeats must be >= 1")
        need(self.local_dim**self.n_sites <= 10**6, "Hilbert space dimension above 10^6")
        if self.experiment == "hsf":
            need(self.family == "pair_flip" and self.local_dim >= 3, "hsf requires the pair_flip family with d >= 3")
        if self.experiment == "symmetry":
            need(self.family == "pair_flip" and self.local_dim == 2, "symmetry requires the pair_flip family with d = 2")
        if self.experiment in ("scar", "multiscar"):
            need(self.family == "scar", f"{self.experiment} requires the scar family")
        if self.experiment == "gbw":
            need(self.family == "generic", "gbw requires the generic family")
        if self.experiment == "diagnostics":
            need(self.local_dim**self.n_sites <= 256, "diagnostics evolve operators; needs D <= 256")
            obs = self.observable or default_observable(self.local_dim)
            need(obs in ("sigma_z", "spin1_z"), f"unknown observable {obs!r}")
            need((obs, self.local_dim) in (("sigma_z", 2), ("spin1_z", 3)),
                 f"observable {obs} does not fit local_dim {self.local_dim}")
            if self.site is not None:
                need(0 <= self.site < self.n_sites, "site outside the chain")
        if self.experiment != "krylov":
            try:
                parse_initial_states(self.initial_states, self.n_sites, self.local_dim)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            need(len(self.initial_states) > 0, "at least one initial state is required")


def default_observable(local_dim: int) -> str:
    return "sigma_z" if local_dim == 2 else "spin1_z"


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Preset < config file < overrides (CLI flags). ``None`` overrides are ignored."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return ExperimentConfig.from_dict(data)


def checkpoint_grid(horizon: int, per_decade: int) -> list[int]:
    """``t_i = max(t_{i-1} + 1, round(10**(i / n)))`` clipped to ``horizon``; always holds 1 and ``horizon``."""
    if horizon < 1 or per_decade < 1:
        raise ValueError("need horizon >= 1 and per_decade >= 1")
    grid = [1]
    i = 1
    while grid[-1] < horizon:
        grid.append(min(horizon, max(grid[-1] + 1, round(10 ** (i / per_decade)))))
        i += 1
    return grid


def aggregate_instances(values, grids: Sequence[Sequence[int]] | None = None) -> dict[str, np.ndarray]:
    """Mean and 10th/90th percentiles over instances (axis 0), per checkpoint.

    Percentiles interpolate linearly between order statistics. ``grids``, one
    per instance, are checked for alignment.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    if values.shape[0] < 1:
        raise ValueError("need at least one instance")
    if grids is not None:
        grids = [np.asarray(g) for g in grids]
        if len(grids) != values.shape[0]:
            raise ValueError("one checkpoint grid per instance required")
        if any(g.shape != grids[0].shape or np.any(g != grids[0]) for g in grids):
            raise ValueError("instances were evaluated on misaligned checkpoint grids")
        if grids[0].shape[0] != values.shape[1]:
            raise ValueError("grid length does not match the series length")
    return {
        "mean": values.mean(axis=0),
        "p10": np.percentile(values, 10, axis=0, method="linear"),
        "p90": np.percentile(values, 90, axis=0, method="linear"),
    }


def child_seed_sequence(master: int, index: int) -> np.random.SeedSequence:
    """Stream of instance ``index``: identical to ``SeedSequence(master).spawn(...)[index]``."""
    return np.random.SeedSequence(master, spawn_key=(index,))


def _child_seed_int(master: int, index: int) -> int:
    return int(child_seed_sequence(master, index).generate_state(1, np.uint64)[0])


def parse_initial_states(specs: Sequence[str], n_sites: int, local_dim: int) -> list[tuple[str, np.ndarray]]:
    """``(label, amplitudes)`` per entry; ``all_basis`` expands to every product basis state."""
    out = []
    for spec in specs:
        if not isinstance(spec, str):
            raise ValueError(f"initial state spec must be a string, got {spec!r}")
        if spec == "zeros":
            out.append(("0" * n_sites, new_basis_state(n_sites, local_dim).amplitudes))
        elif spec == "plus":
            out.append(("+" * n_sites, new_basis_state(n_sites, local_dim, plus=True).amplitudes))
        elif spec == "all_basis":
            for idx in range(local_dim**n_sites):
                psi = np.zeros(local_dim**n_sites, dtype=complex)
                psi[idx] = 1.0
                out.append((_digits_label(idx, n_sites, local_dim), psi))
        elif spec.startswith("basis:"):
            text = spec.split(":", 1)[1]
            if len(text) != n_sites or not text.isdigit():
                raise ValueError(f"{spec!r} needs exactly {n_sites} digits")
            digits = [int(c) for c in text]
            if max(digits) >= local_dim:
                raise ValueError(f"{spec!r} has a digit >= local_dim {local_dim}")
            out.append((text, new_basis_state(n_sites, local_dim, digits).amplitudes))
        elif spec.startswith("index:"):
            try:
                idx = int(spec.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad index spec {spec!r}") from None
            if not 0 <= idx < local_dim**n_sites:
                raise ValueError(f"{spec!r} outside the {local_dim**n_sites}-dim basis")
            psi = np.zeros(local_dim**n_sites, dtype=complex)
            psi[idx] = 1.0
            out.append((_digits_label(idx, n_sites, local_dim), psi))
        else:
            raise ValueError(f"unknown initial state spec {spec!r}")
    return out


def _digits_label(index: int, n_sites: int, local_dim: int) -> str:
    return "".join(str(int(c)) for c in np.base_repr(index, local_dim).zfill(n_sites))


# --------------------------------------------------------------------------- subspaces


@dataclass
class _Context:
    """Per-run data shared by all instances (pure functions of the config)."""

    sectors: KrylovDecomposition | None = None
    scar_basis: np.ndarray | None = None
    scar_complement: np.ndarray | None = None


def _build_context(config: ExperimentConfig) -> _Context:
    ctx = _Context()
    if config.subspace == "off" and config.experiment != "krylov":
        return ctx
    if config.family == "pair_flip":
        ctx.sectors = pair_flip_components(config.n_sites, config.local_dim)
    elif config.family == "scar":
        basis = scar_subspace(scar_projector(config.projector_kind, config.local_dim), config.n_sites)
        ctx.scar_basis = basis
        ctx.scar_complement = null_space(basis.conj().T) if basis.shape[1] else np.eye(basis.shape[0])
    return ctx


def _declared_subspace(psi: np.ndarray, ctx: _Context):
    """Indices or isometry of the dynamical sector holding ``psi``, else ``None``."""
    if ctx.sectors is not None:
        support = np.flatnonzero(np.abs(psi) > 0)
        ids = np.unique(ctx.sectors.sector_of[support])
        if ids.size == 1:
            return ctx.sectors.sectors[int(ids[0])]
        return None
    if ctx.scar_basis is not None and ctx.scar_basis.shape[1]:
        weight = float(np.sum(np.abs(ctx.scar_basis.conj().T @ psi) ** 2))
        if weight > 1.0 - LEAKAGE_TOL:
            return ctx.scar_basis
        if weight < LEAKAGE_TOL:
            return ctx.scar_complement
    return None


def _restrict(states: np.ndarray, subspace) -> np.ndarray:
    if subspace.ndim == 1:
        return states[:, subspace]
    return states @ subspace.conj()


def _subspace_dim(subspace) -> int:
    return subspace.shape[0] if subspace.ndim == 1 else subspace.shape[1]


def _check_norms(states: np.ndarray, label: str) -> None:
    drift = np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0))
    if drift > NORM_TOL:
        raise NumericalInvariantError(f"norm drift {drift:.3e} for initial state {label}")


# --------------------------------------------------------------------------- kernels


def _delta_instance(config: ExperimentConfig, index: int, ctx: _Context, grid: np.ndarray) -> list[list]:
    rng = np.random.default_rng(child_seed_sequence(config.seed, index))
    circuit = build_circuit(config.family, config.n_sites, config.local_dim, rng, config.projector_kind)
    dim = circuit.dim
    rows = []
    for label, psi0 in parse_initial_states(config.initial_states, config.n_sites, config.local_dim):
        states = circuit.evolve(psi0, config.horizon)
        _check_norms(states, label)
        sub = _declared_subspace(psi0, ctx)
        if sub is not None:
            reduced = _restrict(states, sub)
            leak = float(np.max(np.sum(np.abs(states) ** 2, axis=1) - np.sum(np.abs(reduced) ** 2, axis=1)))
            if leak > LEAKAGE_TOL:
                raise NumericalInvariantError(f"state {label} leaks {leak:.3e} out of its sector")
            sub_dim = _subspace_dim(sub)
        else:
            reduced, sub_dim = states, dim
        # overlaps are unchanged by the restriction, which only drops zero amplitudes
        sums = power_sums(reduced, config.moments, checkpoints=grid)
        for j, k in enumerate(config.moments):
            full = delta_from_sums(sums[:, j], grid, k, dim)
            subd = delta_from_sums(sums[:, j], grid, k, sub_dim) if sub is not None else np.full(grid.size, np.nan)
            floor = delta_floor(k)
            if np.min(full) < floor or (sub is not None and np.min(subd) < floor):
                raise NumericalInvariantError(f"negative distance for {label}, k={k}")
            bound = hs_lower_bound(sub_dim) if sub_dim >= 2 else math.nan
            cross = cross_haar_distance(dim, sub_dim, k)
            for T, a, b in zip(grid, full, subd):
                rows.append([label, int(T), int(k), float(a), float(b), bound, cross])
    return rows


def _dee_instance(config: ExperimentConfig, index: int, ctx: _Context, grid: np.ndarray) -> list[list]:
    seq = child_seed_sequence(config.seed, index)
    circuit_seq, estimator_seq = seq.spawn(2)
    circuit = build_circuit(config.family, config.n_sites, config.local_dim,
                            np.random.default_rng(circuit_seq), config.projector_kind)
    seed_int = _child_seed_int(config.seed, index)
    starts = parse_initial_states(config.initial_states, config.n_sites, config.local_dim)
    rows = []
    for (label, psi0), start_seq in zip(starts, estimator_seq.spawn(len(starts))):
        states = circuit.evolve(psi0, config.horizon)
        _check_norms(states, label)
        sub = _declared_subspace(psi0, ctx) if config.dee_subspace else None
        result = run_dee_experiment(
            circuit, psi0, config.horizon, config.reference_count, config.epsilon, config.repeats,
            np.random.default_rng(start_seq), subspace=sub, checkpoints=grid, temporal_states=states,
        )
        m_prime = int(result.m_prime.min())
        for T, lo, mid, hi in zip(grid, result.minimum, result.mean, result.maximum):
            rows.append([label, int(T), float(lo), float(mid), float(hi), m_prime, float(config.epsilon), seed_int])
    return rows


def _diagnostics_instance(config: ExperimentConfig, index: int, ctx: _Context, grid: np.ndarray) -> list[list]:
    rng = np.random.default_rng(child_seed_sequence(config.seed, index))
    circuit = build_circuit(config.family, config.n_sites, config.local_dim, rng, config.projector_kind)
    obs_name = config.observable or default_observable(config.local_dim)
    site = config.n_sites // 2 if config.site is None else config.site
    model = config.family if config.family != "scar" else f"scar[{config.projector_kind}]"
    series = autocorrelator_series(circuit, local_observable(obs_name, config.local_dim), site,
                                   config.horizon, normalize=config.normalize_autocorrelator)
    rows = [[t, float(v), f"A[{obs_name}@{site}]", model, index] for t, v in enumerate(series)]
    if config.n_sites % 2 == 0:
        for label, psi0 in parse_initial_states(config.initial_states, config.n_sites, config.local_dim):
            ent = bipartite_entropy_series(circuit, psi0, config.horizon)
            rows += [[t, float(v), f"S_half[{label}]", model, index] for t, v in enumerate(ent)]
    return rows


KERNELS = {
    "dee": (_dee_instance, DEE_HEADER),
    "diagnostics": (_diagnostics_instance, DIAG_HEADER),
}


def _kernel(experiment: str):
    return KERNELS.get(experiment, (_delta_instance, DELTA_HEADER))


def _instance_task(args):
    config, index, ctx, grid = args
    kernel, _ = _kernel(config.experiment)
    return kernel(config, index, ctx, grid)


# --------------------------------------------------------------------------- aggregation


def _aggregate_rows(experiment: str, tables: list[list[list]]) -> tuple[list[str], list[list]]:
    """Group rows by their key columns and reduce the value columns across instances."""
    if experiment == "diagnostics":
        key_idx, value_cols, names = (2, 3, 0), [1], ["value"]
        header = ["observable", "model", "t"]
    elif experiment == "dee":
        key_idx, value_cols, names = (0, 1), [3], ["dee_mean"]
        header = ["initial", "T"]
    else:
        key_idx, value_cols, names = (0, 1, 2), [3, 4], ["delta_full", "delta_subspace"]
        header = ["initial", "T", "k"]
    keys = [tuple(row[i] for i in key_idx) for row in tables[0]]
    for table in tables[1:]:
        if [tuple(row[i] for i in key_idx) for row in table] != keys:
            raise ValueError("instances produced misaligned tables")
    extra = []
    if experiment not in ("dee", "diagnostics"):
        extra = ["bound_lb", "cross_bound"]
    for name in names:
        header += [f"{name}_mean", f"{name}_p10", f"{name}_p90"]
    header += extra
    stats = []
    for col in value_cols:
        values = np.array([[row[col] for row in table] for table in tables], dtype=float)
        if np.all(np.isnan(values)):
            nan = np.full(values.shape[1], np.nan)
            stats.append({"mean": nan, "p10": nan, "p90": nan})
        else:
            stats.append(aggregate_instances(values))
    out = []
    for r, key in enumerate(keys):
        row = list(key)
        for s in stats:
            row += [float(s["mean"][r]), float(s["p10"][r]), float(s["p90"][r])]
        if extra:
            row += [tables[0][r][5], tables[0][r][6]]
        out.append(row)
    return header, out


# --------------------------------------------------------------------------- output


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _write_atomic(path: Path, text: str) -> str:
    """Write through a temp file and rename; return the sha256 of the content."""
    data = text.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(data).hexdigest()


@dataclass
class RunRecord:
    config: dict
    master_seed: int
    child_seeds: list[int]
    checkpoints: list[int]
    tables: dict[str, tuple[list[str], list[list]]]
    wall_clock: float
    version: str = __version__
    complete: bool = True
    files: dict[str, str] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def table(self, name: str) -> tuple[list[str], list[list]]:
        return self.tables[name]

    def csv_text(self, name: str) -> str:
        header, rows = self.tables[name]
        return _csv_text(header, rows)

    def manifest(self) -> dict:
        return {
            "version": self.version,
            "complete": self.complete,
            "config": self.config,
            "master_seed": self.master_seed,
            "child_seeds": self.child_seeds,
            "seed_derivation": "numpy SeedSequence(master_seed, spawn_key=(instance,))",
            "checkpoints": self.checkpoints,
            "wall_clock_seconds": self.wall_clock,
            "files": self.files,
            **self.extra,
        }


def worker_count(instances: int) -> int:
    """``HSE_THREADS`` caps the pool; defaults to the available CPUs."""
    raw = os.environ.get("HSE_THREADS")
    if raw is None:
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"HSE_THREADS must be a positive integer, got {raw!r}") from None
        if cap < 1:
            raise ConfigError(f"HSE_THREADS must be a positive integer, got {raw!r}")
    return max(1, min(cap, instances))


def krylov_report(n_sites: int, local_dim: int) -> dict:
    """Sector histogram of the pair-flip graph next to the closed-form counts."""
    dec = pair_flip_components(n_sites, local_dim)
    report = {
        "n_sites": n_sites,
        "local_dim": local_dim,
        "dimension": local_dim**n_sites,
        "sector_count": len(dec.sectors),
        "sector_dimensions": {str(k): v for k, v in dec.dimension_histogram().items()},
        "largest_sector": max(dec.dims),
        "frozen_count": sum(1 for s in dec.dims if s == 1),
    }
    if local_dim >= 3:
        report["formula"] = {
            "sector_count": count_sectors_formula(n_sites, local_dim),
            "frozen_count": frozen_state_count(n_sites, local_dim),
        }
        if n_sites % 2 == 0:
            report["formula"]["largest_sector"] = largest_sector_formula(n_sites, local_dim)
        report["formula_agrees"] = all(report[k] == v for k, v in report["formula"].items())
    else:
        report["staggered_magnetisation"] = {str(i): m for i, m in enumerate(dec.labels or [])}
    return report


def _run_krylov(config: ExperimentConfig, out: Path | None, started: float) -> RunRecord:
    report = krylov_report(config.n_sites, config.local_dim)
    if report.get("formula_agrees") is False:
        raise NumericalInvariantError(f"closed forms disagree with the sector graph: {report}")
    rows = [[int(k), v] for k, v in report["sector_dimensions"].items()]
    record = RunRecord(config.to_dict(), config.seed, [], [], {"aggregate": (["dim", "count"], rows)},
                       0.0, extra={"krylov": report})
    if out is not None:
        record.files["aggregate.csv"] = _write_atomic(out / "aggregate.csv", record.csv_text("aggregate"))
        dec = pair_flip_components(config.n_sites, config.local_dim)
        record.files["sectors.json"] = _write_atomic(out / "sectors.json", dec.to_json())
    record.wall_clock = time.perf_counter() - started
    if out is not None:
        _write_atomic(out / "manifest.json", json.dumps(record.manifest(), indent=1))
    return record


def run_experiment(config: ExperimentConfig, out: str | os.PathLike | None = None) -> RunRecord:
    """Run every instance, aggregate, and (if an output directory is set) write the files.

    Instances run in a process pool capped by ``HSE_THREADS``; tables are
    ordered by instance index regardless of completion order.
    """
    config.validate()
    started = time.perf_counter()
    target = out if out is not None else config.out
    out_dir = Path(target) if target is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    workers = worker_count(config.instances)
    if config.experiment == "krylov":
        return _run_krylov(config, out_dir, started)

    ctx = _build_context(config)
    grid = np.asarray(checkpoint_grid(config.horizon, config.per_decade), dtype=np.int64)
    _, header = _kernel(config.experiment)
    record = RunRecord(
        config.to_dict(),
        config.seed,
        [_child_seed_int(config.seed, i) for i in range(config.instances)],
        grid.tolist(),
        {},
        0.0,
    )

    def flush_manifest():
        record.wall_clock = time.perf_counter() - started
        if out_dir is not None:
            _write_atomic(out_dir / "manifest.json", json.dumps(record.manifest(), indent=1))

    tasks = [(config, i, ctx, grid) for i in range(config.instances)]
    tables = []
    pool = None
    record.complete = False
    try:
        if out_dir is not None and ctx.sectors is not None:
            record.files["sectors.json"] = _write_atomic(out_dir / "sectors.json", ctx.sectors.to_json())
        if workers == 1:
            results = map(_instance_task, tasks)
        else:
            pool = ProcessPoolExecutor(max_workers=workers)
            results = pool.map(_instance_task, tasks)
        for i, rows in enumerate(results):
            tables.append(rows)
            name = f"instance_{i}"
            record.tables[name] = (header, rows)
            if out_dir is not None:
                record.files[f"{name}.csv"] = _write_atomic(out_dir / f"{name}.csv", record.csv_text(name))
        record.tables["aggregate"] = _aggregate_rows(config.experiment, tables)
        if out_dir is not None:
            record.files["aggregate.csv"] = _write_atomic(out_dir / "aggregate.csv", record.csv_text("aggregate"))
        record.complete = True
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
        flush_manifest()
    return record
