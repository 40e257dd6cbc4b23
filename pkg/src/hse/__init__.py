"""Qudit brickwork circuits under Fibonacci driving, and measures of how well
their temporal ensembles reproduce Haar moments in the full Hilbert space or
in dynamically disconnected subspaces.
"""
__version__ = "0.1.0"

from .qudit import (
    StateVector,
    apply_layer,
    apply_two_site_gate,
    inner_product,
    new_basis_state,
    partial_trace_half,
    sample_haar_state,
    sample_haar_unitary,
    von_neumann_entropy,
)
from .fibonacci import DriveSchedule, fibonacci_word, schedule, symbol_at
from .models import CircuitModel, build_circuit, scar_dimension, scar_projector, scar_subspace
from .metrics import (
    TemporalEnsemble,
    accumulate_state,
    bound_B,
    cross_haar_distance,
    delta_gram,
    haar_moment_dense,
    hs_distance_sq,
    hs_lower_bound,
    power_sums,
    sym_dim,
    temporal_moment_dense,
)
from .krylov import (
    KrylovDecomposition,
    commutant_dimension,
    count_sectors_formula,
    frozen_state_count,
    largest_sector_formula,
    pair_flip_components,
)
from .dee import bin_states, build_reference_set, dee, run_dee_experiment
from .diagnostics import autocorrelator_series, bipartite_entropy_series, page_entropy
from .runner import ExperimentConfig, RunRecord, checkpoint_grid, run_experiment
