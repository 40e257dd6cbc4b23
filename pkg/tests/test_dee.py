import math

import numpy as np
import pytest

from hse.dee import (
    BinHistogram,
    ReferenceSet,
    assign_bins,
    bin_states,
    build_reference_set,
    dee,
    filter_reference_states,
    run_dee_experiment,
)
from hse.krylov import pair_flip_components
from hse.models import build_circuit
from hse.qudit import new_basis_state, sample_haar_states


def test_reference_set_no_filtering_needed(rng):
    refs = build_reference_set(1000, 0.1, 16, rng)
    assert refs.size == 1000 and refs.requested == 1000
    assert build_reference_set(50, 0.0, 4, rng).size == 50


def test_reference_set_invariant(rng):
    # small D forces collisions
    refs = build_reference_set(300, 0.3, 2, rng)
    ov = np.abs(refs.states.conj() @ refs.states.T)
    np.fill_diagonal(ov, 0)
    assert ov.max() <= 0.7
    assert 2 <= refs.size <= 300


def test_duplicate_injected_states(rng):
    states = sample_haar_states(5, 8, rng)
    states = np.vstack([states, states[2]])
    kept = filter_reference_states(states, 0.05)
    assert kept.shape[0] == 5


def test_reference_set_errors(rng):
    with pytest.raises(ValueError):
        build_reference_set(1, 0.1, 4, rng)
    with pytest.raises(ValueError):
        build_reference_set(10, 1.0, 4, rng)
    with pytest.raises(ValueError):
        build_reference_set(20, 0.999, 1, rng)


def test_binning_self_and_copies(rng):
    refs = build_reference_set(40, 0.1, 6, rng)
    np.testing.assert_array_equal(assign_bins(refs.states, refs), np.arange(refs.size))
    psi = sample_haar_states(1, 6, rng)[0]
    hist = bin_states(np.tile(psi, (25, 1)), refs)
    assert hist.total == 25 and hist.counts.max() == 25
    with pytest.raises(ValueError):
        bin_states(np.ones((2, 5)), refs)


def test_tie_goes_to_lowest_index():
    refs = ReferenceSet(2, np.array([[1, 0], [0, 1]], dtype=complex), 0.0, 2)
    assert assign_bins(np.array([[1, 1]]) / math.sqrt(2), refs).tolist() == [0]


def test_haar_binning_concentration(rng):
    refs = build_reference_set(1000, 0.1, 16, rng)
    hist = bin_states(sample_haar_states(10_000, 16, rng), refs)
    assert hist.counts.max() / hist.counts.mean() < 3


def test_dee_examples():
    h = BinHistogram(np.array([3, 5, 2]))
    assert dee(h, BinHistogram(np.array([3, 5, 2])), pseudo_count=0) == pytest.approx(0, abs=1e-15)
    one = np.zeros(1024, dtype=int)
    one[7] = 100
    assert dee(BinHistogram(one), BinHistogram(np.full(1024, 10)), pseudo_count=0) == pytest.approx(-10)
    k = np.zeros(1024, dtype=int)
    k[:64] = 3
    assert dee(BinHistogram(k), BinHistogram(np.full(1024, 5)), pseudo_count=0) == pytest.approx(math.log2(64 / 1024))


def test_dee_pseudo_count_and_errors():
    t = BinHistogram(np.array([4, 0]))
    h = BinHistogram(np.array([0, 4]))
    # empty Haar bin smoothed: p_H = (1/6, 5/6)
    assert dee(t, h) == pytest.approx(-math.log2(6))
    with pytest.raises(ValueError):
        dee(BinHistogram(np.zeros(2, int)), h)
    with pytest.raises(ValueError):
        dee(t, BinHistogram(np.ones(3, int)))


def test_dee_experiment_reproducible():
    circuit = build_circuit("generic", 3, 2, np.random.default_rng(1))
    psi = new_basis_state(3, 2)
    runs = [
        run_dee_experiment(circuit, psi, 400, 100, 0.1, 3, np.random.default_rng(8), checkpoints=[10, 100, 400])
        for _ in range(2)
    ]
    np.testing.assert_array_equal(runs[0].values, runs[1].values)
    np.testing.assert_array_equal(runs[0].m_prime, runs[1].m_prime)
    assert runs[0].values.shape == (3, 3)
    assert np.all(runs[0].minimum <= runs[0].mean) and np.all(runs[0].mean <= runs[0].maximum)


def test_dee_scar_floor_shape():
    circuit = build_circuit("scar", 4, 2, np.random.default_rng(2), "P1")
    res = run_dee_experiment(circuit, new_basis_state(4, 2), 2000, 200, 0.1, 4, np.random.default_rng(3), checkpoints=[1, 100, 2000])
    # the temporal histogram is a single bin, so DEE = log2 p_H of that bin
    assert np.all(res.values <= 0)
    assert abs(res.mean[-1] + math.log2(200)) < 1.0


def test_dee_matched_distribution_near_zero(rng):
    circuit = build_circuit("generic", 4, 2, rng)
    res = run_dee_experiment(circuit, new_basis_state(4, 2), 10_000, 300, 0.1, 3, rng)
    tol = 3 * math.sqrt(300 / 10_000) * math.log2(math.e)
    assert res.mean[-1] <= tol
    assert res.mean[-1] > -0.3


def test_dee_subspace_haar(rng):
    circuit = build_circuit("pair_flip", 4, 3, rng)
    sector = pair_flip_components(4, 3).sector_containing(0)
    psi = new_basis_state(4, 3)
    res = run_dee_experiment(circuit, psi, 3000, 200, 0.1, 3, rng, subspace=sector)
    full = run_dee_experiment(circuit, psi, 3000, 200, 0.1, 3, rng)
    # referenced to its own sector the ensemble looks far closer to Haar
    assert res.mean[-1] > full.mean[-1] + 0.5
    iso = np.eye(81)[:, sector]
    res_iso = run_dee_experiment(circuit, psi, 3000, 200, 0.1, 3, rng, subspace=iso)
    assert res_iso.mean[-1] > full.mean[-1] + 0.5
    with pytest.raises(ValueError):
        run_dee_experiment(circuit, psi, 10, 20, 0.1, 1, rng, checkpoints=[5, 5])
