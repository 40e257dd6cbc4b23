import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hse.krylov import leakage, pair_flip_components
from hse.models import (
    bond_operator,
    build_circuit,
    pair_flip_gate,
    random_hermitian,
    scar_dimension,
    scar_embedded_gate,
    scar_projector,
    scar_subspace,
    unitary_from_generator,
)
from hse.qudit import is_unitary, new_basis_state, sample_haar_state

from oracles import taylor_exp


@pytest.mark.parametrize("method", ["upper", "symmetrized"])
def test_random_hermitian_is_hermitian(rng, method):
    h = random_hermitian(6, rng, method)
    np.testing.assert_array_equal(h, h.conj().T)
    assert np.all(np.diag(h).imag == 0)


@pytest.mark.parametrize("method", ["upper", "symmetrized"])
def test_random_hermitian_entry_mean(method):
    rng = np.random.default_rng(5)
    vals = np.array([random_hermitian(2, rng, method)[0, 1].real for _ in range(100_000)])
    assert abs(vals.mean() - 0.5) < 3 * vals.std() / math.sqrt(vals.size)


def test_random_hermitian_upper_entries_uniform(rng):
    vals = np.array([random_hermitian(3, rng)[0, 2] for _ in range(20_000)])
    # each element of H has real and imaginary parts spread over all of [0, 1)
    assert vals.real.min() < 0.01 and vals.real.max() > 0.99
    assert abs(vals.imag.var() - 1 / 12) < 0.005


def test_random_hermitian_bad_method(rng):
    with pytest.raises(ValueError):
        random_hermitian(2, rng, "gaussian")


def test_unitary_from_generator_examples(rng):
    np.testing.assert_allclose(unitary_from_generator(np.zeros((4, 4))), np.eye(4), atol=1e-15)
    np.testing.assert_allclose(unitary_from_generator(np.pi * np.eye(3), -1), -np.eye(3), atol=1e-12)
    h = random_hermitian(4, rng)
    for sign in (1, -1):
        u = unitary_from_generator(h, sign)
        assert is_unitary(u)
        np.testing.assert_allclose(u, taylor_exp(1j * sign * h, 30), atol=1e-10)
    with pytest.raises(ValueError):
        unitary_from_generator(np.array([[0, 1], [0, 0]]))


def test_projector_kernels():
    d = 3
    ket = lambda a, b: np.eye(d * d)[a * d + b]
    p1 = scar_projector("P1", 2)
    assert np.linalg.matrix_rank(p1) == 3
    assert np.allclose(p1 @ np.eye(4)[0], 0)
    plin = scar_projector("Plin", d)
    for v in (ket(0, 0), ket(1, 1), (ket(0, 1) - ket(1, 0)) / math.sqrt(2)):
        assert np.max(np.abs(plin @ v)) < 1e-12
    assert np.linalg.matrix_rank(scar_projector("Pexp", d)) == 5
    assert np.linalg.matrix_rank(scar_projector("P2", d)) == 7


@pytest.mark.parametrize("kind", ["P1", "P2", "Pexp", "Plin"])
def test_projector_idempotent(kind):
    p = scar_projector(kind, 3)
    assert np.max(np.abs(p @ p - p)) < 1e-12
    assert np.max(np.abs(p - p.conj().T)) == 0


def test_projector_errors():
    with pytest.raises(ValueError):
        scar_projector("P3", 3)
    with pytest.raises(ValueError):
        scar_projector("P1", 1)


def test_scar_gate(rng):
    h = random_hermitian(4, rng)
    u = scar_embedded_gate(h, scar_projector("P1", 2))
    np.testing.assert_allclose(u @ np.eye(4)[0], np.eye(4)[0], atol=1e-14)
    np.testing.assert_allclose(scar_embedded_gate(h, np.zeros((4, 4))), np.eye(4), atol=1e-14)
    np.testing.assert_allclose(scar_embedded_gate(h, np.eye(4)), unitary_from_generator(h, +1), atol=1e-14)
    with pytest.raises(ValueError):
        scar_embedded_gate(h, np.eye(9))


def test_scar_dimensions():
    assert scar_dimension(scar_projector("P1", 2), 4) == 1
    assert scar_dimension(scar_projector("P1", 3), 4) == 1
    assert scar_dimension(scar_projector("P2", 3), 4) == 2
    assert scar_dimension(scar_projector("Pexp", 3), 4) == 16
    assert scar_dimension(scar_projector("Plin", 3), 4) == 5


def test_scar_subspace_is_annihilated():
    p = scar_projector("Plin", 3)
    basis = scar_subspace(p, 4)
    for bond in range(3):
        assert np.max(np.abs(bond_operator(p, bond, 4, 3) @ basis)) < 1e-10


def test_scar_subspace_cap():
    with pytest.raises(ValueError):
        scar_subspace(scar_projector("P1", 3), 9, cap=1000)


def test_pair_flip_gate_structure(rng):
    d = 3
    u = pair_flip_gate(d, rng)
    assert is_unitary(u)
    e01 = np.eye(9)[1]
    image = u @ e01
    assert abs(abs(image[1]) - 1) < 1e-14 and np.count_nonzero(image) == 1
    image = u @ np.eye(9)[0]
    assert np.all(image[[i for i in range(9) if i % (d + 1)]] == 0)


def test_build_circuit_generic_distinct(rng):
    c = build_circuit("generic", 4, 2, rng)
    bricks = list(c.bricks.values())
    assert len(bricks) == 4 and all(is_unitary(b) for b in bricks)
    for i in range(4):
        for j in range(i):
            assert np.max(np.abs(bricks[i] - bricks[j])) > 1e-6


def test_build_circuit_scar_fixes_target(rng):
    c = build_circuit("scar", 4, 2, rng, "P1")
    for brick in c.bricks.values():
        np.testing.assert_allclose(brick[:, 0], np.eye(4)[0], atol=1e-14)
    psi = new_basis_state(4, 2).amplitudes
    for state in c.iter_states(psi, 10_000):
        pass
    assert abs(abs(np.vdot(psi, state)) - 1) < 1e-10


def test_multiscar_invariance(rng):
    c = build_circuit("scar", 4, 3, rng, "Plin")
    basis = scar_subspace(scar_projector("Plin", 3), 4)
    for label in "AB":
        u = c.step_matrix(label)
        assert np.max(np.abs(u @ basis - basis)) < 1e-10


def test_build_circuit_errors(rng):
    with pytest.raises(ValueError):
        build_circuit("floquet", 4, 2, rng)
    with pytest.raises(ValueError):
        build_circuit("generic", 1, 2, rng)


def test_pair_flip_confinement(rng):
    c = build_circuit("pair_flip", 4, 3, rng)
    dec = pair_flip_components(4, 3)
    psi0 = new_basis_state(4, 3).amplitudes
    last = c.evolve(psi0, 1001)[-1]
    assert leakage(last, dec.sector_containing(0)) < 1e-10


def test_determinism():
    a = build_circuit("generic", 4, 2, np.random.default_rng(3))
    b = build_circuit("generic", 4, 2, np.random.default_rng(3))
    for key in a.bricks:
        np.testing.assert_array_equal(a.bricks[key], b.bricks[key])


def test_step_order_even_then_odd(rng):
    c = build_circuit("generic", 4, 2, rng)
    ue = np.kron(c.bricks["A", "even"], c.bricks["A", "even"])
    uo = np.kron(np.kron(np.eye(2), c.bricks["A", "odd"]), np.eye(2))
    np.testing.assert_allclose(c.step_matrix("A"), uo @ ue, atol=1e-12)
    psi = sample_haar_state(16, rng)
    np.testing.assert_allclose(c.apply_step_inverse(c.apply_step(psi, "B"), "B"), psi, atol=1e-12)


def test_evolve_follows_schedule(rng):
    c = build_circuit("generic", 3, 2, rng)
    psi = sample_haar_state(8, rng)
    states = c.evolve(psi, 8)
    expected = psi
    for t, label in enumerate("ABAABAB", start=1):
        expected = c.step_matrix(label) @ expected
        np.testing.assert_allclose(states[t], expected, atol=1e-12)
    np.testing.assert_array_equal(states[0], psi)


def test_evolve_batch(rng):
    c = build_circuit("generic", 3, 2, rng)
    batch = np.stack([sample_haar_state(8, rng) for _ in range(3)], axis=1)
    out = c.evolve(batch, 20)
    assert out.shape == (3, 20, 8)
    np.testing.assert_allclose(out[1], c.evolve(batch[:, 1], 20), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["generic", "scar", "pair_flip"]), st.integers(2, 5), st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_step_unitary_property(family, n, d, seed):
    c = build_circuit(family, n, d, np.random.default_rng(seed))
    for label in "AB":
        u = c.step_matrix(label)
        assert np.max(np.abs(u.conj().T @ u - np.eye(c.dim))) < 1e-12
