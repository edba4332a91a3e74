import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from conftest import random_density
from hamlearn.dynamics import (
    assemble,
    check_density_matrix,
    cross_resonance_gate,
    dephase,
    depolarize,
    evolve,
    evolve_unitary,
    hamiltonian_schedule,
    populations,
    pure_state,
    purity,
)
from hamlearn.pauli import pauli_matrix

CR_WORDS = ("IX", "IY", "IZ", "ZI", "ZX", "ZY", "ZZ")
CR_H = (-1.548, -0.004, 0.006, 9.578, 5.316, -0.225, -0.340)


def test_assemble_matrix_and_norm():
    H = assemble(CR_WORDS, CR_H)
    ref = sum(h * pauli_matrix(w) for w, h in zip(CR_WORDS, CR_H))
    assert np.allclose(H.matrix, ref)
    # frozen oracle: largest |eigenvalue| from an independent eigvals call
    assert H.norm == pytest.approx(16.454, abs=1e-3)
    assert H.norm == pytest.approx(np.max(np.abs(np.linalg.eigvals(ref))), rel=1e-12)
    assert not H.is_degenerate()


def test_assemble_rejects_bad_input():
    with pytest.raises(ValueError):
        assemble(("ZX",), (1.0, 2.0))
    with pytest.raises(ValueError):
        assemble(("ZX",), (np.nan,))


def test_degenerate_hamiltonian_warns(caplog):
    with caplog.at_level(logging.WARNING):
        H = assemble(("ZI",), (1.0,))
    assert H.is_degenerate()
    assert "degenerate" in caplog.text


def test_evolve_matches_expm(rng):
    H = assemble(CR_WORDS, CR_H)
    rho0 = random_density(rng, 4)
    traj = evolve(rho0, H, 0.013, 20)
    for n in (0, 1, 7, 19):
        U = expm(-1j * H.matrix * traj.times[n])
        assert np.allclose(traj.states[n], U @ rho0 @ U.conj().T, atol=1e-10)
    assert np.array_equal(traj.states[0], rho0)


def test_hamiltonian_schedule_agrees_with_evolve(rng):
    H = assemble(("XX", "ZI", "IY"), (0.3, -1.1, 0.7))
    rho0 = random_density(rng, 4)
    a = evolve(rho0, H, 0.05, 15).states
    b = evolve_unitary(rho0, hamiltonian_schedule(H), 0.05, 15).states
    assert np.allclose(a, b, atol=1e-10)


def test_cross_resonance_gate_is_generated_by_ix_plus_zx():
    G = pauli_matrix("IX") + pauli_matrix("ZX")
    for t in (0.0, 0.01, 0.173, 0.5):
        assert np.allclose(cross_resonance_gate(t), expm(-2j * np.pi * G * t), atol=1e-12)


def test_evolve_unitary_validates_schedule():
    rho0 = pure_state([1, 0, 0, 0])
    with pytest.raises(ValueError, match="unitary"):
        evolve_unitary(rho0, lambda t: 2 * np.eye(4), 0.1, 3)
    with pytest.raises(ValueError, match="identity"):
        evolve_unitary(rho0, lambda t: pauli_matrix("XX"), 0.1, 3)
    with pytest.raises(ValueError, match="shape"):
        evolve_unitary(rho0, lambda t: np.eye(2), 0.1, 3)


@pytest.mark.parametrize("dt,n", [(0.0, 5), (-0.1, 5), (0.1, 1), (0.1, 2.5)])
def test_bad_grid(dt, n):
    H = assemble(("Z",), (1.0,))
    with pytest.raises(ValueError):
        evolve(pure_state([1, 1]), H, dt, n)


def test_check_density_matrix():
    with pytest.raises(ValueError, match="trace"):
        check_density_matrix(np.eye(2))
    with pytest.raises(ValueError, match="Hermitian"):
        check_density_matrix(np.array([[0.5, 1], [0, 0.5]]))
    with pytest.raises(ValueError, match="negative"):
        check_density_matrix(np.diag([1.5, -0.5]))


def test_depolarize_and_purity():
    rho = pure_state([1, 0])
    assert purity(depolarize(rho, 1.0)) == pytest.approx(0.5)
    assert purity(depolarize(rho, 0.0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        depolarize(rho, 1.5)


def test_dephase_keeps_populations(rng):
    H = assemble(CR_WORDS, CR_H)
    rho0 = random_density(rng, 4)
    rb = dephase(rho0, H)
    assert np.allclose(rb @ H.matrix, H.matrix @ rb, atol=1e-10)
    assert np.allclose(populations(rb, H), populations(rho0, H))


def test_time_average_approaches_dephased_state(rng):
    H = assemble(CR_WORDS, CR_H)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    rho0 = pure_state(psi)
    traj = evolve(rho0, H, 0.0137, 20000)
    assert np.allclose(traj.states.mean(axis=0), dephase(rho0, H), atol=5e-3)


@settings(max_examples=25, deadline=None)
@given(
    h=st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    seed=st.integers(0, 2**16),
    dt=st.floats(1e-3, 0.5),
)
def test_trace_and_purity_conserved(h, seed, dt):
    H = assemble(("XY", "ZZ", "IX"), h)
    rho0 = random_density(np.random.default_rng(seed), 4, rank=2)
    traj = evolve(rho0, H, dt, 12)
    tr = np.trace(traj.states, axis1=1, axis2=2)
    assert np.allclose(tr, 1.0, atol=1e-10)
    pur = np.einsum("nij,nji->n", traj.states, traj.states).real
    assert np.allclose(pur, purity(rho0), atol=1e-10)
    assert np.allclose(traj.states, np.conj(np.swapaxes(traj.states, 1, 2)), atol=1e-10)
