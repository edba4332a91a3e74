"""Hamiltonian assembly, exact closed-system propagation and dephasing."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .pauli import check_words, pauli_matrix

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-9
UNITARITY_TOL = 1e-8

UnitarySchedule = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class ParamHamiltonian:
    """``H = sum_i h_i L_i`` together with its cached eigendecomposition.

    Build instances through :func:`assemble`.
    """

    interactions: tuple[str, ...]
    couplings: np.ndarray
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    @property
    def n_qubits(self) -> int:
        return len(self.interactions[0])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def norm(self) -> float:
        """Operator norm, read off the cached spectrum."""
        return float(np.max(np.abs(self.eigenvalues)))

    @property
    def min_gap(self) -> float:
        return float(np.min(np.diff(self.eigenvalues))) if self.dim > 1 else np.inf

    def is_degenerate(self, tol: float = DEGENERACY_TOL) -> bool:
        return self.min_gap < tol


def assemble(interactions: Sequence[str], couplings: Sequence[float]) -> ParamHamiltonian:
    """Build ``sum_i h_i L_i`` from Pauli words and real couplings and diagonalize it."""
    words = check_words(interactions)
    h = np.asarray(couplings, dtype=float).copy()
    if h.shape != (len(words),):
        raise ValueError(f"got {h.size} couplings for {len(words)} interactions")
    if not np.all(np.isfinite(h)):
        raise ValueError("couplings must be finite")
    matrix = np.zeros((2 ** len(words[0]),) * 2, dtype=complex)
    for c, w in zip(h, words):
        if c != 0.0:
            matrix += c * pauli_matrix(w)
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    for arr in (h, matrix, eigenvalues, eigenvectors):
        arr.setflags(write=False)
    ham = ParamHamiltonian(words, h, matrix, eigenvalues, eigenvectors)
    if ham.is_degenerate():
        logger.warning("Hamiltonian spectrum is degenerate (min gap %.3e)", ham.min_gap)
    return ham


@dataclass(frozen=True)
class StateTrajectory:
    """Density matrices sampled at ``t_n = n * dt``."""

    times: np.ndarray
    states: np.ndarray = field(repr=False)
    dt: float

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def truncate(self, n_steps: int) -> "StateTrajectory":
        return StateTrajectory(self.times[:n_steps], self.states[:n_steps], self.dt)


def check_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    """Validate unit trace, Hermiticity and positivity; returns a complex copy."""
    rho = np.array(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if not np.allclose(rho, rho.conj().T, rtol=0, atol=atol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > atol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real:.12f}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -atol:
        raise ValueError("density matrix has negative eigenvalues")
    return rho


def pure_state(psi: Sequence[complex]) -> np.ndarray:
    """Projector onto the normalized vector ``psi``."""
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if psi.ndim != 1 or nrm == 0:
        raise ValueError("state vector must be a non-zero 1-D array")
    psi = psi / nrm
    return np.outer(psi, psi.conj())


def purity(rho: np.ndarray) -> float:
    return float(np.einsum("ij,ji->", rho, rho).real)


def depolarize(rho: np.ndarray, p: float) -> np.ndarray:
    """``(1 - p) rho + p I / d``; models imperfect preparation."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarization must lie in [0, 1], got {p}")
    d = rho.shape[0]
    return (1.0 - p) * rho + p * np.eye(d) / d


def _check_grid(dt: float, n_steps: int) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if int(n_steps) != n_steps or n_steps < 2:
        raise ValueError(f"n_steps must be an integer >= 2, got {n_steps}")
    return np.arange(int(n_steps)) * float(dt)


def evolve(rho0: np.ndarray, hamiltonian: ParamHamiltonian, dt: float, n_steps: int) -> StateTrajectory:
    """Exact Liouville-von Neumann evolution ``e^{-iHt} rho0 e^{iHt}``.

    Propagation happens in the eigenbasis of ``H``, so the only discretization
    error in the learning pipeline is that of the finite-difference derivative.
    """
    rho0 = check_density_matrix(rho0)
    if rho0.shape != hamiltonian.matrix.shape:
        raise ValueError(f"state dim {rho0.shape[0]} does not match Hamiltonian dim {hamiltonian.dim}")
    times = _check_grid(dt, n_steps)
    U = hamiltonian.eigenvectors
    E = hamiltonian.eigenvalues
    rho_e = U.conj().T @ rho0 @ U
    # rho_e[a, b] picks up exp(-i (E_a - E_b) t)
    phases = np.exp(-1j * np.multiply.outer(times, E[:, None] - E[None, :]))
    states = U @ (phases * rho_e) @ U.conj().T
    states[0] = rho0
    return StateTrajectory(times, states, float(dt))


def evolve_unitary(rho0: np.ndarray, schedule: UnitarySchedule, dt: float, n_steps: int) -> StateTrajectory:
    """``U(t_n) rho0 U(t_n)^dagger`` for a user-supplied unitary schedule."""
    rho0 = check_density_matrix(rho0)
    times = _check_grid(dt, n_steps)
    d = rho0.shape[0]
    states = np.empty((len(times), d, d), dtype=complex)
    for n, t in enumerate(times):
        u = np.asarray(schedule(float(t)), dtype=complex)
        if u.shape != (d, d):
            raise ValueError(f"schedule returned shape {u.shape} at t={t}, expected {(d, d)}")
        if not np.allclose(u @ u.conj().T, np.eye(d), rtol=0, atol=UNITARITY_TOL):
            raise ValueError(f"schedule is not unitary at t={t}")
        if n == 0 and not np.allclose(u, np.eye(d), rtol=0, atol=UNITARITY_TOL):
            raise ValueError("schedule must satisfy U(0) = identity")
        states[n] = u @ rho0 @ u.conj().T
    states[0] = rho0
    return StateTrajectory(times, states, float(dt))


def hamiltonian_schedule(hamiltonian: ParamHamiltonian) -> UnitarySchedule:
    """``t -> exp(-iHt)`` built from the cached eigendecomposition."""
    U = hamiltonian.eigenvectors
    E = hamiltonian.eigenvalues

    def schedule(t: float) -> np.ndarray:
        return (U * np.exp(-1j * E * t)) @ U.conj().T

    return schedule


def cross_resonance_gate(t: float) -> np.ndarray:
    """Two-qubit gate rotating the second qubit about X while the first is in |0>.

    Equivalent to ``exp(-i 2 pi (IX + ZX) t)``.
    """
    c, s = np.cos(4 * np.pi * t), np.sin(4 * np.pi * t)
    u = np.eye(4, dtype=complex)
    u[:2, :2] = [[c, -1j * s], [-1j * s, c]]
    return u


SCHEDULES: dict[str, UnitarySchedule] = {"cross_resonance_gate": cross_resonance_gate}


def populations(rho0: np.ndarray, hamiltonian: ParamHamiltonian) -> np.ndarray:
    """Diagonal ``<a|rho0|a>`` in the Hamiltonian eigenbasis."""
    U = hamiltonian.eigenvectors
    return np.einsum("ia,ij,ja->a", U.conj(), rho0, U).real


def dephase(rho0: np.ndarray, hamiltonian: ParamHamiltonian) -> np.ndarray:
    """Dephased state ``sum_a |a><a| rho0 |a><a|``."""
    U = hamiltonian.eigenvectors
    return (U * populations(rho0, hamiltonian)) @ U.conj().T
