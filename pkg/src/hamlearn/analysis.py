"""Accuracy theory: participation ratio, optimal states, error bounds and the
long-time TQCM spectrum."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import DEGENERACY_TOL, ParamHamiltonian, dephase, populations, pure_state
from .learner import DEFAULT_PINV_THRESHOLD, ansatz_matrices

logger = logging.getLogger(__name__)


class ResonanceError(ValueError):
    """The spectrum violates the non-degeneracy / non-resonance condition."""


@dataclass(frozen=True)
class AccuracyReport:
    ipr: float
    epsilon: float | None
    bound: float | None
    predicted_spectrum: np.ndarray | None
    measured_spectrum: np.ndarray
    degenerate: bool = False


def ipr(rho0: np.ndarray, hamiltonian: ParamHamiltonian) -> float:
    """Inverse participation ratio of ``rho0`` in the eigenbasis of ``H``.

    Computed as ``tr(rho_bar^2) = sum_a p_a^2`` with ``p_a = <a|rho0|a>``,
    which equals ``sum_a |<a|psi>|^4`` for a pure state.
    """
    if hamiltonian.is_degenerate():
        logger.warning("IPR of a degenerate Hamiltonian depends on the eigenbasis returned by the solver")
    p = populations(np.asarray(rho0, dtype=complex), hamiltonian)
    return float(np.sum(p**2))


def optimal_vector(hamiltonian: ParamHamiltonian, phases: Sequence[float] | None = None) -> np.ndarray:
    d = hamiltonian.dim
    phi = np.zeros(d) if phases is None else np.asarray(phases, dtype=float)
    if phi.shape != (d,):
        raise ValueError(f"expected {d} phases, got {phi.size}")
    return hamiltonian.eigenvectors @ (np.exp(1j * phi) / np.sqrt(d))


def optimal_state(hamiltonian: ParamHamiltonian, phases: Sequence[float] | None = None) -> np.ndarray:
    """Equal-weight superposition of all eigenstates; minimal IPR ``2**-n``."""
    return pure_state(optimal_vector(hamiltonian, phases))


def relative_error(h_opt: Sequence[float], h_true: Sequence[float]) -> float:
    h_opt = np.asarray(h_opt, dtype=float)
    h_true = np.asarray(h_true, dtype=float)
    if h_opt.shape != h_true.shape:
        raise ValueError(f"length mismatch: {h_opt.shape} vs {h_true.shape}")
    scale = np.linalg.norm(h_true)
    if scale == 0:
        raise ValueError("true coupling vector is zero")
    return float(np.linalg.norm(h_opt - h_true) / scale)


def error_bound(
    V: np.ndarray,
    n_steps: int,
    n_qubits: int,
    n_shots: int,
    dt: float,
    h_norm: float,
    l_norm: float = 1.0,
) -> float:
    """Upper bound on the relative coupling error.

    ``sqrt(l tr[(V / (|L|^2 N_T))^-2]) * (16 (3/2)^(n/2) / sqrt(N_S) + 4 |H| dt)``;
    returns ``inf`` when ``V`` is singular.
    """
    V = np.asarray(V, dtype=float)
    l = V.shape[0]
    w = np.linalg.eigvalsh(V / (l_norm**2 * n_steps))
    if w[0] <= 0 or w[0] < DEFAULT_PINV_THRESHOLD * w[-1]:
        return float("inf")
    info = np.sqrt(l * np.sum(w**-2.0))
    return float(info * (16 * 1.5 ** (n_qubits / 2) / np.sqrt(n_shots) + 4 * h_norm * dt))


def delta_b_bound(
    n_qubits: int,
    n_measurements: float,
    n_steps: int,
    dt: float,
    h_norm: float,
    l_norm: float = 1.0,
) -> float:
    """Per-component bound on the error of ``B`` (statistical + finite-step)."""
    stat = 16 * h_norm * l_norm / np.sqrt(2.0**n_qubits * n_measurements) * np.sqrt(n_steps)
    syst = 4 * dt * l_norm * h_norm**2 * n_steps
    return float(stat + syst)


def is_non_resonant(eigenvalues: Sequence[float], tol: float = DEGENERACY_TOL) -> bool:
    """True when all levels and all transition frequencies ``E_a - E_b`` are distinct."""
    E = np.sort(np.asarray(eigenvalues, dtype=float))
    if np.any(np.diff(E) < tol):
        return False
    diffs = np.subtract.outer(E, E)[~np.eye(len(E), dtype=bool)]
    return bool(np.all(np.diff(np.sort(diffs)) >= tol))


def predicted_tqcm_spectrum(
    rho0: np.ndarray,
    hamiltonian: ParamHamiltonian,
    eigvecs: np.ndarray,
    ansatz: Sequence[str],
    n_steps: int,
    exact_dephasing: bool = False,
    check: bool = True,
) -> np.ndarray:
    """Long-time prediction of TQCM eigenvalues along given eigenvector directions.

    For each column ``a`` of ``eigvecs`` with ``A = sum_j a_j L_j``::

        omega = 2 n_steps [tr(rb A^2) - tr(rb A)^2 - tr(rb^2 A^2)]

    where ``rb`` is the dephased initial state. With ``exact_dephasing`` the
    bracket is replaced by the exact infinite-time average of
    ``-tr([A, rho(t)]^2) / 2`` under the non-resonance condition, which keeps
    the ``tr(rb A rb A)`` cross term and counts the fully diagonal terms once.

    Raises
    ------
    ResonanceError
        If ``check`` and the spectrum is degenerate or resonant.
    """
    if check and not is_non_resonant(hamiltonian.eigenvalues):
        raise ResonanceError("long-time prediction needs a non-degenerate, non-resonant spectrum")
    rho0 = np.asarray(rho0, dtype=complex)
    eigvecs = np.asarray(eigvecs, dtype=float)
    mats = ansatz_matrices(ansatz, hamiltonian.n_qubits)
    if eigvecs.shape[0] != len(mats):
        raise ValueError(f"eigvecs has {eigvecs.shape[0]} rows for {len(mats)} ansatz terms")
    U = hamiltonian.eigenvectors
    # everything in the Hamiltonian eigenbasis
    A = np.einsum("ji,jpq->ipq", eigvecs, U.conj().T @ mats @ U)
    rho_e = U.conj().T @ rho0 @ U
    p = np.diag(rho_e).real
    A2 = A @ A
    A2_diag = np.einsum("ipp->ip", A2).real
    A_diag = np.einsum("ipp->ip", A).real
    if not exact_dephasing:
        bracket = A2_diag @ p - (A_diag @ p) ** 2 - A2_diag @ p**2
    else:
        w = np.abs(rho_e) ** 2
        cross = np.einsum("a,iab,b,iba->i", p, A, p, A).real
        bracket = (
            A2_diag @ w.sum(axis=1)
            - cross
            - np.einsum("ia,ab,ib->i", A_diag, w, A_diag)
            + A_diag**2 @ p**2
        )
    return 2.0 * n_steps * bracket


def dephased_expectation(rho0: np.ndarray, hamiltonian: ParamHamiltonian, observable: np.ndarray) -> float:
    """Infinite-time average ``tr(rho_bar A)`` of an observable."""
    return float(np.einsum("ij,ji->", dephase(rho0, hamiltonian), observable).real)
