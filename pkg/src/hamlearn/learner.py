"""Coupling estimation from a tomography trajectory.

The couplings minimize the squared Frobenius residual of the discretized
Liouville equation,

    f(h) = C - 2 h.B + h.V.h,
    V_ij = -sum_n tr([L_i, rho_n][L_j, rho_n]),
    B_j  =  sum_n tr(-i[L_j, rho_n] (rho_{n+1} - rho_n) / dt),
    C    =  sum_n tr((rho_{n+1} - rho_n)^2) / dt^2,

with every sum running over the ``N_T - 1`` steps that have a forward
difference. Sums are accumulated in index order so a prefix of a trajectory
gives bit-identical totals to the truncated trajectory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .dynamics import ParamHamiltonian, assemble
from .pauli import build_basis, check_words, decompose, pauli_matrix
from .tomography import TomographyTrajectory, n_qubits_from_width, reconstruct

DEFAULT_PINV_THRESHOLD = 1e-10


class NoInformationError(ValueError):
    """The TQCM vanishes identically; the data constrain no coupling."""


def ansatz_matrices(ansatz: Sequence[str], n_qubits: int | None = None) -> np.ndarray:
    words = check_words(ansatz, n_qubits)
    return np.array([pauli_matrix(w) for w in words])


def _as_states(data) -> np.ndarray:
    if isinstance(data, TomographyTrajectory):
        return reconstruct(data.coeffs)
    data = np.asarray(data)
    if data.ndim == 2:
        return reconstruct(data)
    if data.ndim == 3:
        return data
    raise ValueError(f"expected coefficient rows or a stack of matrices, got shape {data.shape}")


def _commutators(states: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """``-i[L_i, rho_n]`` with shape (n_states, l, d*d); Hermitian blocks."""
    if states.shape[-1] != mats.shape[-1]:
        raise ValueError(f"state dim {states.shape[-1]} does not match ansatz dim {mats.shape[-1]}")
    k = -1j * (mats[None] @ states[:, None] - states[:, None] @ mats[None])
    return k.reshape(states.shape[0], mats.shape[0], -1)


def _qcm_terms(k: np.ndarray) -> np.ndarray:
    # tr(K_i K_j) = sum_pq K_i[p,q] conj(K_j[p,q]) for Hermitian K
    return np.einsum("nip,njp->nij", k, k.conj()).real


def qcm_at_time(rho: np.ndarray, ansatz: Sequence[str] | np.ndarray) -> np.ndarray:
    """Single-time covariance ``-tr([L_i, rho][L_j, rho])``."""
    mats = ansatz if isinstance(ansatz, np.ndarray) else ansatz_matrices(ansatz)
    rho = np.asarray(rho, dtype=complex)
    return _qcm_terms(_commutators(rho[None], mats))[0]


@dataclass(frozen=True)
class StepTerms:
    """Per-step contributions to ``V``, ``B`` and ``C`` (index n = 0..N_T-2)."""

    V: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def cumulative(self) -> "StepTerms":
        return StepTerms(np.cumsum(self.V, axis=0), np.cumsum(self.B, axis=0), np.cumsum(self.C, axis=0))

    def totals(self) -> tuple[np.ndarray, np.ndarray, float]:
        cum = self.cumulative()
        return cum.V[-1], cum.B[-1], float(cum.C[-1])


def step_terms(states: np.ndarray, mats: np.ndarray, dt: float, tqcm_states: np.ndarray | None = None) -> StepTerms:
    """Per-step statistics from reconstructed states.

    ``tqcm_states`` substitutes another set of snapshots (e.g. noiseless ones)
    for the covariance matrix only.
    """
    if states.shape[0] < 2:
        raise ValueError("need at least two snapshots")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    k = _commutators(states[:-1], mats)
    diffs = ((states[1:] - states[:-1]) / dt).reshape(states.shape[0] - 1, -1)
    b = np.einsum("nip,np->ni", k, diffs.conj())
    if np.max(np.abs(b.imag), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(b.real), initial=0.0)):
        raise ValueError("B has a non-negligible imaginary part; reconstructed states are not Hermitian")
    c = np.einsum("np,np->n", diffs, diffs.conj()).real
    if tqcm_states is not None:
        if tqcm_states.shape != states.shape:
            raise ValueError("tqcm_states must match states in shape")
        k = _commutators(tqcm_states[:-1], mats)
    return StepTerms(_qcm_terms(k), b.real, c)


def tqcm(tomo, ansatz: Sequence[str]) -> np.ndarray:
    """Total quantum covariance matrix summed over ``n = 0..N_T-2``."""
    states = _as_states(tomo)
    if states.shape[0] < 2:
        raise ValueError("need at least two snapshots")
    terms = _qcm_terms(_commutators(states[:-1], ansatz_matrices(ansatz)))
    return np.cumsum(terms, axis=0)[-1]


def b_vector(tomo, ansatz: Sequence[str], dt: float) -> np.ndarray:
    states = _as_states(tomo)
    return step_terms(states, ansatz_matrices(ansatz), dt).totals()[1]


def c_scalar(tomo, dt: float) -> float:
    states = _as_states(tomo)
    if states.shape[0] < 2:
        raise ValueError("need at least two snapshots")
    diffs = ((states[1:] - states[:-1]) / dt).reshape(states.shape[0] - 1, -1)
    return float(np.cumsum(np.einsum("np,np->n", diffs, diffs.conj()).real)[-1])


def cost(h: Sequence[float], V: np.ndarray, B: np.ndarray, C: float) -> float:
    """Quadratic residual ``C - 2 h.B + h.V.h``."""
    h = np.asarray(h, dtype=float)
    return float(C - 2.0 * h @ B + h @ V @ h)


def solve_couplings(
    V: np.ndarray, B: np.ndarray, rel_threshold: float = DEFAULT_PINV_THRESHOLD
) -> tuple[np.ndarray, bool, int]:
    """Stationary point of the cost via an eigenvalue-thresholded pseudo-inverse.

    Returns ``(h_opt, singular, rank)``. When ``singular`` is true the result is
    the minimum-norm stationary point and should not be trusted: some coupling
    directions were not constrained by the data.
    """
    V = np.asarray(V, dtype=float)
    B = np.asarray(B, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1] or B.shape != (V.shape[0],):
        raise ValueError(f"inconsistent shapes V{V.shape} and B{B.shape}")
    w, U = np.linalg.eigh(0.5 * (V + V.T))
    w_max = w[-1]
    if not w_max > 0:
        raise NoInformationError("trajectory carries no Hamiltonian information")
    keep = w >= rel_threshold * w_max
    rank = int(keep.sum())
    h = U[:, keep] @ ((U[:, keep].T @ B) / w[keep])
    return h, rank < len(w), rank


def inverse_frobenius(V: np.ndarray, scale: float = 1.0) -> float:
    """``sqrt(tr[(V / scale)^-2])``; infinite for a singular matrix."""
    w = np.linalg.eigvalsh(np.asarray(V, dtype=float) / scale)
    if w[0] <= 0 or w[0] < DEFAULT_PINV_THRESHOLD * w[-1]:
        return float("inf")
    return float(np.sqrt(np.sum(w**-2.0)))


REPORT_KEYS = (
    "h_opt", "V", "B", "C", "residual", "spectrum", "rank", "singular",
    "epsilon", "bound", "ipr", "spectrum_predicted", "config_echo",
)


def _jsonable(x: Any) -> Any:
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass(frozen=True)
class LearnReport:
    h_opt: np.ndarray
    V: np.ndarray
    B: np.ndarray
    C: float
    residual: float
    spectrum: np.ndarray
    inv_frobenius: float
    inv_frobenius_scaled: float
    singular: bool
    rank: int
    ansatz: tuple[str, ...] = ()
    epsilon: float | None = None
    bound: float | None = None
    ipr: float | None = None
    spectrum_predicted: np.ndarray | None = None
    config_echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: _jsonable(getattr(self, k)) for k in REPORT_KEYS}

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False)


class HamiltonianLearner(BaseEstimator):
    """Least-squares Hamiltonian learner on tomography coefficient rows.

    ``X`` holds one row per tomography time, columns ordered as in
    :func:`hamlearn.pauli.build_basis`.

    Parameters
    ----------
    ansatz : sequence of str
        Candidate interaction words ``L_i`` (traceless, distinct).
    dt : float
        Spacing between tomography times.
    pinv_threshold : float
        Relative eigenvalue cutoff of the TQCM pseudo-inverse.

    Attributes
    ----------
    coef_ : ndarray of shape (l,)
        Learned couplings.
    tqcm_, b_, c_ : the normal-equation statistics.
    spectrum_ : ndarray of shape (l,)
        Ascending TQCM eigenvalues.
    singular_, rank_ : pseudo-inverse diagnostics.
    """

    def __init__(self, ansatz=("Z",), dt=0.01, pinv_threshold=DEFAULT_PINV_THRESHOLD):
        self.ansatz = ansatz
        self.dt = dt
        self.pinv_threshold = pinv_threshold

    def _validate(self, X, min_samples=2, fitted=True):
        X = check_array(X, dtype=np.float64, ensure_min_samples=min_samples)
        n = n_qubits_from_width(X.shape[1])
        if fitted and n != self.n_qubits_:
            raise ValueError(f"X describes {n} qubits, learner was fitted on {self.n_qubits_}")
        return X, n

    def fit(self, X, y=None, exact_coeffs=None):
        """Estimate couplings.

        ``exact_coeffs``, if given, are noiseless rows of the same trajectory;
        the TQCM is then computed from them while ``B`` and ``C`` still use ``X``.
        """
        X, n = self._validate(X, fitted=False)
        mats = ansatz_matrices(self.ansatz, n)
        states = reconstruct(X)
        ref = None
        if exact_coeffs is not None:
            ref = reconstruct(check_array(exact_coeffs, dtype=np.float64))
        terms = step_terms(states, mats, float(self.dt), tqcm_states=ref)
        V, B, C = terms.totals()
        self.n_qubits_ = n
        self.n_steps_ = X.shape[0]
        self.tqcm_, self.b_, self.c_ = V, B, C
        self.spectrum_ = np.linalg.eigvalsh(V)
        try:
            self.coef_, self.singular_, self.rank_ = solve_couplings(V, B, self.pinv_threshold)
        except NoInformationError:
            self.coef_, self.singular_, self.rank_ = np.zeros(len(mats)), True, 0
        self.residual_ = cost(self.coef_, V, B, C)
        return self

    def hamiltonian(self) -> ParamHamiltonian:
        check_is_fitted(self, "coef_")
        return assemble(self.ansatz, self.coef_)

    def predict(self, X):
        """Model time derivative of each coefficient row, ``-i[H_opt, rho_n]``."""
        check_is_fitted(self, "coef_")
        X, n = self._validate(X, min_samples=1)
        states = reconstruct(X)
        h = np.tensordot(self.coef_, ansatz_matrices(self.ansatz, n), axes=1)
        deriv = -1j * (h @ states - states @ h)
        return decompose(deriv, build_basis(n))

    def score(self, X, y=None):
        """R^2 of the forward-difference derivatives explained by :meth:`predict`."""
        check_is_fitted(self, "coef_")
        X, _ = self._validate(X)
        target = np.diff(X, axis=0) / self.dt
        resid = target - self.predict(X[:-1])
        total = target - target.mean(axis=0)
        ss_tot = float(np.sum(total**2))
        return 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0

    def report(self, n_steps: int | None = None, l_norm: float = 1.0) -> LearnReport:
        check_is_fitted(self, "coef_")
        n_steps = self.n_steps_ if n_steps is None else n_steps
        return LearnReport(
            h_opt=self.coef_.copy(),
            V=self.tqcm_.copy(),
            B=self.b_.copy(),
            C=self.c_,
            residual=self.residual_,
            spectrum=self.spectrum_.copy(),
            inv_frobenius=inverse_frobenius(self.tqcm_),
            inv_frobenius_scaled=inverse_frobenius(self.tqcm_, l_norm**2 * n_steps),
            singular=bool(self.singular_),
            rank=int(self.rank_),
            ansatz=tuple(self.ansatz),
        )
