"""Simulated full-state tomography on the normalized Pauli basis.

Coefficient rows are ``r_a(t_n) = tr(O_a rho(t_n))``; column 0 is the identity
component, which is pinned to ``2**(-n/2)`` and never noised.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dynamics import StateTrajectory
from .pauli import OperatorBasis, build_basis, decompose

NOISE_DISTRIBUTIONS = ("uniform", "uniform_positive", "gaussian")


@dataclass(frozen=True)
class TomographyTrajectory:
    """Measured basis coefficients at the tomography times.

    ``n_measurements`` / ``n_shots`` are ``None`` for noiseless data or for
    trajectories imported from CSV without budget metadata.
    """

    times: np.ndarray
    coeffs: np.ndarray = field(repr=False)
    dt: float
    n_measurements: int | None = None
    n_shots: int | None = None
    noisy: bool = False
    seed: int | None = None

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_qubits(self) -> int:
        return n_qubits_from_width(self.coeffs.shape[1])

    def truncate(self, n_steps: int) -> "TomographyTrajectory":
        n_shots = None
        if self.n_measurements is not None:
            n_shots = shot_budget(self.n_qubits, n_steps, self.n_measurements)
        return replace(self, times=self.times[:n_steps], coeffs=self.coeffs[:n_steps], n_shots=n_shots)


def n_qubits_from_width(width: int) -> int:
    n = int(round(np.log(width) / np.log(4))) if width > 0 else 0
    if n < 1 or 4**n != width:
        raise ValueError(f"coefficient width {width} is not a power of 4")
    return n


def measure(traj: StateTrajectory, basis: OperatorBasis | None = None) -> TomographyTrajectory:
    """Exact coefficients of every snapshot (no statistical error)."""
    if basis is None:
        basis = build_basis(n_qubits_from_width(traj.dim**2))
    if traj.dim != basis.dim:
        raise ValueError(f"trajectory dim {traj.dim} does not match basis dim {basis.dim}")
    coeffs = decompose(traj.states, basis)
    coeffs[:, 0] = basis.normalization
    return TomographyTrajectory(traj.times.copy(), coeffs, traj.dt)


def noise_amplitude(n_qubits: int, n_measurements: int | float) -> float:
    """``1 / sqrt(2**n * N_M)``, the single-coefficient shot-noise scale."""
    return 1.0 / np.sqrt(2.0**n_qubits * n_measurements)


def _draw(rng: np.random.Generator, distribution: str, amplitude: float, size: int) -> np.ndarray:
    if distribution == "uniform":
        return rng.uniform(-amplitude, amplitude, size)
    if distribution == "uniform_positive":
        return rng.uniform(0.0, amplitude, size)
    if distribution == "gaussian":
        return rng.normal(0.0, amplitude, size)
    raise ValueError(f"unknown noise distribution {distribution!r}; choose from {NOISE_DISTRIBUTIONS}")


class ShotNoise(TransformerMixin, BaseEstimator):
    """Add the uniform shot-noise surrogate to tomography coefficient rows.

    Row ``n`` draws from its own stream seeded by ``(random_state, n)``, so a
    prefix of a long trajectory receives exactly the noise a short run would.

    Parameters
    ----------
    n_measurements : int
        Repetitions per measured observable, ``N_M``.
    distribution : {"uniform", "uniform_positive", "gaussian"}
        ``uniform`` draws on ``[-a, a]``; ``uniform_positive`` on ``[0, a]``;
        ``gaussian`` has standard deviation ``a``.
    random_state : int or None
        Base seed. ``None`` draws fresh entropy on each call.
    """

    def __init__(self, n_measurements=1000, distribution="uniform", random_state=None):
        self.n_measurements = n_measurements
        self.distribution = distribution
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if self.n_measurements < 1:
            raise ValueError(f"n_measurements must be >= 1, got {self.n_measurements}")
        if self.distribution not in NOISE_DISTRIBUTIONS:
            raise ValueError(f"unknown noise distribution {self.distribution!r}")
        self.n_qubits_ = n_qubits_from_width(X.shape[1])
        self.amplitude_ = noise_amplitude(self.n_qubits_, self.n_measurements)
        return self

    def transform(self, X):
        check_is_fitted(self, "amplitude_")
        X = check_array(X, dtype=np.float64, copy=True)
        if X.shape[1] != 4**self.n_qubits_:
            raise ValueError(f"expected {4 ** self.n_qubits_} columns, got {X.shape[1]}")
        width = X.shape[1] - 1
        entropy = None if self.random_state is None else int(self.random_state)
        base = np.random.SeedSequence(entropy)
        for n in range(X.shape[0]):
            rng = np.random.default_rng(np.random.SeedSequence([base.entropy, n]))
            X[n, 1:] += _draw(rng, self.distribution, self.amplitude_, width)
        return X


def add_noise(
    tomo: TomographyTrajectory,
    n_measurements: int,
    seed: int | None,
    distribution: str = "uniform",
) -> TomographyTrajectory:
    """Noisy copy of a noiseless tomography trajectory."""
    if tomo.noisy:
        raise ValueError("trajectory is already noisy")
    noise = ShotNoise(n_measurements=n_measurements, distribution=distribution, random_state=seed)
    coeffs = noise.fit_transform(tomo.coeffs)
    return replace(
        tomo,
        coeffs=coeffs,
        n_measurements=int(n_measurements),
        n_shots=shot_budget(tomo.n_qubits, len(tomo), n_measurements),
        noisy=True,
        seed=seed,
    )


def reconstruct(coeffs: np.ndarray, basis: OperatorBasis | None = None) -> np.ndarray:
    """``sum_a r_a O_a`` for one row or a stack of rows.

    The result is Hermitian with unit trace but is *not* projected onto the
    positive cone; noisy rows can give small negative eigenvalues.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if basis is None:
        basis = build_basis(n_qubits_from_width(coeffs.shape[-1]))
    if coeffs.shape[-1] != len(basis):
        raise ValueError(f"expected {len(basis)} coefficients, got {coeffs.shape[-1]}")
    return np.tensordot(coeffs, basis.elements, axes=(-1, 0))


def shot_budget(n_qubits: int, n_steps: int, n_measurements: int) -> int:
    """Total shots ``3**n * N_T * N_M`` for repeated full-state tomography."""
    for name, v in (("n_qubits", n_qubits), ("n_steps", n_steps), ("n_measurements", n_measurements)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v}")
    total = 3 ** int(n_qubits) * int(n_steps) * int(n_measurements)
    if total >= 2**63:
        raise OverflowError("shot budget exceeds a 64-bit integer")
    return total


def coeff_sigma(op: np.ndarray, rho: np.ndarray, n_measurements: int) -> float:
    """Standard error ``sqrt(tr(O^2 rho) / N_M)`` of one measured coefficient."""
    if n_measurements < 1:
        raise ValueError(f"n_measurements must be >= 1, got {n_measurements}")
    second_moment = np.einsum("ij,jk,ki->", op, op, rho).real
    return float(np.sqrt(max(second_moment, 0.0) / n_measurements))


def to_csv(tomo: TomographyTrajectory, path: str | os.PathLike | None = None) -> str:
    """Write ``t,<word>,...`` rows with 17 significant digits; returns the text."""
    basis = build_basis(tomo.n_qubits)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", *basis.labels])
    for t, row in zip(tomo.times, tomo.coeffs):
        writer.writerow([f"{t:.17g}", *(f"{v:.17g}" for v in row)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path: str | os.PathLike, rtol: float = 1e-9) -> TomographyTrajectory:
    """Load a trajectory written by :func:`to_csv` or by an external tool.

    Columns may appear in any order; they are matched to basis words by header.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[0] != "t":
        raise ValueError(f"{path}: first column must be 't', got {header[0]!r}")
    n = n_qubits_from_width(len(header) - 1)
    basis = build_basis(n)
    try:
        order = [header.index(w) for w in basis.labels]
    except ValueError as exc:
        raise ValueError(f"{path}: header does not list every {n}-qubit Pauli word") from exc
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if data.shape[0] < 2:
        raise ValueError(f"{path}: need at least two time rows")
    times = data[:, 0]
    steps = np.diff(times)
    dt = float(steps.mean())
    if dt <= 0 or not np.allclose(steps, dt, rtol=rtol, atol=0):
        raise ValueError(f"{path}: times are not uniformly spaced")
    coeffs = data[:, order]
    return TomographyTrajectory(times, coeffs, dt)
