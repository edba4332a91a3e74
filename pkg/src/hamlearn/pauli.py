"""Pauli-string words, the normalized Pauli operator basis and dense matrix algebra.

Words are uppercase strings over ``IXYZ``; the leftmost label acts on qubit 0,
which is the most significant factor of the Kronecker product.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_QUBITS = 6
"""Largest register accepted by :func:`build_basis` (4**6 = 4096 elements)."""

HERMITIAN_ATOL = 1e-12

_SINGLE = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
LABELS = "IXYZ"


class BasisSizeError(ValueError):
    """Raised when a dense basis would exceed :data:`MAX_QUBITS`."""


def check_word(word: str, n_qubits: int | None = None) -> str:
    """Validate a Pauli word and return it unchanged."""
    if not isinstance(word, str) or len(word) == 0:
        raise ValueError(f"Pauli word must be a non-empty string, got {word!r}")
    bad = set(word) - set(LABELS)
    if bad:
        raise ValueError(f"Pauli word {word!r} contains invalid labels {sorted(bad)}")
    if n_qubits is not None and len(word) != n_qubits:
        raise ValueError(f"Pauli word {word!r} has length {len(word)}, expected {n_qubits}")
    return word


def is_identity(word: str) -> bool:
    return set(word) == {"I"}


@functools.lru_cache(maxsize=4096)
def _pauli_matrix_cached(word: str) -> np.ndarray:
    out = functools.reduce(np.kron, (_SINGLE[c] for c in word))
    out.setflags(write=False)
    return out


def pauli_matrix(word: str) -> np.ndarray:
    """Unnormalized tensor product of single-site Pauli matrices.

    >>> pauli_matrix("Z").real
    array([[ 1.,  0.],
           [ 0., -1.]])
    """
    return _pauli_matrix_cached(check_word(word)).copy()


def all_words(n_qubits: int) -> list[str]:
    """All ``4**n_qubits`` words, identity first then lexicographic in ``IXYZ`` order."""
    return ["".join(p) for p in itertools.product(LABELS, repeat=n_qubits)]


@dataclass(frozen=True)
class OperatorBasis:
    """Hilbert-Schmidt orthonormal basis of Hermitian operators.

    Attributes
    ----------
    labels : tuple of str
        Pauli words in basis order; ``labels[0]`` is the identity.
    elements : ndarray, shape (4**n, 2**n, 2**n)
        Normalized Pauli products ``P / sqrt(2**n)``.
    normalization : float
        The common factor ``2**(-n/2)``.
    """

    labels: tuple[str, ...]
    elements: np.ndarray
    normalization: float

    @property
    def n_qubits(self) -> int:
        return len(self.labels[0])

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, word: str) -> int:
        return self.labels.index(word)


@functools.lru_cache(maxsize=8)
def build_basis(n_qubits: int) -> OperatorBasis:
    """Normalized Pauli basis on ``n_qubits`` qubits (cached, read-only)."""
    if not isinstance(n_qubits, (int, np.integer)) or n_qubits < 1:
        raise ValueError(f"n_qubits must be a positive integer, got {n_qubits!r}")
    if n_qubits > MAX_QUBITS:
        raise BasisSizeError(
            f"dense basis of {4 ** n_qubits} elements requested; "
            f"n_qubits is capped at {MAX_QUBITS}"
        )
    labels = tuple(all_words(int(n_qubits)))
    norm = 2.0 ** (-n_qubits / 2)
    elements = np.array([_pauli_matrix_cached(w) for w in labels]) * norm
    elements.setflags(write=False)
    return OperatorBasis(labels=labels, elements=elements, normalization=norm)


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def is_hermitian(a: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.allclose(a, a.conj().T, rtol=0, atol=atol)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return ``AB - BA``."""
    a, b = _check_pair(a, b)
    return a @ b - b @ a


def hs_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Hilbert-Schmidt product ``tr(AB)`` of two Hermitian matrices."""
    a, b = _check_pair(a, b)
    # tr(AB) without forming the product
    value = np.einsum("ij,ji->", a, b)
    scale = max(1.0, abs(value))
    if abs(value.imag) > 1e-12 * scale:
        raise ValueError(f"tr(AB) has imaginary part {value.imag:.3e}; inputs not Hermitian")
    return float(value.real)


def operator_norm(a: np.ndarray) -> float:
    """Largest absolute eigenvalue of a Hermitian matrix."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    try:
        eigvals = np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ArithmeticError(f"eigensolver failed: {exc}") from exc
    return float(np.max(np.abs(eigvals)))


def decompose(matrix: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """Real coefficients ``tr(O_a M)`` of a Hermitian matrix over ``basis``."""
    matrix = np.asarray(matrix)
    if matrix.shape[-2:] != (basis.dim, basis.dim):
        raise ValueError(f"matrix shape {matrix.shape} does not match basis dim {basis.dim}")
    return np.einsum("aij,...ji->...a", basis.elements, matrix).real


def check_words(words: Sequence[str], n_qubits: int | None = None) -> tuple[str, ...]:
    """Validate a list of interaction words: same length, traceless, distinct."""
    words = tuple(words)
    if len(words) == 0:
        raise ValueError("at least one interaction word is required")
    n = n_qubits if n_qubits is not None else len(words[0])
    for w in words:
        check_word(w, n)
        if is_identity(w):
            raise ValueError("identity word is not traceless and cannot be an interaction")
    dup = sorted({w for w in words if words.count(w) > 1})
    if dup:
        raise ValueError(f"duplicate interaction words: {dup}")
    return words
