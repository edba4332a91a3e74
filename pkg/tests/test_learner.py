import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from conftest import random_density
from hamlearn.dynamics import assemble, evolve, pure_state
from hamlearn.learner import (
    HamiltonianLearner,
    LearnReport,
    NoInformationError,
    REPORT_KEYS,
    ansatz_matrices,
    b_vector,
    c_scalar,
    cost,
    inverse_frobenius,
    qcm_at_time,
    solve_couplings,
    step_terms,
    tqcm,
)
from hamlearn.pauli import pauli_matrix
from hamlearn.tomography import measure

WORDS = ("XX", "YZ", "ZI", "IY")


def _superop_tqcm(states, mats):
    """Independent oracle: V from vectorized adjoint superoperators."""
    d = mats.shape[-1]
    eye = np.eye(d)
    ads = [np.kron(L, eye) - np.kron(eye, L.T) for L in mats]
    V = np.zeros((len(mats), len(mats)))
    for rho in states[:-1]:
        v = rho.reshape(-1)
        cols = np.stack([A @ v for A in ads], axis=1)
        V += (cols.conj().T @ cols).real
    return V


def _lstsq_couplings(states, mats, dt):
    """Independent oracle: least squares of forward differences against -i[L, rho]."""
    rows, rhs = [], []
    for a, b in zip(states[:-1], states[1:]):
        rows.append(np.stack([(-1j * (L @ a - a @ L)).reshape(-1) for L in mats], axis=1))
        rhs.append(((b - a) / dt).reshape(-1))
    A, y = np.concatenate(rows), np.concatenate(rhs)
    A = np.concatenate([A.real, A.imag])
    y = np.concatenate([y.real, y.imag])
    return np.linalg.lstsq(A, y, rcond=None)[0]


def _run(rng, n_steps=60, dt=0.02):
    H = assemble(WORDS, (0.7, -1.3, 2.1, 0.4))
    traj = evolve(random_density(rng, 4, rank=1), H, dt, n_steps)
    return H, traj


def test_tqcm_matches_superoperator_oracle(rng):
    _, traj = _run(rng)
    mats = ansatz_matrices(WORDS)
    assert np.allclose(tqcm(traj.states, WORDS), _superop_tqcm(traj.states, mats), rtol=0, atol=1e-10)


def test_tqcm_from_coefficients_equals_from_states(rng):
    _, traj = _run(rng)
    tomo = measure(traj)
    assert np.allclose(tqcm(tomo, WORDS), tqcm(traj.states, WORDS), atol=1e-10)


def test_couplings_match_lstsq_oracle(rng):
    _, traj = _run(rng)
    mats = ansatz_matrices(WORDS)
    V, B, _ = step_terms(traj.states, mats, 0.02).totals()
    h, singular, rank = solve_couplings(V, B)
    assert not singular and rank == 4
    assert np.allclose(h, _lstsq_couplings(traj.states, mats, 0.02), atol=1e-9)


def test_euler_data_recovered_exactly(rng):
    """States obeying the forward-difference equation give B = V h exactly."""
    h_true = np.array([0.7, -1.3, 2.1, 0.4])
    mats = ansatz_matrices(WORDS)
    H = np.tensordot(h_true, mats, axes=1)
    dt = 1e-3
    rho = random_density(rng, 4, rank=1)
    states = [rho]
    for _ in range(50):
        states.append(states[-1] - 1j * dt * (H @ states[-1] - states[-1] @ H))
    states = np.array(states)
    V, B, C = step_terms(states, mats, dt).totals()
    h, _, _ = solve_couplings(V, B)
    assert np.allclose(h, h_true, atol=1e-9)
    assert cost(h, V, B, C) == pytest.approx(0.0, abs=1e-6 * C)


def test_single_qubit_rotation():
    """A qubit precessing about Z in a known closed form."""
    omega, dt, n = 1.7, 1e-3, 200
    t = np.arange(n) * dt
    psi = np.stack([np.exp(-1j * omega * t), np.exp(1j * omega * t)], axis=1) / np.sqrt(2)
    states = np.einsum("ni,nj->nij", psi, psi.conj())
    V, B, _ = step_terms(states, ansatz_matrices(("X", "Y", "Z")), dt).totals()
    h, singular, rank = solve_couplings(V, B)
    # forward-difference bias is of order (omega dt)^2
    assert h[2] == pytest.approx(omega, rel=1e-5)
    assert abs(h[0]) < 1e-3 and abs(h[1]) < 1e-3


def test_prefix_sums_are_bit_identical(rng):
    _, traj = _run(rng, n_steps=40)
    mats = ansatz_matrices(WORDS)
    cum = step_terms(traj.states, mats, 0.02).cumulative()
    V, B, C = step_terms(traj.states[:25], mats, 0.02).totals()
    assert np.array_equal(cum.V[23], V)
    assert np.array_equal(cum.B[23], B)
    assert cum.C[23] == C


def test_b_and_c_helpers(rng):
    _, traj = _run(rng)
    mats = ansatz_matrices(WORDS)
    _, B, C = step_terms(traj.states, mats, 0.02).totals()
    assert np.allclose(b_vector(traj.states, WORDS, 0.02), B)
    assert c_scalar(traj.states, 0.02) == pytest.approx(C)


def test_cost_is_minimized_at_solution(rng):
    _, traj = _run(rng)
    V, B, C = step_terms(traj.states, ansatz_matrices(WORDS), 0.02).totals()
    h, _, _ = solve_couplings(V, B)
    f0 = cost(h, V, B, C)
    for _ in range(10):
        assert cost(h + 0.01 * rng.normal(size=4), V, B, C) > f0


def test_conserved_ansatz_term_flags_singular():
    # H commutes with ZI and the state is a ZI eigenstate: ZI is invisible
    H = assemble(("ZI", "ZX", "IX"), (1.0, 0.5, 0.3))
    traj = evolve(pure_state([1, 0, 0, 0]), H, 0.01, 50)
    V, B, _ = step_terms(traj.states, ansatz_matrices(H.interactions), 0.01).totals()
    _, singular, rank = solve_couplings(V, B)
    assert singular and rank < 3
    assert inverse_frobenius(V) == np.inf


def test_no_information_raises():
    with pytest.raises(NoInformationError):
        solve_couplings(np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        solve_couplings(np.eye(2), np.zeros(3))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**20), n_states=st.integers(2, 6))
def test_qcm_symmetric_psd(seed, n_states):
    rng = np.random.default_rng(seed)
    states = np.array([random_density(rng, 4) for _ in range(n_states)])
    V = tqcm(states, WORDS)
    assert np.allclose(V, V.T, atol=1e-9)
    assert np.linalg.eigvalsh(V).min() >= -1e-9
    single = qcm_at_time(states[0], WORDS)
    assert np.linalg.eigvalsh(single).min() >= -1e-9


class TestEstimator:
    def _data(self, rng):
        _, traj = _run(rng, n_steps=80, dt=0.005)
        return measure(traj).coeffs

    def test_params_and_clone(self):
        est = HamiltonianLearner(ansatz=WORDS, dt=0.005)
        assert est.get_params()["ansatz"] == WORDS
        c = clone(est).set_params(dt=0.01)
        assert c.dt == 0.01 and est.dt == 0.005

    def test_fit_predict_score(self, rng):
        X = self._data(rng)
        est = HamiltonianLearner(ansatz=WORDS, dt=0.005).fit(X)
        assert np.allclose(est.coef_, [0.7, -1.3, 2.1, 0.4], atol=0.02)
        assert est.predict(X).shape == X.shape
        assert est.score(X) > 0.999
        H = est.hamiltonian()
        assert H.interactions == WORDS

    def test_predict_unfitted_and_width_checks(self, rng):
        X = self._data(rng)
        est = HamiltonianLearner(ansatz=WORDS, dt=0.005)
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            est.predict(X)
        est.fit(X)
        with pytest.raises(ValueError):
            est.predict(np.zeros((3, 4)))
        with pytest.raises(ValueError):
            est.fit(X[:1])

    def test_exact_coeffs_changes_only_tqcm(self, rng):
        X = self._data(rng)
        noisy = X + np.r_[0, np.full(15, 1e-3)]
        a = HamiltonianLearner(ansatz=WORDS, dt=0.005).fit(noisy, exact_coeffs=X)
        b = HamiltonianLearner(ansatz=WORDS, dt=0.005).fit(noisy)
        ref = HamiltonianLearner(ansatz=WORDS, dt=0.005).fit(X)
        assert np.allclose(a.tqcm_, ref.tqcm_)
        assert np.array_equal(a.b_, b.b_)

    def test_zero_information(self):
        X = np.tile(np.r_[0.5, np.zeros(15)], (5, 1))  # maximally mixed, static
        est = HamiltonianLearner(ansatz=WORDS, dt=0.1).fit(X)
        assert est.singular_ and est.rank_ == 0
        assert np.all(est.coef_ == 0)

    def test_report_json(self, rng):
        X = self._data(rng)
        rep = HamiltonianLearner(ansatz=WORDS, dt=0.005).fit(X).report()
        assert isinstance(rep, LearnReport)
        doc = json.loads(rep.to_json())
        assert tuple(doc) == REPORT_KEYS
        assert doc["epsilon"] is None and doc["singular"] is False


def test_report_json_nulls_nonfinite():
    rep = LearnReport(
        h_opt=np.zeros(1), V=np.zeros((1, 1)), B=np.zeros(1), C=0.0, residual=0.0,
        spectrum=np.zeros(1), inv_frobenius=np.inf, inv_frobenius_scaled=np.inf,
        singular=True, rank=0, bound=np.inf,
    )
    assert json.loads(rep.to_json())["bound"] is None


def test_ansatz_matrices_are_paulis():
    assert np.array_equal(ansatz_matrices(("ZX",))[0], pauli_matrix("ZX"))
