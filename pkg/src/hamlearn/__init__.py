"""Hamiltonian learning from time-dependent state tomography of a single state."""
from .analysis import (
    delta_b_bound,
    error_bound,
    ipr,
    optimal_state,
    predicted_tqcm_spectrum,
    relative_error,
)
from .dynamics import ParamHamiltonian, StateTrajectory, assemble, dephase, evolve, evolve_unitary
from .experiments import ExperimentConfig, run_learn, scan_shots, scan_states
from .learner import HamiltonianLearner, LearnReport, b_vector, c_scalar, solve_couplings, tqcm
from .pauli import build_basis, commutator, hs_inner, operator_norm, pauli_matrix
from .tomography import ShotNoise, TomographyTrajectory, add_noise, measure, reconstruct, shot_budget

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "HamiltonianLearner", "LearnReport", "ParamHamiltonian", "ShotNoise",
    "StateTrajectory", "TomographyTrajectory", "add_noise", "assemble", "b_vector", "build_basis",
    "c_scalar", "commutator", "delta_b_bound", "dephase", "error_bound", "evolve", "evolve_unitary",
    "hs_inner", "ipr", "measure", "operator_norm", "optimal_state", "pauli_matrix",
    "predicted_tqcm_spectrum", "reconstruct", "relative_error", "run_learn", "scan_shots",
    "scan_states", "shot_budget", "solve_couplings", "tqcm",
]
