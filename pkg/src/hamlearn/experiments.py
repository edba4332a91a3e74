"""End-to-end experiment runners driven by a JSON-compatible configuration."""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from . import analysis
from .dynamics import (
    SCHEDULES,
    ParamHamiltonian,
    assemble,
    depolarize,
    evolve,
    evolve_unitary,
    pure_state,
)
from .learner import (
    LearnReport,
    NoInformationError,
    ansatz_matrices,
    cost,
    inverse_frobenius,
    solve_couplings,
    step_terms,
)
from .pauli import MAX_QUBITS, check_words
from .tomography import add_noise, measure, reconstruct, shot_budget, NOISE_DISTRIBUTIONS

logger = logging.getLogger(__name__)

CROSS_RESONANCE_TERMS = ("IX", "IY", "IZ", "ZI", "ZX", "ZY", "ZZ")
CROSS_RESONANCE_COUPLINGS = (-1.548, -0.004, 0.006, 9.578, 5.316, -0.225, -0.340)
"""Two-transmon cross-resonance couplings in MHz."""

BUILTIN_HAMILTONIANS = ("cross_resonance", "cross_resonance_eq10", "random_2body_3q")
NAMED_STATES = ("plus_all", "bell_plus", "ghz", "psi_opt", "eigen_pair", "random")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` lists every problem found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def two_body_words(n_qubits: int) -> tuple[str, ...]:
    """All words with exactly two non-identity sites, site pairs in lexicographic order."""
    words = []
    for i, j in itertools.combinations(range(n_qubits), 2):
        for a, b in itertools.product("XYZ", repeat=2):
            w = ["I"] * n_qubits
            w[i], w[j] = a, b
            words.append("".join(w))
    return tuple(words)


def one_body_words(n_qubits: int) -> tuple[str, ...]:
    words = []
    for i in range(n_qubits):
        for a in "XYZ":
            w = ["I"] * n_qubits
            w[i] = a
            words.append("".join(w))
    return tuple(words)


def random_couplings(n_terms: int, seed: int, low: float = -5.0, high: float = 5.0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(low, high, n_terms)


def haar_state(n_qubits: int, seed: int) -> np.ndarray:
    """Haar-random pure state vector from normalized complex Gaussian amplitudes."""
    rng = np.random.default_rng(seed)
    d = 2**n_qubits
    z = rng.normal(size=d) + 1j * rng.normal(size=d)
    return z / np.linalg.norm(z)


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment configuration.

    ``hamiltonian`` holds explicit ``(word, coupling)`` terms; it is empty in
    unitary-schedule mode, where ``schedule`` names the builtin gate.
    """

    n_qubits: int
    hamiltonian: tuple[tuple[str, float], ...]
    ansatz: tuple[str, ...]
    initial_state: Any
    dt: float = 0.01
    n_steps: int = 333
    n_steps_schedule: tuple[int, ...] | None = None
    n_measurements: int = 1000
    seed: int = 0
    noise: bool = True
    noise_distribution: str = "uniform"
    depolarization: float = 0.0
    pinv_threshold: float = 1e-10
    exact_tqcm: bool = False
    schedule: str | None = None
    outputs: Mapping[str, str] = field(default_factory=dict)

    @property
    def unitary_mode(self) -> bool:
        return self.schedule is not None

    @property
    def true_words(self) -> tuple[str, ...]:
        return tuple(w for w, _ in self.hamiltonian)

    @property
    def true_couplings(self) -> np.ndarray:
        return np.array([c for _, c in self.hamiltonian], dtype=float)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hamiltonian"] = [{"pauli": w, "coupling": c} for w, c in self.hamiltonian]
        d["ansatz"] = list(self.ansatz)
        d["n_steps_schedule"] = None if self.n_steps_schedule is None else list(self.n_steps_schedule)
        d["outputs"] = dict(self.outputs)
        return d

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ExperimentConfig":
        errors: list[str] = []
        known = {
            "n_qubits", "hamiltonian", "ansatz", "initial_state", "dt", "n_steps",
            "n_steps_schedule", "n_measurements", "seed", "noise", "noise_distribution",
            "depolarization", "pinv_threshold", "exact_tqcm", "schedule", "outputs",
        }
        for key in sorted(set(raw) - known):
            errors.append(f"unknown key {key!r}")
        seed = raw.get("seed", 0)
        if not _is_int(seed):
            errors.append(f"seed must be an integer, got {seed!r}")
            seed = 0

        terms: tuple[tuple[str, float], ...] = ()
        schedule = raw.get("schedule")
        ham_entry = raw.get("hamiltonian")
        if isinstance(ham_entry, str) and ham_entry in SCHEDULES:
            schedule, ham_entry = ham_entry, None
        if schedule is not None:
            if schedule not in SCHEDULES:
                errors.append(f"unknown schedule {schedule!r}; choose from {sorted(SCHEDULES)}")
            if ham_entry is not None:
                errors.append("give either a Hamiltonian or a unitary schedule, not both")
        elif ham_entry is None:
            errors.append("missing 'hamiltonian'")
        else:
            try:
                terms = resolve_hamiltonian(ham_entry, int(seed))
            except (ValueError, TypeError, KeyError) as exc:
                errors.append(f"hamiltonian: {exc}")

        ansatz = raw.get("ansatz")
        if ansatz is None:
            if schedule is not None:
                errors.append("unitary-schedule mode requires an explicit 'ansatz'")
            ansatz = [w for w, _ in terms]
        n_qubits = raw.get("n_qubits")
        if n_qubits is None:
            n_qubits = len(ansatz[0]) if ansatz else (2 if schedule else None)
        if not _is_int(n_qubits) or not 1 <= n_qubits <= MAX_QUBITS:
            errors.append(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")
            n_qubits = None
        if schedule is not None and n_qubits not in (None, 2):
            errors.append(f"schedule {schedule!r} acts on 2 qubits")
        try:
            ansatz = check_words(ansatz, n_qubits)
        except (ValueError, TypeError) as exc:
            errors.append(f"ansatz: {exc}")
        if terms and n_qubits is not None and any(len(w) != n_qubits for w, _ in terms):
            errors.append("hamiltonian words do not match n_qubits")

        values: dict[str, Any] = {}
        for key, kind, default, ok, msg in (
            ("dt", float, 0.01, lambda v: v > 0, "must be > 0"),
            ("n_steps", int, 333, lambda v: v >= 2, "must be >= 2"),
            ("n_measurements", int, 1000, lambda v: v >= 1, "must be >= 1"),
            ("depolarization", float, 0.0, lambda v: 0 <= v <= 1, "must lie in [0, 1]"),
            ("pinv_threshold", float, 1e-10, lambda v: 0 <= v < 1, "must lie in [0, 1)"),
        ):
            v = raw.get(key, default)
            good_type = _is_int(v) if kind is int else (_is_number(v))
            if not good_type or not ok(v):
                errors.append(f"{key} {msg} (got {v!r})")
                v = default
            values[key] = kind(v)

        sched = raw.get("n_steps_schedule")
        if sched is not None:
            if (
                not isinstance(sched, (list, tuple))
                or len(sched) == 0
                or not all(_is_int(v) and v >= 2 for v in sched)
                or any(b <= a for a, b in zip(sched, sched[1:]))
            ):
                errors.append("n_steps_schedule must be a strictly increasing list of integers >= 2")
                sched = None
            else:
                sched = tuple(int(v) for v in sched)

        noise = raw.get("noise", True)
        distribution = raw.get("noise_distribution", "uniform")
        if isinstance(noise, Mapping):
            distribution = noise.get("distribution", distribution)
            noise = noise.get("enabled", True)
        if not isinstance(noise, bool):
            errors.append(f"noise must be a boolean, got {noise!r}")
            noise = True
        if distribution not in NOISE_DISTRIBUTIONS:
            errors.append(f"noise_distribution must be one of {NOISE_DISTRIBUTIONS}, got {distribution!r}")
        exact_tqcm = raw.get("exact_tqcm", False)
        if not isinstance(exact_tqcm, bool):
            errors.append(f"exact_tqcm must be a boolean, got {exact_tqcm!r}")

        state = raw.get("initial_state")
        if state is None:
            errors.append("missing 'initial_state'")
        elif n_qubits is not None:
            errors.extend(_check_state_spec(state, n_qubits, unitary=schedule is not None))

        outputs = raw.get("outputs", {})
        if isinstance(outputs, str):
            outputs = {"dir": outputs}
        if not isinstance(outputs, Mapping):
            errors.append("outputs must be a mapping of names to paths")
            outputs = {}

        if errors:
            raise ConfigError(errors)
        return cls(
            n_qubits=int(n_qubits),
            hamiltonian=terms,
            ansatz=tuple(ansatz),
            initial_state=state,
            n_steps_schedule=sched,
            seed=int(seed),
            noise=noise,
            noise_distribution=distribution,
            exact_tqcm=exact_tqcm,
            schedule=schedule,
            outputs=dict(outputs),
            **values,
        )


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def resolve_hamiltonian(ham_entry: Any, seed: int = 0) -> tuple[tuple[str, float], ...]:
    """Turn a term list or a builtin name into explicit ``(word, coupling)`` terms."""
    if isinstance(ham_entry, str):
        ham_entry = {"builtin": ham_entry}
    if isinstance(ham_entry, Mapping):
        name = ham_entry.get("builtin")
        if name in ("cross_resonance", "cross_resonance_eq10"):
            return tuple(zip(CROSS_RESONANCE_TERMS, CROSS_RESONANCE_COUPLINGS))
        if name == "random_2body_3q":
            words = two_body_words(3)
            h = random_couplings(len(words), int(ham_entry.get("seed", seed)))
            return tuple(zip(words, (float(c) for c in h)))
        raise ValueError(f"unknown builtin Hamiltonian {name!r}; choose from {BUILTIN_HAMILTONIANS}")
    if not isinstance(ham_entry, (list, tuple)) or not ham_entry:
        raise ValueError("expected a builtin name or a non-empty list of {pauli, coupling} terms")
    terms = []
    for item in ham_entry:
        word, coupling = item["pauli"], item["coupling"]
        if not _is_number(coupling):
            raise ValueError(f"coupling for {word!r} is not a number")
        terms.append((str(word), float(coupling)))
    check_words([w for w, _ in terms])
    return tuple(terms)


def _check_state_spec(state: Any, n_qubits: int, unitary: bool) -> list[str]:
    d = 2**n_qubits
    if isinstance(state, str):
        if state in ("psi_opt", "eigen_pair") and unitary:
            return [f"initial_state {state!r} needs a Hamiltonian, not a unitary schedule"]
        if state == "bell_plus" and n_qubits != 2:
            return ["bell_plus is a two-qubit state"]
        if state in NAMED_STATES:
            return []
        if set(state) <= {"0", "1"} and len(state) == n_qubits:
            return []
        return [f"unknown initial_state {state!r}"]
    if isinstance(state, Mapping):
        if "random" in state:
            return [] if _is_int(state["random"]) else ["random state seed must be an integer"]
        if "amplitudes" in state:
            amps = state["amplitudes"]
            if not isinstance(amps, (list, tuple)) or len(amps) != d:
                return [f"amplitudes must list {d} entries"]
            try:
                vec = np.array([_amplitude(v) for v in amps])
            except (TypeError, ValueError, IndexError):
                return ["amplitudes must be numbers or [re, im] pairs"]
            return [] if np.linalg.norm(vec) > 0 and np.all(np.isfinite(vec)) else ["amplitudes must be finite and not all zero"]
    return [f"unsupported initial_state {state!r}"]


def _amplitude(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def initial_state_vector(state: Any, n_qubits: int, hamiltonian: ParamHamiltonian | None, seed: int = 0) -> np.ndarray:
    """State vector for a config ``initial_state`` entry (``0`` maps to spin up)."""
    d = 2**n_qubits
    if isinstance(state, Mapping):
        if "random" in state:
            return haar_state(n_qubits, int(state["random"]))
        psi = np.array([_amplitude(v) for v in state["amplitudes"]], dtype=complex)
        return psi / np.linalg.norm(psi)
    if state == "random":
        return haar_state(n_qubits, seed)
    if state == "plus_all":
        return np.full(d, d**-0.5, dtype=complex)
    if state in ("bell_plus", "ghz"):
        psi = np.zeros(d, dtype=complex)
        psi[0] = psi[-1] = 2**-0.5
        return psi
    if state in ("psi_opt", "eigen_pair"):
        if hamiltonian is None:
            raise ConfigError([f"initial_state {state!r} needs a Hamiltonian"])
        if state == "psi_opt":
            return analysis.optimal_vector(hamiltonian)
        return (hamiltonian.eigenvectors[:, 0] + hamiltonian.eigenvectors[:, 1]) / np.sqrt(2)
    psi = np.zeros(d, dtype=complex)
    psi[int(state, 2)] = 1.0
    return psi


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    if not isinstance(raw, Mapping):
        raise ConfigError(["config must be a JSON object"])
    return ExperimentConfig.from_dict(raw)


@dataclass(frozen=True)
class Simulation:
    """Everything produced before learning: truth, states and tomography."""

    config: ExperimentConfig
    hamiltonian: ParamHamiltonian | None
    rho0: np.ndarray
    exact: np.ndarray
    measured: np.ndarray

    @property
    def h_true(self) -> np.ndarray | None:
        """Truth expressed on the ansatz, or ``None`` if not representable."""
        if self.hamiltonian is None:
            return None
        cfg = self.config
        if not set(cfg.true_words) <= set(cfg.ansatz):
            return None
        lookup = dict(cfg.hamiltonian)
        return np.array([lookup.get(w, 0.0) for w in cfg.ansatz])


def simulate(config: ExperimentConfig, n_steps: int | None = None) -> Simulation:
    """Propagate, measure and (optionally) noise a trajectory."""
    n_steps = config.n_steps if n_steps is None else n_steps
    ham = None if config.unitary_mode else assemble(config.true_words, config.true_couplings)
    psi = initial_state_vector(config.initial_state, config.n_qubits, ham, config.seed)
    rho0 = pure_state(psi)
    if config.depolarization:
        rho0 = depolarize(rho0, config.depolarization)
    if ham is None:
        traj = evolve_unitary(rho0, SCHEDULES[config.schedule], config.dt, n_steps)
    else:
        traj = evolve(rho0, ham, config.dt, n_steps)
    tomo = measure(traj)
    measured = tomo
    if config.noise:
        measured = add_noise(tomo, config.n_measurements, config.seed, config.noise_distribution)
    return Simulation(config, ham, rho0, tomo.coeffs, measured.coeffs)


def _accuracy_fields(sim: Simulation, V: np.ndarray, h_opt: np.ndarray, n_steps: int) -> dict:
    cfg = sim.config
    out: dict[str, Any] = {"epsilon": None, "bound": None, "ipr": None, "spectrum_predicted": None}
    ham = sim.hamiltonian
    if ham is None:
        return out
    out["ipr"] = analysis.ipr(sim.rho0, ham)
    h_true = sim.h_true
    if h_true is not None:
        out["epsilon"] = analysis.relative_error(h_opt, h_true)
    # Pauli-product interactions all have unit operator norm
    out["bound"] = analysis.error_bound(
        V, n_steps, cfg.n_qubits, shot_budget(cfg.n_qubits, n_steps, cfg.n_measurements),
        cfg.dt, ham.norm, l_norm=1.0,
    )
    if analysis.is_non_resonant(ham.eigenvalues):
        _, vecs = np.linalg.eigh(V)
        out["spectrum_predicted"] = analysis.predicted_tqcm_spectrum(
            sim.rho0, ham, vecs, cfg.ansatz, n_steps - 1, check=False
        )
    return out


def _report(sim: Simulation, V, B, C, n_steps: int) -> LearnReport:
    cfg = sim.config
    try:
        h, singular, rank = solve_couplings(V, B, cfg.pinv_threshold)
    except NoInformationError:
        logger.warning("TQCM vanishes; no coupling is constrained")
        h, singular, rank = np.zeros(len(cfg.ansatz)), True, 0
    acc = _accuracy_fields(sim, V, h, n_steps)
    echo = cfg.to_dict()
    echo["n_steps"] = n_steps
    return LearnReport(
        h_opt=h,
        V=V,
        B=B,
        C=C,
        residual=cost(h, V, B, C),
        spectrum=np.linalg.eigvalsh(V),
        inv_frobenius=inverse_frobenius(V),
        inv_frobenius_scaled=inverse_frobenius(V, n_steps),
        singular=singular,
        rank=rank,
        ansatz=cfg.ansatz,
        config_echo=echo,
        **acc,
    )


def _terms(sim: Simulation):
    cfg = sim.config
    mats = ansatz_matrices(cfg.ansatz, cfg.n_qubits)
    states = reconstruct(sim.measured)
    ref = reconstruct(sim.exact) if cfg.exact_tqcm else None
    return step_terms(states, mats, cfg.dt, tqcm_states=ref)


def run_learn(config: ExperimentConfig) -> LearnReport:
    """Simulate, measure, learn and analyze one configuration."""
    sim = simulate(config)
    V, B, C = _terms(sim).totals()
    return _report(sim, V, B, C, config.n_steps)


SCAN_HEADER = ("N_S", "N_T", "epsilon", "inv_frobenius_scaled", "ipr", "seed")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


@dataclass(frozen=True)
class ScanResult:
    rows: tuple[tuple, ...]

    def to_csv(self, path: str | os.PathLike | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SCAN_HEADER)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def column(self, name: str) -> np.ndarray:
        i = SCAN_HEADER.index(name)
        return np.array([np.nan if r[i] is None else r[i] for r in self.rows], dtype=float)


def _sorted(rows) -> ScanResult:
    return ScanResult(tuple(sorted(rows, key=lambda r: (r[1], r[5]))))


def scan_shots(config: ExperimentConfig) -> ScanResult:
    """Error and information versus shot budget along one long trajectory.

    Each row uses the first ``N_T`` snapshots of the same run, so rows are
    nested observations rather than independent experiments.
    """
    schedule = config.n_steps_schedule or (config.n_steps,)
    sim = simulate(config, n_steps=max(schedule))
    cum = _terms(sim).cumulative()
    rows = []
    for n_steps in schedule:
        report = _report(sim, cum.V[n_steps - 2], cum.B[n_steps - 2], float(cum.C[n_steps - 2]), n_steps)
        n_shots = shot_budget(config.n_qubits, n_steps, config.n_measurements)
        rows.append((n_shots, n_steps, report.epsilon, report.inv_frobenius_scaled, report.ipr, config.seed))
    return _sorted(rows)


def scan_states(
    config: ExperimentConfig,
    count: int,
    include_optimal: bool = False,
    include_eigenstate: bool = False,
) -> ScanResult:
    """IPR against TQCM information for Haar-random initial states.

    Row ``k`` uses state and noise seed ``config.seed + k``; the TQCM is always
    computed from noiseless states. Optional extra rows carry seed ``-1`` (the
    optimal state) and ``-2`` (the ground state).
    """
    if count < 2:
        raise ValueError("count must be at least 2")
    if config.unitary_mode:
        raise ConfigError(["scan-states needs a Hamiltonian (IPR is defined in its eigenbasis)"])
    base = replace(config, exact_tqcm=True, n_steps_schedule=None)
    jobs = [(config.seed + k, {"random": config.seed + k}) for k in range(count)]
    if include_optimal:
        jobs.append((-1, "psi_opt"))
    if include_eigenstate:
        ground = assemble(config.true_words, config.true_couplings).eigenvectors[:, 0]
        jobs.append((-2, {"amplitudes": [[v.real, v.imag] for v in ground]}))
    rows = []
    for seed, state in jobs:
        cfg = replace(base, seed=max(seed, config.seed), initial_state=state)
        r = run_learn(cfg)
        n_shots = shot_budget(cfg.n_qubits, cfg.n_steps, cfg.n_measurements)
        rows.append((n_shots, cfg.n_steps, r.epsilon, r.inv_frobenius_scaled, r.ipr, seed))
    return _sorted(rows)


def random_2body_config(seed: int, **overrides) -> ExperimentConfig:
    """Three qubits, all 27 two-site Pauli couplings drawn uniformly from [-5, 5]."""
    words = two_body_words(3)
    h = random_couplings(len(words), seed)
    cfg = ExperimentConfig(
        n_qubits=3,
        hamiltonian=tuple(zip(words, (float(c) for c in h))),
        ansatz=words,
        initial_state="psi_opt",
        dt=0.01,
        n_steps=370,
        n_measurements=1000,
        seed=seed,
    )
    return replace(cfg, **overrides)


def cross_resonance_config(initial_state: Any = "psi_opt", **overrides) -> ExperimentConfig:
    """The two-transmon cross-resonance reproduction setup (dt=0.01, N_M=1000, N_T=333)."""
    cfg = ExperimentConfig(
        n_qubits=2,
        hamiltonian=tuple(zip(CROSS_RESONANCE_TERMS, CROSS_RESONANCE_COUPLINGS)),
        ansatz=CROSS_RESONANCE_TERMS,
        initial_state=initial_state,
    )
    return replace(cfg, **overrides)
