from typing import Callable, Optional

import numpy as np
import pytest

from hybridqf.generator import GeneratorParams, derive_blocks
from hybridqf.levy import LevyAtom, LevyExponentParams, LevyMeasure
from hybridqf.phase_space import PhaseSpaceDim, symplectic_matrix
from hybridqf.settings import Settings
from hybridqf.states import HybridGaussianState


def build_params(
    n: int,
    s: int,
    z_matrix: np.ndarray,
    a_matrix: np.ndarray,
    alpha: Optional[np.ndarray] = None,
    atoms: tuple = (),
) -> GeneratorParams:
    dims = PhaseSpaceDim(n, s)
    alpha = np.zeros(dims.d) if alpha is None else np.asarray(alpha, dtype=float)
    nu = LevyMeasure(dim=dims.d, atoms=tuple(atoms))
    exponent = LevyExponentParams(alpha=alpha, a_matrix=np.asarray(a_matrix, dtype=float), nu=nu)
    return GeneratorParams(dims=dims, z_matrix=np.asarray(z_matrix, dtype=float), exponent=exponent)


def damped_mode_params(gamma: float = 1.0) -> GeneratorParams:
    return build_params(1, 0, -0.5 * gamma * np.eye(2), 0.5 * gamma * np.eye(2))


def ou_params(lam: float = 1.0, c: float = 1.0) -> GeneratorParams:
    return build_params(0, 1, [[-lam]], [[c]])


def hybrid_meter_params(gamma: float = 1.0, eps: float = 0.5, kappa: float = 1.0, c: float = 1.0) -> GeneratorParams:
    z_matrix = np.zeros((3, 3))
    z_matrix[:2, :2] = -0.5 * gamma * np.eye(2)
    z_matrix[0, 2] = kappa
    a_matrix = np.diag([0.5 * gamma + eps, 0.5 * gamma + eps, c])
    return build_params(1, 1, z_matrix, a_matrix)


def random_valid_params(
    rng: np.random.Generator, n: int, s: int, jumps: bool = False, margin: float = 0.05
) -> GeneratorParams:
    """Random Z with spectrum in Re < -0.3 and the smallest isotropic noise that makes A ± iB ≥ 0, plus ``margin``."""

    d = 2 * n + s
    raw = 0.4 * rng.standard_normal((d, d))
    shift = max(0.0, float(np.linalg.eigvals(raw).real.max())) + 0.3
    z_matrix = raw - shift * np.eye(d)
    factor = 0.3 * rng.standard_normal((d, d))
    a0 = factor @ factor.T
    probe = build_params(n, s, z_matrix, np.zeros((d, d)))
    _, derived = derive_blocks(probe)
    lowest = float(np.linalg.eigvalsh(a0 + 1j * derived.b_matrix)[0])
    a_matrix = a0 + (max(0.0, -lowest) + margin) * np.eye(d)
    atoms = ()
    if jumps:
        atoms = tuple(
            LevyAtom(eta=0.8 * rng.standard_normal(d), weight=float(rng.uniform(0.2, 1.0))) for _ in range(2)
        )
    return build_params(n, s, z_matrix, a_matrix, 0.2 * rng.standard_normal(d), atoms)


def random_admissible_state(rng: np.random.Generator, n: int, s: int) -> HybridGaussianState:
    dims = PhaseSpaceDim(n, s)
    factor = 0.4 * rng.standard_normal((dims.d, dims.d))
    cov = factor @ factor.T
    cov[dims.quantum_slice, dims.quantum_slice] += 0.5 * np.eye(2 * n)
    cov[dims.classical_slice, dims.classical_slice] += 0.2 * np.eye(s)
    return HybridGaussianState(dims=dims, mean=rng.standard_normal(dims.d), cov=cov)


def twisted_min_eig(cov: np.ndarray, n: int, s: int) -> float:
    return float(np.linalg.eigvalsh(cov + 0.5j * symplectic_matrix(n, s))[0])


def within_se(deviations: list) -> bool:
    """At least 90% of probes within 3 SE and all within 5 SE."""

    deviations = np.asarray(deviations, dtype=float)
    return bool(np.mean(deviations <= 3.0) >= 0.9 and np.all(deviations <= 5.0))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def settings(tmp_path) -> Settings:
    return Settings(output_dir=tmp_path / "out", _env_file=None)


@pytest.fixture
def damped_mode() -> GeneratorParams:
    return damped_mode_params()


@pytest.fixture
def ou() -> GeneratorParams:
    return ou_params()


@pytest.fixture
def hybrid_meter() -> GeneratorParams:
    return hybrid_meter_params()


@pytest.fixture
def make_random_params() -> Callable[..., GeneratorParams]:
    return random_valid_params


@pytest.fixture
def make_random_state() -> Callable[..., HybridGaussianState]:
    return random_admissible_state
