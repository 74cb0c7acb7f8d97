"""
Monte Carlo sample paths for the classical component.

Paths are generated in fixed-size blocks, each block drawing from its own child of
``SeedSequence(seed)``; the ensemble is therefore the same for any number of workers.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import linalg

from hybridqf.errors import DiffusionFactorizationError, DimensionMismatchError, InvalidParameterError
from hybridqf.generator import GeneratorParams, reduced_classical_generator
from hybridqf.levy import LevyMeasure, compensator_drift
from hybridqf.otel import get_tracer, traced
from hybridqf.settings import Settings, get_settings
from hybridqf.states import HybridGaussianState

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)

Sampler = Callable[[np.random.Generator, int], np.ndarray]
Scheme = Literal["exact", "euler"]

FACTOR_RTOL = 1e-10
TIME_ATOL = 1e-12


def psd_factor(matrix: np.ndarray, name: str = "diffusion") -> np.ndarray:
    """L with L Lᵀ = ``matrix`` from a clipped eigendecomposition; singular matrices are fine."""

    matrix = 0.5 * (matrix + matrix.T)
    if matrix.size == 0:
        return matrix.copy()
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    if eigenvalues[0] < -FACTOR_RTOL * scale:
        raise DiffusionFactorizationError(
            f"{name} matrix is not positive semi-definite (min eigenvalue {eigenvalues[0]:.3e})"
        )
    return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


@dataclass(frozen=True)
class ClassicalSDEModel:
    """dX = (α⁰ + Z⁰⁰ᵀX − compensator)dt + C^{½}dB + jumps.

    ``quantum_feed`` (= Z¹⁰ᵀ) is carried for bookkeeping; a non-zero feed means the classical
    process alone is not Markov and :func:`simulate_hybrid_gaussian` must be used.
    """

    drift_const: np.ndarray
    drift_linear: np.ndarray
    diffusion: np.ndarray
    jumps: LevyMeasure
    quantum_feed: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        drift_const = np.asarray(self.drift_const, dtype=float).reshape(-1)
        s = drift_const.shape[0]
        drift_linear = np.asarray(self.drift_linear, dtype=float)
        diffusion = np.asarray(self.diffusion, dtype=float)
        if drift_linear.shape != (s, s) or diffusion.shape != (s, s) or self.jumps.dim != s:
            raise DimensionMismatchError(
                f"classical model with s={s} got drift {drift_linear.shape}, diffusion {diffusion.shape}, "
                f"jumps in dimension {self.jumps.dim}"
            )
        if not np.allclose(diffusion, diffusion.T, rtol=0.0, atol=1e-12):
            raise InvalidParameterError("diffusion must be symmetric")
        if np.any(self.jumps.weights <= 0):
            raise InvalidParameterError("jump weights must be positive")
        feed = np.zeros((s, 0)) if self.quantum_feed is None else np.asarray(self.quantum_feed, dtype=float)
        object.__setattr__(self, "drift_const", drift_const)
        object.__setattr__(self, "drift_linear", drift_linear)
        object.__setattr__(self, "diffusion", 0.5 * (diffusion + diffusion.T))
        object.__setattr__(self, "quantum_feed", feed)

    @classmethod
    def from_params(cls, params: GeneratorParams) -> "ClassicalSDEModel":
        reduced = reduced_classical_generator(params)
        return cls(
            drift_const=reduced.drift_const,
            drift_linear=reduced.drift_linear,
            diffusion=reduced.diffusion,
            jumps=reduced.jumps,
            quantum_feed=reduced.quantum_feed,
        )

    @property
    def s(self) -> int:
        return self.drift_const.shape[0]

    @property
    def has_quantum_feed(self) -> bool:
        return bool(np.any(np.abs(self.quantum_feed) > 1e-12))

    @property
    def effective_drift(self) -> np.ndarray:
        return self.drift_const - compensator_drift(self.jumps)


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Recorded states ``samples[path, time, coordinate]``."""

    seed: int
    n_paths: int
    dt: float
    times: np.ndarray
    samples: np.ndarray
    scheme: str = "euler"

    def time_index(self, t: float) -> int:
        matches = np.flatnonzero(np.abs(self.times - t) <= TIME_ATOL * max(1.0, abs(t)))
        if matches.size == 0:
            raise InvalidParameterError(f"time {t} was not recorded; recorded times are {self.times.tolist()}")
        return int(matches[0])

    def at(self, t: float) -> np.ndarray:
        return self.samples[:, self.time_index(t), :]

    def rows(self, max_paths: Optional[int] = None) -> np.ndarray:
        """Long-format rows (path_id, time, x_1, ..., x_s)."""

        n = self.n_paths if max_paths is None else min(max_paths, self.n_paths)
        n_times = self.times.size
        path_ids = np.repeat(np.arange(n), n_times)
        times = np.tile(self.times, n)
        values = self.samples[:n].reshape(n * n_times, -1)
        return np.column_stack([path_ids, times, values])


def point_sampler(x0: np.ndarray) -> Sampler:
    x0 = np.asarray(x0, dtype=float).reshape(-1)

    def sample(_: np.random.Generator, size: int) -> np.ndarray:
        return np.tile(x0, (size, 1))

    return sample


def gaussian_sampler(mean: np.ndarray, cov: np.ndarray) -> Sampler:
    mean = np.asarray(mean, dtype=float).reshape(-1)
    factor = psd_factor(np.asarray(cov, dtype=float), "initial covariance")

    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        return mean + rng.standard_normal((size, mean.shape[0])) @ factor.T

    return sample


def _record_times(horizon: float, times: Optional[Sequence[float]]) -> np.ndarray:
    if not np.isfinite(horizon) or horizon <= 0:
        raise InvalidParameterError(f"horizon must be positive, got {horizon}")
    if times is None:
        return np.linspace(0.0, horizon, 11)
    recorded = np.unique(np.asarray(times, dtype=float))
    if recorded.size == 0 or recorded[0] < 0 or recorded[-1] > horizon * (1 + TIME_ATOL):
        raise InvalidParameterError(f"recorded times must lie in [0, {horizon}], got {recorded.tolist()}")
    return recorded


def _step_plan(record_times: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """Step sizes and, for each step, the index of the record time it ends on (−1 if none)."""

    if not np.isfinite(dt) or dt <= 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    steps: List[float] = []
    marks: List[int] = []
    previous = 0.0
    for index, t in enumerate(record_times):
        interval = float(t - previous)
        if interval <= TIME_ATOL:
            continue
        count = max(1, math.ceil(interval / dt - 1e-9))
        steps.extend([interval / count] * count)
        marks.extend([-1] * (count - 1) + [index])
        previous = float(t)
    return np.array(steps), np.array(marks, dtype=int)


def _blocks(n_paths: int, seed: int, block_size: int) -> List[Tuple[int, np.random.SeedSequence]]:
    n_blocks = math.ceil(n_paths / block_size)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    return [(min(block_size, n_paths - b * block_size), child) for b, child in enumerate(children)]


def _run_blocks(
    simulate_block: Callable[[int, np.random.SeedSequence], np.ndarray],
    n_paths: int,
    seed: int,
    settings: Settings,
    n_workers: Optional[int],
) -> np.ndarray:
    blocks = _blocks(n_paths, seed, settings.path_block_size)
    workers = n_workers or settings.n_workers
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda block: simulate_block(*block), blocks))
    else:
        parts = [simulate_block(size, child) for size, child in blocks]
    return np.concatenate(parts, axis=0)


def _jump_increments(
    jumps: LevyMeasure, steps: np.ndarray, size: int, rng: np.random.Generator
) -> Optional[np.ndarray]:
    """Compound-Poisson increments binned per step, shape (n_steps, size, s)."""

    rate = jumps.total_rate
    if jumps.is_empty or rate == 0:
        return None
    horizon = float(steps.sum())
    counts = rng.poisson(rate * horizon, size)
    total = int(counts.sum())
    increments = np.zeros((steps.size, size, jumps.dim))
    if total == 0:
        return increments
    # given the count, Poisson event times are iid uniform on the horizon
    event_times = rng.uniform(0.0, horizon, total)
    atoms = rng.choice(len(jumps.atoms), size=total, p=jumps.weights / rate)
    paths = np.repeat(np.arange(size), counts)
    edges = np.cumsum(steps)
    step_index = np.minimum(np.searchsorted(edges, event_times, side="left"), steps.size - 1)
    np.add.at(increments, (step_index, paths), jumps.etas[atoms])
    return increments


def simulate_classical(
    model: ClassicalSDEModel,
    x0_sampler: Sampler,
    horizon: float,
    dt: float,
    n_paths: int,
    seed: int,
    times: Optional[Sequence[float]] = None,
    settings: Optional[Settings] = None,
    n_workers: Optional[int] = None,
) -> TrajectoryEnsemble:
    """Euler-Maruyama diffusion with exactly placed compound-Poisson jumps."""

    settings = settings or get_settings()
    if n_paths < 1:
        raise InvalidParameterError(f"n_paths must be at least 1, got {n_paths}")
    if model.has_quantum_feed:
        raise InvalidParameterError(
            "classical drift depends on quantum coordinates (Z¹⁰ ≠ 0); use simulate_hybrid_gaussian"
        )
    record_times = _record_times(horizon, times)
    steps, marks = _step_plan(record_times, dt)
    factor = psd_factor(model.diffusion)
    drift = model.effective_drift
    recorded_at_zero = record_times[0] <= TIME_ATOL

    def simulate_block(size: int, child: np.random.SeedSequence) -> np.ndarray:
        rng = np.random.default_rng(child)
        x = np.asarray(x0_sampler(rng, size), dtype=float).reshape(size, model.s)
        jumps = _jump_increments(model.jumps, steps, size, rng)
        out = np.empty((size, record_times.size, model.s))
        if recorded_at_zero:
            out[:, 0] = x
        for k, h in enumerate(steps):
            noise = rng.standard_normal((size, model.s)) @ factor.T
            x = x + (drift + x @ model.drift_linear.T) * h + math.sqrt(h) * noise
            if jumps is not None:
                x = x + jumps[k]
            if marks[k] >= 0:
                out[:, marks[k]] = x
        return out

    with traced(
        tracer, "simulate_classical", seed=seed, n_paths=n_paths, n_steps=steps.size, record_times=record_times
    ):
        samples = _run_blocks(simulate_block, n_paths, seed, settings, n_workers)
    logger.info(
        "Classical ensemble simulated",
        extra={"seed": seed, "n_paths": n_paths, "n_steps": int(steps.size), "jump_rate": model.jumps.total_rate},
    )
    return TrajectoryEnsemble(
        seed=seed, n_paths=n_paths, dt=float(dt), times=record_times, samples=samples, scheme="euler"
    )


def _exact_transition(
    z_matrix: np.ndarray, alpha: np.ndarray, a_matrix: np.ndarray, h: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Φ, b, Q) of Y(t+h) = Φ Y(t) + b + N(0, Q) for dY = (ZᵀY + α)dt + A^{½}dB."""

    d = alpha.shape[0]
    drift = z_matrix.T
    # matrix fraction decomposition of the covariance integral
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = drift
    block[:d, d:] = a_matrix
    block[d:, d:] = -drift.T
    fraction = linalg.expm(block * h) @ np.vstack((np.zeros((d, d)), np.eye(d)))
    q_matrix = linalg.solve(fraction[d:, :].T, fraction[:d, :].T)

    augmented = np.zeros((d + 1, d + 1))
    augmented[:d, :d] = drift
    augmented[:d, d] = alpha
    propagator = linalg.expm(augmented * h)
    return propagator[:d, :d], propagator[:d, d], 0.5 * (q_matrix + q_matrix.T)


def simulate_hybrid_gaussian(
    params: GeneratorParams,
    state0: HybridGaussianState,
    horizon: float,
    dt: float,
    n_paths: int,
    seed: int,
    times: Optional[Sequence[float]] = None,
    scheme: Scheme = "exact",
    settings: Optional[Settings] = None,
    n_workers: Optional[int] = None,
) -> TrajectoryEnsemble:
    """Linear Gaussian surrogate dY = (ZᵀY + α)dt + A^{½}dB on all of Ξ; records the classical coordinates.

    For ν = 0 its classical multi-time statistics coincide with those of the hybrid dynamics.
    ``scheme="exact"`` steps with the exact transition law between record times, ``"euler"``
    uses Euler-Maruyama with step ``dt``.
    """

    settings = settings or get_settings()
    dims = params.dims
    if not params.nu.is_empty:
        raise InvalidParameterError(
            "path-wise simulation with jumps in a hybrid model needs unraveling; only ν = 0 is supported"
        )
    if dims.s == 0:
        raise InvalidParameterError("model has no classical component to record")
    if state0.dims != dims:
        raise DimensionMismatchError(f"state lives on {state0.dims}, model on {dims}")
    if n_paths < 1:
        raise InvalidParameterError(f"n_paths must be at least 1, got {n_paths}")
    if scheme not in ("exact", "euler"):
        raise InvalidParameterError(f"unknown scheme {scheme!r}")

    record_times = _record_times(horizon, times)
    if scheme == "exact":
        steps, marks = _step_plan(record_times, float(horizon))
    else:
        steps, marks = _step_plan(record_times, dt)

    z_matrix, alpha, a_matrix = params.z_matrix, params.alpha, params.a_matrix
    transitions: Dict[float, Tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    if scheme == "exact":
        for h in np.unique(steps):
            phi, b, q = _exact_transition(z_matrix, alpha, a_matrix, float(h))
            transitions[float(h)] = (phi, b, psd_factor(q, "transition covariance"))
    noise_factor = psd_factor(a_matrix)
    initial = gaussian_sampler(state0.mean, state0.cov)
    classical = dims.classical_slice
    recorded_at_zero = record_times[0] <= TIME_ATOL

    def simulate_block(size: int, child: np.random.SeedSequence) -> np.ndarray:
        rng = np.random.default_rng(child)
        y = initial(rng, size)
        out = np.empty((size, record_times.size, dims.s))
        if recorded_at_zero:
            out[:, 0] = y[:, classical]
        for k, h in enumerate(steps):
            noise = rng.standard_normal((size, dims.d))
            if scheme == "exact":
                phi, b, factor = transitions[float(h)]
                y = y @ phi.T + b + noise @ factor.T
            else:
                y = y + (y @ z_matrix + alpha) * h + math.sqrt(h) * (noise @ noise_factor.T)
            if marks[k] >= 0:
                out[:, marks[k]] = y[:, classical]
        return out

    with traced(tracer, "simulate_hybrid_gaussian", seed=seed, n_paths=n_paths, scheme=scheme, dt=dt):
        samples = _run_blocks(simulate_block, n_paths, seed, settings, n_workers)
    logger.info(
        "Hybrid Gaussian ensemble simulated",
        extra={"seed": seed, "n_paths": n_paths, "n_steps": int(steps.size), "scheme": scheme},
    )
    return TrajectoryEnsemble(
        seed=seed, n_paths=n_paths, dt=float(dt), times=record_times, samples=samples, scheme=scheme
    )


@dataclass(frozen=True)
class EmpiricalCharFn:
    """Sample mean of exp(i Σ_j k_j·X(t_j)) with jackknife standard errors per component."""

    value: complex
    stderr_real: float
    stderr_imag: float
    n_paths: int

    @property
    def stderr(self) -> float:
        return math.hypot(self.stderr_real, self.stderr_imag)

    def deviation(self, reference: complex) -> float:
        """Largest component deviation from ``reference`` in units of its standard error."""

        reference = complex(reference)
        pairs = (
            (self.value.real - reference.real, self.stderr_real),
            (self.value.imag - reference.imag, self.stderr_imag),
        )
        scores = []
        for diff, se in pairs:
            if se > 0:
                scores.append(abs(diff) / se)
            else:
                scores.append(0.0 if abs(diff) <= 1e-12 else math.inf)
        return max(scores)


def _jackknife_se(values: np.ndarray) -> float:
    n = values.size
    if n < 2:
        return 0.0
    leave_one_out = (values.sum() - values) / (n - 1)
    return float(np.sqrt((n - 1) / n * np.sum((leave_one_out - leave_one_out.mean()) ** 2)))


def empirical_charfn(ensemble: TrajectoryEnsemble, times: Sequence[float], kvecs: np.ndarray) -> EmpiricalCharFn:
    kvecs = np.asarray(kvecs, dtype=float)
    s = ensemble.samples.shape[-1]
    if kvecs.shape != (len(times), s):
        raise DimensionMismatchError(f"kvecs has shape {kvecs.shape}, expected ({len(times)}, {s})")
    phase = np.zeros(ensemble.n_paths)
    for t, k in zip(times, kvecs):
        phase += ensemble.at(float(t)) @ k
    values = np.exp(1j * phase)
    return EmpiricalCharFn(
        value=complex(values.mean()),
        stderr_real=_jackknife_se(values.real),
        stderr_imag=_jackknife_se(values.imag),
        n_paths=ensemble.n_paths,
    )


class MomentRow(BaseModel):
    time: float
    component: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float


class EnsembleSummary(BaseModel):
    seed: int
    n_paths: int
    scheme: str
    rows: List[MomentRow]


def summarize(ensemble: TrajectoryEnsemble) -> EnsembleSummary:
    n = ensemble.n_paths
    rows: List[MomentRow] = []
    for index, t in enumerate(ensemble.times):
        for component in range(ensemble.samples.shape[-1]):
            x = ensemble.samples[:, index, component]
            mean = float(x.mean())
            centred = x - mean
            variance = float(centred.var(ddof=1)) if n > 1 else 0.0
            fourth = float(np.mean(centred**4))
            rows.append(
                MomentRow(
                    time=float(t),
                    component=component,
                    mean=mean,
                    mean_se=math.sqrt(variance / n),
                    variance=variance,
                    variance_se=math.sqrt(max(fourth - variance**2, 0.0) / n),
                )
            )
    return EnsembleSummary(seed=ensemble.seed, n_paths=n, scheme=ensemble.scheme, rows=rows)


__all__ = [
    "ClassicalSDEModel",
    "TrajectoryEnsemble",
    "EmpiricalCharFn",
    "MomentRow",
    "EnsembleSummary",
    "psd_factor",
    "point_sampler",
    "gaussian_sampler",
    "simulate_classical",
    "simulate_hybrid_gaussian",
    "empirical_charfn",
    "summarize",
]
