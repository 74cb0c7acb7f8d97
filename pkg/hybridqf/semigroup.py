"""
The dynamical maps T_t[W(ξ)] = f_t(ξ) W(S_t ξ) and everything computed from them.

S_t = e^{Zt} comes from scipy's scaling-and-squaring Padé exponential; the noise function
f_t(ξ) = exp(∫₀ᵗ ψ(S_τ ξ) dτ) is integrated with Gauss-Legendre panels refined dyadically.
All functions broadcast over leading axes of ξ.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from hybridqf.errors import (
    DimensionMismatchError,
    FlowOverflowError,
    InvalidParameterError,
    MomentIntegrationError,
    QuadratureError,
)
from hybridqf.generator import GeneratorParams
from hybridqf.levy import gaussian_equivalent, psi_eval
from hybridqf.phase_space import Sector, embed
from hybridqf.settings import Settings, get_settings

logger = logging.getLogger(__name__)

CharFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FlowOperator:
    t: float
    matrix: np.ndarray

    def apply(self, xi: np.ndarray) -> np.ndarray:
        """S_t ξ for row vectors ``xi``."""

        return np.asarray(xi, dtype=float) @ self.matrix.T


def _check_time(t: float) -> float:
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise InvalidParameterError(f"time must be a finite non-negative number, got {t}")
    return t


def flow(params: GeneratorParams, t: float) -> FlowOperator:
    t = _check_time(t)
    with np.errstate(over="ignore", invalid="ignore"):
        matrix = expm(params.z_matrix * t)
    if not np.all(np.isfinite(matrix)):
        raise FlowOverflowError(f"e^(Zt) overflows at t={t} (‖Z‖={np.linalg.norm(params.z_matrix):.3e})")
    return FlowOperator(t=t, matrix=matrix)


@dataclass(frozen=True)
class QuadratureRule:
    order: int = 16
    tol: float = 1e-10
    max_depth: int = 40

    @classmethod
    def from_settings(cls, settings: Optional[Settings] = None) -> "QuadratureRule":
        settings = settings or get_settings()
        return cls(order=settings.quadrature_order, tol=settings.quadrature_tol, max_depth=settings.quadrature_max_depth)

    @cached_property
    def nodes_weights(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.polynomial.legendre.leggauss(self.order)


@dataclass(frozen=True)
class NoiseFunctionEvaluator:
    """f_t(ξ) for one generator; immutable and safe to share between threads."""

    params: GeneratorParams
    quadrature: QuadratureRule = QuadratureRule()

    def __post_init__(self) -> None:
        if not self.params.is_stable():
            logger.warning("Flow e^(Zt) grows exponentially", extra={"growth_rate": self.params.growth_rate()})

    def _panel(self, xi: np.ndarray, a: float, b: float) -> np.ndarray:
        nodes, weights = self.quadrature.nodes_weights
        half = 0.5 * (b - a)
        taus = a + half * (nodes + 1.0)
        flows = expm(taus[:, None, None] * self.params.z_matrix)
        moved = np.einsum("kij,...j->...ki", flows, xi)
        return psi_eval(self.params.exponent, moved) @ (half * weights)

    def log_noise(self, xi: np.ndarray, t: float) -> np.ndarray:
        """∫₀ᵗ ψ(S_τ ξ) dτ."""

        t = _check_time(t)
        xi = self.params.dims.check_vector(xi, "xi")
        if t == 0.0:
            return np.zeros(xi.shape[:-1], dtype=complex)

        budget = self.quadrature.tol * (1.0 + t)
        total = np.zeros(xi.shape[:-1], dtype=complex)
        unresolved = 0.0
        stack = [(0.0, t, self._panel(xi, 0.0, t), 0)]
        while stack:
            a, b, coarse, depth = stack.pop()
            mid = 0.5 * (a + b)
            left, right = self._panel(xi, a, mid), self._panel(xi, mid, b)
            fine = left + right
            error = float(np.max(np.abs(fine - coarse), initial=0.0))
            if error <= budget * (b - a) / t:
                total += fine
            elif depth + 1 >= self.quadrature.max_depth:
                total += fine
                unresolved += error
            else:
                stack.append((a, mid, left, depth + 1))
                stack.append((mid, b, right, depth + 1))

        if unresolved > budget:
            raise QuadratureError(f"noise-function integral on [0, {t}] did not converge", unresolved)
        return total

    def __call__(self, xi: np.ndarray, t: float) -> np.ndarray:
        return np.exp(self.log_noise(xi, t))


def noise_function(evaluator: NoiseFunctionEvaluator, xi: np.ndarray, t: float) -> np.ndarray:
    return evaluator(xi, t)


def evolve_charfn(evaluator: NoiseFunctionEvaluator, chi0: CharFn, xi: np.ndarray, t: float) -> np.ndarray:
    """χ_t(ξ) = f_t(ξ) χ₀(S_t ξ)."""

    xi = evaluator.params.dims.check_vector(xi, "xi")
    moved = flow(evaluator.params, t).apply(xi)
    return evaluator(xi, t) * chi0(moved)


@dataclass(frozen=True)
class PropagatedGaussian:
    """First and second moments at time ``t``.

    ``gaussian_exact`` is false when ν has atoms: the moments are exact but the state is not
    Gaussian.
    """

    t: float
    mean: np.ndarray
    cov: np.ndarray
    gaussian_exact: bool

    def charfn(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return np.exp(1j * (xi @ self.mean) - 0.5 * np.einsum("...i,ij,...j->...", xi, self.cov, xi))


def _moment_rhs(z_matrix: np.ndarray, alpha: np.ndarray, a_matrix: np.ndarray) -> Callable:
    d = alpha.shape[0]

    def rhs(_: float, y: np.ndarray) -> np.ndarray:
        mean, cov = y[:d], y[d:].reshape(d, d)
        dmean = z_matrix.T @ mean + alpha
        dcov = z_matrix.T @ cov + cov @ z_matrix + a_matrix
        return np.concatenate([dmean, dcov.ravel()])

    return rhs


def gaussian_trajectory(
    params: GeneratorParams,
    mean0: np.ndarray,
    cov0: np.ndarray,
    times: Sequence[float],
    settings: Optional[Settings] = None,
) -> List[PropagatedGaussian]:
    """Integrate dm/dt = Zᵀm + α_eff and dV/dt = ZᵀV + VZ + A_eff and sample at ``times``."""

    settings = settings or get_settings()
    dims = params.dims
    mean0 = dims.check_vector(mean0, "mean0")
    cov0 = dims.check_matrix(cov0, "cov0")
    times = np.array([_check_time(t) for t in times])
    exact = params.nu.is_empty
    if not exact:
        logger.warning("Jump atoms present: propagating first and second moments only")

    alpha_eff, a_eff = gaussian_equivalent(params.exponent)
    y0 = np.concatenate([mean0, cov0.ravel()])
    t_max = float(times.max(initial=0.0))
    if t_max == 0.0:
        samples = np.tile(y0[:, None], (1, len(times)))
    else:
        unique_times, inverse = np.unique(times, return_inverse=True)
        solution = solve_ivp(
            _moment_rhs(params.z_matrix, alpha_eff, a_eff),
            (0.0, t_max),
            y0,
            method=settings.ode_method,
            t_eval=unique_times,
            rtol=settings.ode_rtol,
            atol=settings.ode_atol,
        )
        if solution.status < 0 or not np.all(np.isfinite(solution.y)):
            raise MomentIntegrationError(f"moment equations failed: {solution.message}")
        samples = solution.y[:, inverse]

    d = dims.d
    out = []
    for column, t in enumerate(times):
        cov = samples[d:, column].reshape(d, d)
        out.append(
            PropagatedGaussian(t=float(t), mean=samples[:d, column].copy(), cov=0.5 * (cov + cov.T), gaussian_exact=exact)
        )
    return out


def gaussian_propagate(
    params: GeneratorParams,
    mean0: np.ndarray,
    cov0: np.ndarray,
    t: float,
    settings: Optional[Settings] = None,
) -> PropagatedGaussian:
    return gaussian_trajectory(params, mean0, cov0, [t], settings)[0]


def stationary_residual(params: GeneratorParams, cov: np.ndarray) -> float:
    """‖ZᵀV + VZ + A_eff‖_max: zero at a covariance fixed point."""

    _, a_eff = gaussian_equivalent(params.exponent)
    z = params.z_matrix
    return float(np.max(np.abs(z.T @ cov + cov @ z + a_eff)))


class SemigroupLawReport(BaseModel):
    t: float
    s: float
    flow_residual: float
    cocycle_residual: float


def check_semigroup_law(evaluator: NoiseFunctionEvaluator, xi: np.ndarray, t: float, s: float) -> SemigroupLawReport:
    """Residuals of S_{t+s} = S_t S_s and f_{t+s}(ξ) = f_s(ξ) f_t(S_s ξ)."""

    params = evaluator.params
    flow_t, flow_s, flow_ts = flow(params, t), flow(params, s), flow(params, t + s)
    flow_residual = float(np.max(np.abs(flow_ts.matrix - flow_t.matrix @ flow_s.matrix)))

    xi = params.dims.check_vector(xi, "xi")
    direct = evaluator(xi, t + s)
    composed = evaluator(xi, s) * evaluator(flow_s.apply(xi), t)
    cocycle_residual = float(np.max(np.abs(direct - composed), initial=0.0))
    return SemigroupLawReport(t=t, s=s, flow_residual=flow_residual, cocycle_residual=cocycle_residual)


def multi_time_charfn(
    evaluator: NoiseFunctionEvaluator,
    chi0: CharFn,
    times: Sequence[float],
    kvecs: np.ndarray,
) -> np.ndarray:
    """E[exp(i Σ_j k_j·X(t_j))] for the classical process, via nested quasi-free maps.

    ``kvecs`` has shape (..., m, s); leading axes are evaluated in one batch.
    """

    params = evaluator.params
    dims = params.dims
    times = np.asarray(times, dtype=float)
    kvecs = np.asarray(kvecs, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise InvalidParameterError("times must be a non-empty list")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise InvalidParameterError(f"times must be non-negative and strictly ascending, got {times.tolist()}")
    if kvecs.shape[-2:] != (times.size, dims.s):
        raise DimensionMismatchError(f"kvecs has shape {kvecs.shape}, expected (..., {times.size}, {dims.s})")

    frequencies = embed(kvecs, Sector.CLASSICAL, dims)
    xi = frequencies[..., -1, :]
    amplitude = np.ones(xi.shape[:-1], dtype=complex)
    for j in range(times.size - 1, 0, -1):
        step = float(times[j] - times[j - 1])
        amplitude = amplitude * evaluator(xi, step)
        xi = flow(params, step).apply(xi)
        earlier = frequencies[..., j - 1, :]
        amplitude = amplitude * np.exp(-0.5j * params.sigma.form(earlier, xi))
        xi = xi + earlier
    amplitude = amplitude * evaluator(xi, float(times[0]))
    xi = flow(params, float(times[0])).apply(xi)
    result = amplitude * chi0(xi)
    if np.ndim(result) == 0:
        return complex(result)
    return result


def translated_charfn(chi0: CharFn, shift: np.ndarray, params: GeneratorParams) -> CharFn:
    """Characteristic function of the state whose classical component is moved by ``shift``."""

    offset = embed(np.asarray(shift, dtype=float), Sector.CLASSICAL, params.dims)

    def shifted(xi: np.ndarray) -> np.ndarray:
        return chi0(xi) * np.exp(1j * (np.asarray(xi, dtype=float) @ offset))

    return shifted


__all__ = [
    "CharFn",
    "FlowOperator",
    "QuadratureRule",
    "NoiseFunctionEvaluator",
    "PropagatedGaussian",
    "SemigroupLawReport",
    "flow",
    "noise_function",
    "evolve_charfn",
    "gaussian_trajectory",
    "gaussian_propagate",
    "stationary_residual",
    "check_semigroup_law",
    "multi_time_charfn",
    "translated_charfn",
]
