"""
Finite atomic Lévy measures on Ξ and the Lévy-Khintchine exponent ψ.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from hybridqf.errors import DimensionMismatchError, InvalidParameterError
from hybridqf.phase_space import PhaseSpaceDim, Sector

logger = logging.getLogger(__name__)

ZERO_ATOL = 1e-12
SYMMETRY_ATOL = 1e-12
PSD_ATOL = 1e-10


@dataclass(frozen=True)
class LevyAtom:
    """A jump ``eta`` occurring at rate ``weight``.

    ``compensated`` overrides the indicator 𝟙_{|η|<cutoff}; ``None`` evaluates it from ``eta``.
    """

    eta: np.ndarray
    weight: float
    compensated: Optional[bool] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float).reshape(-1))
        object.__setattr__(self, "weight", float(self.weight))

    def is_compensated(self, cutoff_radius: float = 1.0) -> bool:
        if self.compensated is not None:
            return self.compensated
        return bool(np.linalg.norm(self.eta) < cutoff_radius)


@dataclass(frozen=True)
class LevyMeasure:
    dim: int
    atoms: Tuple[LevyAtom, ...] = field(default_factory=tuple)
    cutoff_radius: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "atoms", tuple(self.atoms))
        for index, atom in enumerate(self.atoms):
            if atom.eta.shape != (self.dim,):
                raise DimensionMismatchError(f"atom {index} has dimension {atom.eta.shape[0]}, expected {self.dim}")

    @property
    def is_empty(self) -> bool:
        return not self.atoms

    @property
    def etas(self) -> np.ndarray:
        if not self.atoms:
            return np.zeros((0, self.dim))
        return np.stack([atom.eta for atom in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([atom.weight for atom in self.atoms], dtype=float)

    @property
    def compensated_mask(self) -> np.ndarray:
        return np.array([atom.is_compensated(self.cutoff_radius) for atom in self.atoms], dtype=bool)

    @property
    def total_rate(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True)
class LevyExponentParams:
    """Drift ``alpha``, diffusion ``a_matrix`` and jump measure ``nu`` of ψ."""

    alpha: np.ndarray
    a_matrix: np.ndarray
    nu: LevyMeasure

    def __post_init__(self) -> None:
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        a_matrix = np.asarray(self.a_matrix, dtype=float)
        d = alpha.shape[0]
        if a_matrix.shape != (d, d) or self.nu.dim != d:
            raise DimensionMismatchError(
                f"alpha has length {d}, A has shape {a_matrix.shape}, nu lives in dimension {self.nu.dim}"
            )
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(a_matrix))):
            raise InvalidParameterError("alpha and A must be finite")
        if not np.allclose(a_matrix, a_matrix.T, rtol=0.0, atol=SYMMETRY_ATOL):
            raise InvalidParameterError("A must be symmetric")
        a_matrix = 0.5 * (a_matrix + a_matrix.T)
        if d and np.linalg.eigvalsh(a_matrix).min() < -PSD_ATOL:
            raise InvalidParameterError("A must be positive semi-definite")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "a_matrix", a_matrix)

    @property
    def d(self) -> int:
        return self.alpha.shape[0]


class LevyViolation(BaseModel):
    index: int
    eta: List[float]
    weight: float
    reason: str


class LevyReport(BaseModel):
    """Outcome of :func:`validate_levy`."""

    valid: bool
    n_atoms: int
    total_rate: float
    violations: List[LevyViolation]


def psi_eval(params: LevyExponentParams, xi: np.ndarray) -> np.ndarray:
    """ψ(ξ) = iα·ξ − ½ξᵀAξ + Σ w(e^{iη·ξ} − 1 − i𝟙_{|η|<1}η·ξ), broadcasting over leading axes of ``xi``."""

    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1:] != (params.d,):
        raise DimensionMismatchError(f"xi has trailing shape {xi.shape}, expected (..., {params.d})")
    if np.isnan(xi).any():
        raise InvalidParameterError("xi contains NaN")

    value = 1j * (xi @ params.alpha) - 0.5 * np.einsum("...i,ij,...j->...", xi, params.a_matrix, xi)
    nu = params.nu
    if not nu.is_empty:
        phase = xi @ nu.etas.T
        # e^{iθ} − 1 written without cancellation for small θ
        jump = -2.0 * np.sin(0.5 * phase) ** 2 + 1j * (np.sin(phase) - nu.compensated_mask * phase)
        value = value + jump @ nu.weights
    if np.ndim(value) == 0:
        return complex(value)
    return value


def levy_marginal(nu: LevyMeasure, sector: Sector, dims: PhaseSpaceDim) -> LevyMeasure:
    """Pushforward of ``nu`` onto one sector, in that sector's coordinates.

    Atoms keep the compensation flag of the hybrid jump they came from.
    """

    if nu.dim != dims.d:
        raise DimensionMismatchError(f"measure lives in dimension {nu.dim}, phase space has {dims.d}")
    sl = dims.sector_slice(sector)
    atoms = []
    for atom in nu.atoms:
        part = atom.eta[sl]
        if np.linalg.norm(part) > ZERO_ATOL:
            atoms.append(LevyAtom(part, atom.weight, compensated=atom.is_compensated(nu.cutoff_radius)))
    return LevyMeasure(dim=sl.stop - sl.start, atoms=tuple(atoms), cutoff_radius=nu.cutoff_radius)


def validate_levy(nu: LevyMeasure) -> LevyReport:
    violations: List[LevyViolation] = []
    for index, atom in enumerate(nu.atoms):
        reasons = []
        if not (np.all(np.isfinite(atom.eta)) and np.isfinite(atom.weight)):
            reasons.append("non-finite atom")
        elif np.linalg.norm(atom.eta) <= ZERO_ATOL:
            reasons.append("ν({0})=0 broken: atom at the origin")
        if atom.weight < 0:
            reasons.append("negative weight")
        elif atom.weight == 0:
            reasons.append("zero weight")
        for reason in reasons:
            violations.append(
                LevyViolation(index=index, eta=atom.eta.tolist(), weight=atom.weight, reason=reason)
            )

    report = LevyReport(
        valid=not violations, n_atoms=len(nu.atoms), total_rate=nu.total_rate, violations=violations
    )
    if violations:
        logger.info("Lévy measure rejected", extra={"violations": len(violations)})
    return report


def compensator_drift(nu: LevyMeasure) -> np.ndarray:
    """Σ w·η over the compensated atoms."""

    if nu.is_empty:
        return np.zeros(nu.dim)
    mask = nu.compensated_mask
    return (nu.weights * mask) @ nu.etas


def gaussian_equivalent(params: LevyExponentParams) -> Tuple[np.ndarray, np.ndarray]:
    """First and second ξ-derivatives of ψ at 0 as (α_eff, A_eff).

    ψ(ξ) = iα_eff·ξ − ½ξᵀA_eff ξ + O(|ξ|³), so these are the drift and infinitesimal
    covariance that govern the first two moments.
    """

    nu = params.nu
    if nu.is_empty:
        return params.alpha.copy(), params.a_matrix.copy()
    etas, weights = nu.etas, nu.weights
    uncompensated = weights * ~nu.compensated_mask
    alpha_eff = params.alpha + uncompensated @ etas
    a_eff = params.a_matrix + (etas.T * weights) @ etas
    return alpha_eff, a_eff


def uncompensate_atom(params: LevyExponentParams, index: int) -> LevyExponentParams:
    """Drop the compensator of one atom and shift α so that ψ is unchanged."""

    atom = params.nu.atoms[index]
    if not atom.is_compensated(params.nu.cutoff_radius):
        return params
    atoms = list(params.nu.atoms)
    atoms[index] = replace(atom, compensated=False)
    return LevyExponentParams(
        alpha=params.alpha - atom.weight * atom.eta,
        a_matrix=params.a_matrix,
        nu=replace(params.nu, atoms=tuple(atoms)),
    )


__all__ = [
    "LevyAtom",
    "LevyMeasure",
    "LevyExponentParams",
    "LevyViolation",
    "LevyReport",
    "psi_eval",
    "levy_marginal",
    "validate_levy",
    "compensator_drift",
    "gaussian_equivalent",
    "uncompensate_atom",
]
