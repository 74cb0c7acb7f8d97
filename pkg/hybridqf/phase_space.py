"""
Hybrid phase space Ξ = Ξ₁ ⊕ Ξ₀: dimensions, the embedded symplectic form and Weyl descriptors.

Weyl operators are never built as Hilbert-space operators. A :class:`WeylDescriptor` stands
for ``amplitude * W(xi)`` and the composition law only needs the symplectic form.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from hybridqf.errors import DimensionMismatchError, InvalidParameterError


class Sector(str, Enum):
    QUANTUM = "quantum"
    CLASSICAL = "classical"


@dataclass(frozen=True)
class PhaseSpaceDim:
    """Mode count ``n``, classical dimension ``s`` and total dimension ``d = 2n + s``."""

    n: int
    s: int

    def __post_init__(self) -> None:
        if self.n < 0 or self.s < 0:
            raise InvalidParameterError(f"dimensions must be non-negative, got n={self.n}, s={self.s}")
        if self.n + self.s < 1:
            raise InvalidParameterError("phase space needs at least one quantum mode or classical coordinate")

    @property
    def d(self) -> int:
        return 2 * self.n + self.s

    @property
    def quantum_slice(self) -> slice:
        return slice(0, 2 * self.n)

    @property
    def classical_slice(self) -> slice:
        return slice(2 * self.n, self.d)

    def sector_slice(self, sector: Sector) -> slice:
        return self.quantum_slice if Sector(sector) is Sector.QUANTUM else self.classical_slice

    def check_vector(self, vector: np.ndarray, name: str = "vector") -> np.ndarray:
        arr = np.asarray(vector, dtype=float)
        if arr.shape[-1:] != (self.d,):
            raise DimensionMismatchError(f"{name} has trailing shape {arr.shape}, expected (..., {self.d})")
        return arr

    def check_matrix(self, matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
        arr = np.asarray(matrix, dtype=float)
        if arr.shape != (self.d, self.d):
            raise DimensionMismatchError(f"{name} has shape {arr.shape}, expected ({self.d}, {self.d})")
        return arr


@dataclass(frozen=True)
class SymplecticForm:
    """σ on the whole of Ξ; rows and columns of the classical sector are zero."""

    matrix: np.ndarray

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def form(self, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
        """ξᵀση, broadcasting over leading axes."""

        return np.einsum("...i,ij,...j->...", xi, self.matrix, eta)


@dataclass(frozen=True)
class SectorProjections:
    p1: np.ndarray
    p0: np.ndarray


@dataclass(frozen=True)
class WeylDescriptor:
    """``amplitude * W(xi)``."""

    xi: np.ndarray
    amplitude: complex = 1.0 + 0.0j

    def __post_init__(self) -> None:
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float))
        object.__setattr__(self, "amplitude", complex(self.amplitude))
        if not np.isfinite(self.amplitude):
            raise InvalidParameterError("Weyl descriptor amplitude must be finite")

    @property
    def d(self) -> int:
        return self.xi.shape[0]


def symplectic_matrix(n: int, s: int) -> np.ndarray:
    """The CCR matrix for ``R = (Q, P)`` embedded in a ``(2n+s)``-dimensional zero matrix."""

    d = 2 * n + s
    sigma = np.zeros((d, d))
    eye = np.eye(n)
    sigma[:n, n : 2 * n] = eye
    sigma[n : 2 * n, :n] = -eye
    return sigma


def sector_projections(dims: PhaseSpaceDim) -> SectorProjections:
    p1 = np.zeros((dims.d, dims.d))
    p1[dims.quantum_slice, dims.quantum_slice] = np.eye(2 * dims.n)
    return SectorProjections(p1=p1, p0=np.eye(dims.d) - p1)


def make_phase_space(n: int, s: int) -> Tuple[PhaseSpaceDim, SymplecticForm, SectorProjections]:
    dims = PhaseSpaceDim(n=n, s=s)
    return dims, SymplecticForm(symplectic_matrix(n, s)), sector_projections(dims)


def embed(vector: np.ndarray, sector: Sector, dims: PhaseSpaceDim) -> np.ndarray:
    """Place a sector vector into full coordinates, zero elsewhere."""

    sl = dims.sector_slice(sector)
    vector = np.asarray(vector, dtype=float)
    if vector.shape[-1] != sl.stop - sl.start:
        raise DimensionMismatchError(f"{Sector(sector).value} vector has length {vector.shape[-1]}")
    out = np.zeros(vector.shape[:-1] + (dims.d,))
    out[..., sl] = vector
    return out


def project(vector: np.ndarray, sector: Sector, dims: PhaseSpaceDim) -> np.ndarray:
    return dims.check_vector(vector)[..., dims.sector_slice(sector)]


def _check_same_dim(sigma: SymplecticForm, *descriptors: WeylDescriptor) -> None:
    for descriptor in descriptors:
        if descriptor.d != sigma.d:
            raise DimensionMismatchError(f"descriptor of dimension {descriptor.d} used with σ of dimension {sigma.d}")


def composition_phase(xi: np.ndarray, eta: np.ndarray, sigma: SymplecticForm) -> complex:
    """Phase in W(ξ)W(η) = W(ξ+η)·exp(-(i/2)ξᵀση)."""

    return complex(np.exp(-0.5j * sigma.form(np.asarray(xi, float), np.asarray(eta, float))))


def weyl_compose(a: WeylDescriptor, b: WeylDescriptor, sigma: SymplecticForm) -> WeylDescriptor:
    """Descriptor of the product ``a · b``."""

    _check_same_dim(sigma, a, b)
    return WeylDescriptor(a.xi + b.xi, a.amplitude * b.amplitude * composition_phase(a.xi, b.xi, sigma))


def weyl_adjoint_conjugate(zeta: np.ndarray, a: WeylDescriptor, sigma: SymplecticForm) -> WeylDescriptor:
    """Descriptor of W₁(σζ)† a W₁(σζ).

    ``zeta`` is either a quantum-sector vector of length 2n or its embedding in full
    coordinates. The frequency is unchanged; the amplitude picks up exp(i (σζ)ᵀσξ) = exp(i ζ·P₁ξ).
    """

    _check_same_dim(sigma, a)
    zeta = np.asarray(zeta, dtype=float)
    classical_rows = ~np.any(sigma.matrix != 0, axis=1)
    n_quantum = int(np.count_nonzero(~classical_rows))
    if zeta.shape == (n_quantum,):
        zeta = np.concatenate((zeta, np.zeros(sigma.d - n_quantum)))
    elif zeta.shape != (sigma.d,):
        raise DimensionMismatchError(f"zeta has shape {zeta.shape}, expected ({n_quantum},) or ({sigma.d},)")
    if np.any(zeta[classical_rows] != 0):
        raise InvalidParameterError("zeta must lie in the quantum sector")
    shift = sigma.matrix @ zeta
    return WeylDescriptor(a.xi, a.amplitude * np.exp(1j * float(sigma.form(shift, a.xi))))


__all__ = [
    "Sector",
    "PhaseSpaceDim",
    "SymplecticForm",
    "SectorProjections",
    "WeylDescriptor",
    "symplectic_matrix",
    "sector_projections",
    "make_phase_space",
    "embed",
    "project",
    "composition_phase",
    "weyl_compose",
    "weyl_adjoint_conjugate",
]
