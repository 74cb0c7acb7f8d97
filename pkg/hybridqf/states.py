"""
Hybrid states as characteristic functions: the exact Gaussian family and sampled grids.

Grids over ξ are symmetric about the origin with an odd number of points per axis, so ξ = 0
is always a grid point and centred FFTs map them exactly onto phase-space grids.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import fft, linalg
from scipy.integrate import trapezoid
from scipy.interpolate import RegularGridInterpolator
from scipy.stats import multivariate_normal, qmc

from hybridqf.errors import DimensionMismatchError, InvalidParameterError, SingularClassicalBlockError
from hybridqf.phase_space import PhaseSpaceDim, symplectic_matrix

logger = logging.getLogger(__name__)

CharFn = Callable[[np.ndarray], np.ndarray]

MAX_GRID_DIM = 4
DECAY_THRESHOLD = 1e-6
ILL_CONDITIONED = 1e10


@dataclass(frozen=True)
class HybridGaussianState:
    """Gaussian hybrid state with χ(ξ) = exp(i meanᵀξ − ½ ξᵀ cov ξ)."""

    dims: PhaseSpaceDim
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = self.dims.check_vector(self.mean, "mean").reshape(self.dims.d)
        cov = self.dims.check_matrix(self.cov, "cov")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise InvalidParameterError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @classmethod
    def vacuum(cls, n: int, s: int, classical_cov: Optional[np.ndarray] = None) -> "HybridGaussianState":
        dims = PhaseSpaceDim(n, s)
        cov = np.zeros((dims.d, dims.d))
        cov[dims.quantum_slice, dims.quantum_slice] = 0.5 * np.eye(2 * n)
        cov[dims.classical_slice, dims.classical_slice] = np.eye(s) if classical_cov is None else classical_cov
        return cls(dims=dims, mean=np.zeros(dims.d), cov=cov)

    def charfn(self, xi: np.ndarray) -> np.ndarray:
        return gaussian_charfn(self, xi)

    def quantum_min_eigenvalue(self) -> float:
        """Smallest eigenvalue of cov + (i/2)σ."""

        twisted = self.cov + 0.5j * symplectic_matrix(self.dims.n, self.dims.s)
        return float(np.linalg.eigvalsh(twisted)[0])

    def is_admissible(self, tol: float = 1e-10) -> bool:
        return self.quantum_min_eigenvalue() >= -tol


def gaussian_charfn(state: HybridGaussianState, xi: np.ndarray) -> np.ndarray:
    xi = state.dims.check_vector(xi, "xi")
    value = np.exp(1j * (xi @ state.mean) - 0.5 * np.einsum("...i,ij,...j->...", xi, state.cov, xi))
    if np.ndim(value) == 0:
        return complex(value)
    return value


@dataclass(frozen=True)
class GridSpec:
    """Per-axis half-extent L_i and odd point count N_i of a grid symmetric about 0."""

    extents: Tuple[float, ...]
    points: Tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "points", tuple(int(p) for p in self.points))
        if len(self.extents) != len(self.points):
            raise DimensionMismatchError("extents and points must have the same length")
        if any(p < 3 or p % 2 == 0 for p in self.points):
            raise InvalidParameterError(f"grid point counts must be odd and ≥ 3, got {self.points}")
        if any(e <= 0 for e in self.extents):
            raise InvalidParameterError("grid extents must be positive")

    @classmethod
    def uniform(cls, d: int, extent: float, points: int) -> "GridSpec":
        return cls(extents=(extent,) * d, points=(points,) * d)

    @property
    def d(self) -> int:
        return len(self.points)

    @property
    def spacings(self) -> np.ndarray:
        return np.array([2.0 * e / (p - 1) for e, p in zip(self.extents, self.points)])

    def axes(self) -> List[np.ndarray]:
        return [np.linspace(-e, e, p) for e, p in zip(self.extents, self.points)]

    def mesh(self) -> np.ndarray:
        """Grid points with shape (N_1, ..., N_d, d)."""

        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)


@dataclass(frozen=True)
class CharFnGrid:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.spec.points:
            raise DimensionMismatchError(f"values have shape {values.shape}, grid expects {self.spec.points}")
        object.__setattr__(self, "values", values)

    @property
    def origin_value(self) -> complex:
        return complex(self.values[tuple(p // 2 for p in self.spec.points)])

    def hermitian_defect(self) -> float:
        """max |χ(−ξ) − conj χ(ξ)| over the grid."""

        mirrored = np.flip(self.values, axis=tuple(range(self.spec.d)))
        return float(np.max(np.abs(mirrored - self.values.conj())))

    def boundary_max(self) -> float:
        peak = 0.0
        for axis in range(self.spec.d):
            for index in (0, -1):
                peak = max(peak, float(np.max(np.abs(np.take(self.values, index, axis=axis)))))
        return peak

    def interpolator(self) -> CharFn:
        """Multilinear interpolation of the samples, zero outside the grid."""

        interp = RegularGridInterpolator(self.spec.axes(), self.values, bounds_error=False, fill_value=0.0)

        def chi(xi: np.ndarray) -> np.ndarray:
            xi = np.asarray(xi, dtype=float)
            return interp(xi.reshape(-1, self.spec.d)).reshape(xi.shape[:-1])

        return chi


@dataclass(frozen=True)
class WignerGrid:
    """Real phase-space density sampled on centred axes z_i = (k − (N_i−1)/2)·Δz_i."""

    spacings: Tuple[float, ...]
    values: np.ndarray
    aliasing_warning: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "spacings", tuple(float(s) for s in self.spacings))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != len(self.spacings):
            raise DimensionMismatchError("one spacing per grid axis is required")

    @property
    def d(self) -> int:
        return self.values.ndim

    def axes(self) -> List[np.ndarray]:
        return [(np.arange(n) - (n - 1) / 2) * dz for n, dz in zip(self.values.shape, self.spacings)]

    def mesh(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def normalization(self) -> float:
        """Trapezoid-rule integral of the density."""

        integral = self.values
        for dz in self.spacings:
            integral = trapezoid(integral, dx=dz, axis=0)
        return float(integral)


def sample_charfn(chi: CharFn, spec: GridSpec) -> CharFnGrid:
    return CharFnGrid(spec=spec, values=chi(spec.mesh()))


def wigner_from_charfn(chi: CharFnGrid) -> WignerGrid:
    """W(z) = (2π)^{-d} ∫ dξ e^{−i zᵀξ} χ(ξ) by a centred FFT; Δz_i = 2π/(N_i Δξ_i)."""

    spec = chi.spec
    if spec.d > MAX_GRID_DIM:
        raise InvalidParameterError(f"Wigner grids are limited to d ≤ {MAX_GRID_DIM}, got {spec.d}")

    boundary = chi.boundary_max()
    aliasing = boundary >= DECAY_THRESHOLD
    if aliasing:
        logger.warning("Characteristic function has not decayed at the grid boundary", extra={"boundary_max": boundary})

    dxi = spec.spacings
    transformed = fft.fftshift(fft.fftn(fft.ifftshift(chi.values)))
    values = transformed * (np.prod(dxi) / (2.0 * np.pi) ** spec.d)
    imaginary = float(np.max(np.abs(values.imag)))
    if imaginary > 1e-8:
        logger.warning("Wigner transform has an imaginary residue", extra={"max_imag": imaginary})

    spacings = tuple(2.0 * np.pi / (n * step) for n, step in zip(spec.points, dxi))
    return WignerGrid(spacings=spacings, values=values.real, aliasing_warning=aliasing)


def charfn_from_wigner(wigner: WignerGrid) -> CharFnGrid:
    """χ(ξ) = ∫ dz e^{i zᵀξ} W(z), the inverse of :func:`wigner_from_charfn`."""

    shape = wigner.values.shape
    dz = np.array(wigner.spacings)
    transformed = fft.fftshift(fft.ifftn(fft.ifftshift(wigner.values)))
    values = transformed * (np.prod(shape) * np.prod(dz))
    dxi = 2.0 * np.pi / (np.array(shape) * dz)
    extents = tuple(float(step * (n - 1) / 2) for step, n in zip(dxi, shape))
    return CharFnGrid(spec=GridSpec(extents=extents, points=shape), values=values)


def classical_marginal_density(chi: CharFnGrid, dims: PhaseSpaceDim) -> WignerGrid:
    """Density of the classical component from the slice χ(0, k)."""

    if dims.d != chi.spec.d:
        raise DimensionMismatchError(f"grid has dimension {chi.spec.d}, phase space has {dims.d}")
    if dims.s == 0:
        raise InvalidParameterError("no classical component")
    centre = tuple(p // 2 for p in chi.spec.points[: 2 * dims.n])
    sliced = chi.values[centre]
    spec = GridSpec(extents=chi.spec.extents[2 * dims.n :], points=chi.spec.points[2 * dims.n :])
    return wigner_from_charfn(CharFnGrid(spec=spec, values=sliced))


class AdmissibilityReport(BaseModel):
    """Twisted positive-definiteness of χ on a finite sample."""

    passed: bool
    n_points: int
    min_eigenvalue: float
    normalization_error: float
    tol: float
    warnings: List[str]


def twisted_sample(d: int, n_points: int, radius: float, seed: int = 0) -> np.ndarray:
    """The origin followed by ``n_points − 1`` scrambled Halton points in [−radius, radius]^d."""

    if n_points < 1:
        raise InvalidParameterError("need at least one sample point")
    points = qmc.Halton(d=d, scramble=True, seed=seed).random(n_points - 1)
    return np.vstack([np.zeros((1, d)), radius * (2.0 * points - 1.0)])


def _heuristic_warnings(chi: CharFn, sample: np.ndarray, rng: np.random.Generator) -> List[str]:
    warnings: List[str] = []
    direction = rng.standard_normal(sample.shape)
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    jump = np.abs(chi(sample + 1e-6 * direction) - chi(sample))
    if np.max(jump) > 1e-3:
        warnings.append("characteristic function looks discontinuous near the sample points")

    far_radius = 10.0 * max(1.0, float(np.max(np.linalg.norm(sample, axis=-1))))
    far = rng.standard_normal((32, sample.shape[-1]))
    far *= far_radius / np.linalg.norm(far, axis=-1, keepdims=True)
    if np.max(np.abs(chi(far))) > DECAY_THRESHOLD:
        warnings.append("characteristic function does not decay; integrability (L¹) not verified")
    return warnings


def admissibility_check(
    chi: CharFn, sample: np.ndarray, sigma: np.ndarray, tol: float = 1e-10, seed: int = 0
) -> AdmissibilityReport:
    """Minimum eigenvalue of M_kl = χ(ξ_k − ξ_l)·exp((i/2) ξ_kᵀσξ_l) plus χ(0) = 1.

    Continuity and integrability are probed heuristically and only produce warnings.
    """

    sample = np.asarray(sample, dtype=float)
    n_points = sample.shape[0]
    if sample.ndim != 2 or sample.shape[1] != sigma.shape[0]:
        raise DimensionMismatchError(f"sample has shape {sample.shape}, expected (N, {sigma.shape[0]})")
    if n_points > 64:
        raise InvalidParameterError(f"admissibility samples are limited to 64 points, got {n_points}")
    if not np.any(np.all(sample == 0.0, axis=1)):
        raise InvalidParameterError("admissibility sample must contain ξ = 0")

    differences = sample[:, None, :] - sample[None, :, :]
    phases = np.exp(0.5j * np.einsum("ki,ij,lj->kl", sample, sigma, sample))
    matrix = chi(differences) * phases
    matrix = 0.5 * (matrix + matrix.conj().T)
    min_eigenvalue = float(np.linalg.eigvalsh(matrix)[0])
    normalization_error = float(abs(chi(np.zeros(sigma.shape[0])) - 1.0))

    warnings = _heuristic_warnings(chi, sample, np.random.default_rng(seed))
    for warning in warnings:
        logger.warning(warning)
    return AdmissibilityReport(
        passed=min_eigenvalue >= -tol and normalization_error <= tol,
        n_points=n_points,
        min_eigenvalue=min_eigenvalue,
        normalization_error=normalization_error,
        tol=tol,
        warnings=warnings,
    )


@dataclass(frozen=True)
class GaussianMarginal:
    mean: np.ndarray
    cov: np.ndarray

    def density(self, x: np.ndarray) -> np.ndarray:
        return multivariate_normal(mean=self.mean, cov=self.cov).pdf(x)


def marginals(state: HybridGaussianState) -> Tuple[GaussianMarginal, GaussianMarginal]:
    """(quantum, classical) restrictions of the mean and covariance."""

    q, c = state.dims.quantum_slice, state.dims.classical_slice
    quantum = GaussianMarginal(mean=state.mean[q].copy(), cov=state.cov[q, q].copy())
    classical = GaussianMarginal(mean=state.mean[c].copy(), cov=state.cov[c, c].copy())
    return quantum, classical


@dataclass(frozen=True)
class ConditionalDecomposition:
    """π(x) = p(x)·ρ(x): Gaussian classical density times a Gaussian conditional quantum state."""

    dims: PhaseSpaceDim
    classical_mean: np.ndarray
    classical_cov: np.ndarray
    quantum_mean: np.ndarray
    gain: np.ndarray
    conditional_cov: np.ndarray
    condition_number: float

    def classical_density(self, x: np.ndarray) -> np.ndarray:
        return multivariate_normal(mean=self.classical_mean, cov=self.classical_cov).pdf(x)

    def conditional_mean(self, x: np.ndarray) -> np.ndarray:
        return self.quantum_mean + (np.asarray(x, dtype=float) - self.classical_mean) @ self.gain.T

    def joint_charfn(self, xi: np.ndarray) -> np.ndarray:
        """∫ p(x) e^{ik·x} χ_ρ(x)(ζ) dx evaluated in closed form."""

        xi = self.dims.check_vector(xi, "xi")
        zeta, k = xi[..., self.dims.quantum_slice], xi[..., self.dims.classical_slice]
        effective = k + zeta @ self.gain
        exponent = (
            1j * (k @ self.classical_mean + zeta @ self.quantum_mean)
            - 0.5 * np.einsum("...i,ij,...j->...", effective, self.classical_cov, effective)
            - 0.5 * np.einsum("...i,ij,...j->...", zeta, self.conditional_cov, zeta)
        )
        return np.exp(exponent)


def conditional_decomposition(state: HybridGaussianState) -> ConditionalDecomposition:
    dims = state.dims
    if dims.s == 0:
        raise InvalidParameterError("conditional decomposition needs a classical component")
    q, c = dims.quantum_slice, dims.classical_slice
    v_cl, v_qc, v_q = state.cov[c, c], state.cov[q, c], state.cov[q, q]

    try:
        factor = linalg.cho_factor(v_cl)
    except linalg.LinAlgError as exc:
        raise SingularClassicalBlockError(
            "classical covariance block is singular; add a small diagonal regularization to condition on it"
        ) from exc
    condition_number = float(np.linalg.cond(v_cl))
    if condition_number > ILL_CONDITIONED:
        logger.warning("Classical covariance block is ill-conditioned", extra={"condition_number": condition_number})

    gain = linalg.cho_solve(factor, v_qc.T).T
    conditional_cov = v_q - gain @ v_qc.T
    conditional_cov = 0.5 * (conditional_cov + conditional_cov.T)
    if dims.n:
        sigma_q = symplectic_matrix(dims.n, 0)
        min_eig = float(np.linalg.eigvalsh(conditional_cov + 0.5j * sigma_q)[0])
        if min_eig < -1e-9:
            raise InvalidParameterError(
                f"conditional quantum state is not admissible (min eigenvalue {min_eig:.3e}); the input state is invalid"
            )

    return ConditionalDecomposition(
        dims=dims,
        classical_mean=state.mean[c].copy(),
        classical_cov=v_cl.copy(),
        quantum_mean=state.mean[q].copy(),
        gain=gain,
        conditional_cov=conditional_cov,
        condition_number=condition_number,
    )


def gaussian_state_grid(state: HybridGaussianState, spec: GridSpec) -> CharFnGrid:
    return sample_charfn(state.charfn, spec)


__all__ = [
    "CharFn",
    "HybridGaussianState",
    "GridSpec",
    "CharFnGrid",
    "WignerGrid",
    "AdmissibilityReport",
    "GaussianMarginal",
    "ConditionalDecomposition",
    "gaussian_charfn",
    "sample_charfn",
    "wigner_from_charfn",
    "charfn_from_wigner",
    "classical_marginal_density",
    "twisted_sample",
    "admissibility_check",
    "marginals",
    "conditional_decomposition",
    "gaussian_state_grid",
]
