"""
Generator parameters (Z, A, α, ν) of a quasi-free hybrid semigroup.

Holds the block algebra, the complete-positivity validator, the split of the generator into
quantum, classical and interaction terms, and the structural classifiers built on it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from hybridqf.errors import DimensionMismatchError, InformationFlowInconsistency, InvalidParameterError
from hybridqf.levy import LevyAtom, LevyExponentParams, LevyMeasure, levy_marginal
from hybridqf.phase_space import PhaseSpaceDim, Sector, SectorProjections, SymplecticForm, make_phase_space

logger = logging.getLogger(__name__)

STRUCTURE_ATOL = 1e-12
DEFAULT_POSITIVITY_TOL = 1e-10


@dataclass(frozen=True)
class GeneratorParams:
    dims: PhaseSpaceDim
    z_matrix: np.ndarray
    exponent: LevyExponentParams

    def __post_init__(self) -> None:
        z_matrix = self.dims.check_matrix(self.z_matrix, "Z")
        if not np.all(np.isfinite(z_matrix)):
            raise InvalidParameterError("Z must be finite")
        if self.exponent.d != self.dims.d:
            raise DimensionMismatchError(f"exponent has dimension {self.exponent.d}, phase space has {self.dims.d}")
        object.__setattr__(self, "z_matrix", z_matrix)

    @cached_property
    def _phase_space(self) -> Tuple[PhaseSpaceDim, SymplecticForm, SectorProjections]:
        return make_phase_space(self.dims.n, self.dims.s)

    @property
    def sigma(self) -> SymplecticForm:
        return self._phase_space[1]

    @property
    def projections(self) -> SectorProjections:
        return self._phase_space[2]

    @property
    def alpha(self) -> np.ndarray:
        return self.exponent.alpha

    @property
    def a_matrix(self) -> np.ndarray:
        return self.exponent.a_matrix

    @property
    def nu(self) -> LevyMeasure:
        return self.exponent.nu

    def growth_rate(self) -> float:
        """Largest real part of the spectrum of Z."""

        return float(np.linalg.eigvals(self.z_matrix).real.max())

    def is_stable(self) -> bool:
        return self.growth_rate() <= STRUCTURE_ATOL


@dataclass(frozen=True)
class BlockView:
    z11: np.ndarray
    z10: np.ndarray
    z01: np.ndarray
    z00: np.ndarray
    a11: np.ndarray
    a10: np.ndarray
    a00: np.ndarray
    beta: np.ndarray
    alpha0: np.ndarray

    @property
    def a01(self) -> np.ndarray:
        return self.a10.T

    def assemble(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Z, A, α) from the blocks."""

        z_matrix = np.block([[self.z11, self.z10], [self.z01, self.z00]])
        a_matrix = np.block([[self.a11, self.a10], [self.a10.T, self.a00]])
        return z_matrix, a_matrix, np.concatenate([self.beta, self.alpha0])


@dataclass(frozen=True)
class DerivedMatrices:
    b_matrix: np.ndarray
    d_matrix: np.ndarray
    g_matrix: np.ndarray
    c_matrix: np.ndarray
    e_matrix: np.ndarray

    @property
    def b11(self) -> np.ndarray:
        q = self.d_matrix.shape[0]
        return self.b_matrix[:q, :q]

    @property
    def b10(self) -> np.ndarray:
        q = self.d_matrix.shape[0]
        return self.b_matrix[:q, q:]

    @property
    def b01(self) -> np.ndarray:
        q = self.d_matrix.shape[0]
        return self.b_matrix[q:, :q]

    def positivity_block(self) -> np.ndarray:
        """The Hermitian matrix (G, E; E†, C)."""

        return np.block([[self.g_matrix, self.e_matrix], [self.e_matrix.conj().T, self.c_matrix.astype(complex)]])


def quantum_sigma(dims: PhaseSpaceDim) -> np.ndarray:
    """σ restricted to Ξ₁ (2n × 2n)."""

    return make_phase_space(dims.n, dims.s)[1].matrix[dims.quantum_slice, dims.quantum_slice]


def derive_blocks(params: GeneratorParams) -> Tuple[BlockView, DerivedMatrices]:
    q, c = params.dims.quantum_slice, params.dims.classical_slice
    z, a, alpha = params.z_matrix, params.a_matrix, params.alpha
    blocks = BlockView(
        z11=z[q, q].copy(),
        z10=z[q, c].copy(),
        z01=z[c, q].copy(),
        z00=z[c, c].copy(),
        a11=a[q, q].copy(),
        a10=a[q, c].copy(),
        a00=a[c, c].copy(),
        beta=alpha[q].copy(),
        alpha0=alpha[c].copy(),
    )

    sigma = params.sigma.matrix
    sq = sigma[q, q]
    b_matrix = 0.5 * (sigma @ z - z.T @ sigma.T)
    d_matrix = 0.5 * (blocks.z11 @ sq + sq.T @ blocks.z11.T)
    g_matrix = sq.T @ blocks.a11 @ sq + 0.5j * (sq.T @ blocks.z11.T - blocks.z11 @ sq)
    e_matrix = sq.T @ blocks.a10 - 0.5j * blocks.z10
    derived = DerivedMatrices(
        b_matrix=b_matrix,
        d_matrix=d_matrix,
        g_matrix=g_matrix,
        c_matrix=blocks.a00.copy(),
        e_matrix=e_matrix,
    )
    return blocks, derived


class EigenViolation(BaseModel):
    form: str
    eigenvalue: float
    eigenvector_real: List[float]
    eigenvector_imag: List[float]


class PositivityReport(BaseModel):
    """Both forms of the complete-positivity condition on (Z, A)."""

    valid: bool
    tol: float
    min_eig_a_plus_ib: float
    min_eig_a_minus_ib: float
    min_eig_block: float
    forms_agree: bool
    eigenvalues_a_plus_ib: List[float]
    eigenvalues_block: List[float]
    violation: Optional[EigenViolation] = None


def _hermitian_eigh(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    hermitized = 0.5 * (matrix + matrix.conj().T)
    return np.linalg.eigh(hermitized)


def validate_positivity(params: GeneratorParams, tol: float = DEFAULT_POSITIVITY_TOL) -> PositivityReport:
    """Check A ± iB ≥ 0 and (G, E; E†, C) ≥ 0 up to ``tol`` on the minimum eigenvalue."""

    _, derived = derive_blocks(params)
    a = params.a_matrix.astype(complex)
    plus_vals, plus_vecs = _hermitian_eigh(a + 1j * derived.b_matrix)
    minus_vals, minus_vecs = _hermitian_eigh(a - 1j * derived.b_matrix)
    block_vals, block_vecs = _hermitian_eigh(derived.positivity_block())

    lam_plus, lam_minus, lam_block = plus_vals[0], minus_vals[0], block_vals[0]
    direct_ok = min(lam_plus, lam_minus) >= -tol
    block_ok = lam_block >= -tol
    forms_agree = direct_ok == block_ok
    if not forms_agree:
        logger.error(
            "Positivity forms disagree",
            extra={"min_eig_a_pm_ib": float(min(lam_plus, lam_minus)), "min_eig_block": float(lam_block)},
        )

    violation = None
    if not direct_ok:
        form, value, vector = (
            ("A+iB", lam_plus, plus_vecs[:, 0]) if lam_plus <= lam_minus else ("A-iB", lam_minus, minus_vecs[:, 0])
        )
        violation = EigenViolation(
            form=form, eigenvalue=float(value), eigenvector_real=vector.real.tolist(), eigenvector_imag=vector.imag.tolist()
        )
    elif not block_ok:
        vector = block_vecs[:, 0]
        violation = EigenViolation(
            form="(G,E;E†,C)",
            eigenvalue=float(lam_block),
            eigenvector_real=vector.real.tolist(),
            eigenvector_imag=vector.imag.tolist(),
        )

    return PositivityReport(
        valid=direct_ok and block_ok,
        tol=tol,
        min_eig_a_plus_ib=float(lam_plus),
        min_eig_a_minus_ib=float(lam_minus),
        min_eig_block=float(lam_block),
        forms_agree=forms_agree,
        eigenvalues_a_plus_ib=plus_vals.tolist(),
        eigenvalues_block=block_vals.tolist(),
        violation=violation,
    )


@dataclass(frozen=True)
class IndexedAtom:
    """A Lévy atom together with its position in the original measure."""

    index: int
    atom: LevyAtom


@dataclass(frozen=True)
class QuantumDiffusiveTerm:
    g_matrix: np.ndarray
    beta: np.ndarray
    d_matrix: np.ndarray


@dataclass(frozen=True)
class ClassicalDiffusiveTerm:
    alpha0: np.ndarray
    z00: np.ndarray
    c_matrix: np.ndarray


@dataclass(frozen=True)
class GeneratorTermDecomposition:
    """Coefficient content of the eight generator terms.

    ``lq2`` holds every atom with a quantum part, ``kcl2`` every atom with a classical part
    and ``kint4`` the atoms that have both.
    """

    dims: PhaseSpaceDim
    lq1: QuantumDiffusiveTerm
    lq2: Tuple[IndexedAtom, ...]
    kcl1: ClassicalDiffusiveTerm
    kcl2: Tuple[IndexedAtom, ...]
    kint1: np.ndarray
    kint2: np.ndarray
    kint3: np.ndarray
    kint4: Tuple[IndexedAtom, ...]
    cutoff_radius: float = 1.0


def _atom_support(atom: LevyAtom, dims: PhaseSpaceDim) -> Tuple[bool, bool]:
    has_quantum = np.linalg.norm(atom.eta[dims.quantum_slice]) > STRUCTURE_ATOL
    has_classical = np.linalg.norm(atom.eta[dims.classical_slice]) > STRUCTURE_ATOL
    return bool(has_quantum), bool(has_classical)


def decompose_terms(params: GeneratorParams) -> GeneratorTermDecomposition:
    blocks, derived = derive_blocks(params)
    lq2, kcl2, kint4 = [], [], []
    for index, atom in enumerate(params.nu.atoms):
        has_quantum, has_classical = _atom_support(atom, params.dims)
        entry = IndexedAtom(index, atom)
        if has_quantum:
            lq2.append(entry)
        if has_classical:
            kcl2.append(entry)
        if has_quantum and has_classical:
            kint4.append(entry)

    return GeneratorTermDecomposition(
        dims=params.dims,
        lq1=QuantumDiffusiveTerm(g_matrix=derived.g_matrix, beta=blocks.beta, d_matrix=derived.d_matrix),
        lq2=tuple(lq2),
        kcl1=ClassicalDiffusiveTerm(alpha0=blocks.alpha0, z00=blocks.z00, c_matrix=derived.c_matrix),
        kcl2=tuple(kcl2),
        kint1=blocks.z01,
        kint2=derived.e_matrix.imag.copy(),
        kint3=derived.e_matrix.real.copy(),
        kint4=tuple(kint4),
        cutoff_radius=params.nu.cutoff_radius,
    )


def reassemble(decomposition: GeneratorTermDecomposition) -> GeneratorParams:
    """Inverse of :func:`decompose_terms`."""

    dims = decomposition.dims
    sq = quantum_sigma(dims)
    lq1, kcl1 = decomposition.lq1, decomposition.kcl1
    # D − Im G = Z¹¹σ and σᵀ = σ⁻¹ on Ξ₁
    z11 = (lq1.d_matrix - lq1.g_matrix.imag) @ sq.T
    a11 = sq @ lq1.g_matrix.real @ sq.T
    blocks = BlockView(
        z11=z11,
        z10=-2.0 * decomposition.kint2,
        z01=decomposition.kint1,
        z00=kcl1.z00,
        a11=a11,
        a10=sq @ decomposition.kint3,
        a00=kcl1.c_matrix,
        beta=lq1.beta,
        alpha0=kcl1.alpha0,
    )
    z_matrix, a_matrix, alpha = blocks.assemble()

    by_index = {entry.index: entry.atom for entry in decomposition.lq2 + decomposition.kcl2}
    atoms = tuple(by_index[index] for index in sorted(by_index))
    nu = LevyMeasure(dim=dims.d, atoms=atoms, cutoff_radius=decomposition.cutoff_radius)
    a_matrix = 0.5 * (a_matrix + a_matrix.T)
    return GeneratorParams(dims=dims, z_matrix=z_matrix, exponent=LevyExponentParams(alpha, a_matrix, nu))


@dataclass(frozen=True)
class HamiltonianCoefficients:
    """H_q = βᵀσR + ½RᵀDR and H_x = xᵀZ⁰¹σR as coefficient arrays."""

    hq_linear: np.ndarray
    hq_quadratic: np.ndarray
    hx_coupling: np.ndarray


def hamiltonians(params: GeneratorParams) -> HamiltonianCoefficients:
    blocks, derived = derive_blocks(params)
    sq = quantum_sigma(params.dims)
    return HamiltonianCoefficients(
        hq_linear=sq.T @ blocks.beta,
        hq_quadratic=derived.d_matrix,
        hx_coupling=blocks.z01 @ sq,
    )


class StructureFlags(BaseModel):
    translation_invariant: bool
    quantum_dissipationless: bool
    classical_dissipationless: bool
    autonomous_quantum_reduction: bool
    autonomous_classical_reduction: bool


def _is_zero(matrix: np.ndarray) -> bool:
    return bool(np.all(np.abs(matrix) <= STRUCTURE_ATOL))


def classify(params: GeneratorParams) -> StructureFlags:
    blocks, derived = derive_blocks(params)
    quantum_jumps = levy_marginal(params.nu, Sector.QUANTUM, params.dims)
    classical_jumps = levy_marginal(params.nu, Sector.CLASSICAL, params.dims)
    return StructureFlags(
        translation_invariant=_is_zero(blocks.z00) and _is_zero(blocks.z01),
        quantum_dissipationless=_is_zero(derived.g_matrix) and quantum_jumps.is_empty,
        classical_dissipationless=_is_zero(derived.c_matrix) and classical_jumps.is_empty,
        autonomous_quantum_reduction=_is_zero(blocks.z01),
        autonomous_classical_reduction=_is_zero(blocks.z10),
    )


class InformationFlowReport(BaseModel):
    """What the no-dissipation lemma forces on the interaction terms."""

    quantum_dissipationless: bool
    classical_dissipationless: bool
    e_norm: float
    e_bound: Optional[float]
    forced_zero_terms: List[str]
    information_flow_blocked: bool
    message: str


def check_no_information_flow(params: GeneratorParams, tol: float = DEFAULT_POSITIVITY_TOL) -> InformationFlowReport:
    """Apply the PSD block lemma: G = 0 or C = 0 in a PSD (G, E; E†, C) forces E = 0.

    For M + tol·𝟙 ≥ 0 every entry obeys |M_ij|² ≤ (M_ii + tol)(M_jj + tol), which bounds
    ‖E‖_F by √((tr G + 2n·tol)(tr C + s·tol)).
    """

    positivity = validate_positivity(params, tol)
    if not positivity.valid:
        raise InvalidParameterError("information-flow analysis requires parameters that pass validate_positivity")

    flags = classify(params)
    _, derived = derive_blocks(params)
    n2, s = 2 * params.dims.n, params.dims.s
    e_norm = float(np.linalg.norm(derived.e_matrix))

    if not (flags.quantum_dissipationless or flags.classical_dissipationless):
        return InformationFlowReport(
            quantum_dissipationless=False,
            classical_dissipationless=False,
            e_norm=e_norm,
            e_bound=None,
            forced_zero_terms=[],
            information_flow_blocked=False,
            message="dissipation present in both sectors; interaction terms unconstrained",
        )

    trace_g = max(float(np.trace(derived.g_matrix).real), 0.0)
    trace_c = max(float(np.trace(derived.c_matrix)), 0.0)
    e_bound = float(np.sqrt((trace_g + n2 * tol) * (trace_c + s * tol))) + STRUCTURE_ATOL
    if e_norm > e_bound:
        raise InformationFlowInconsistency(
            f"‖E‖_F = {e_norm:.3e} exceeds the PSD-lemma bound {e_bound:.3e} on validated parameters"
        )
    if decompose_terms(params).kint4:
        raise InformationFlowInconsistency("joint jump atoms survive although one sector is jump-free")

    messages = []
    if flags.quantum_dissipationless:
        messages.append("no quantum dissipation: information flow quantum→classical impossible")
    if flags.classical_dissipationless:
        messages.append("no classical dissipation: no information reaches the classical component")
    logger.info("No-information-flow lemma applied", extra={"e_norm": e_norm, "e_bound": e_bound})
    return InformationFlowReport(
        quantum_dissipationless=flags.quantum_dissipationless,
        classical_dissipationless=flags.classical_dissipationless,
        e_norm=e_norm,
        e_bound=e_bound,
        forced_zero_terms=["kint2", "kint3", "kint4"],
        information_flow_blocked=True,
        message="; ".join(messages),
    )


@dataclass(frozen=True)
class ReducedQuantumGenerator:
    """𝓛_q¹ + 𝓛_q² + i[H_x, ·]; autonomous only when H_x = 0."""

    g_matrix: np.ndarray
    hamiltonian: HamiltonianCoefficients
    jumps: LevyMeasure
    autonomous: bool


@dataclass(frozen=True)
class ReducedClassicalGenerator:
    """Coefficients of the Kolmogorov-Fokker-Planck equation of the classical marginal.

    ``quantum_feed`` (= Z¹⁰ᵀ) couples the classical drift to the quantum coordinates and makes
    the reduction non-autonomous when non-zero.
    """

    drift_const: np.ndarray
    drift_linear: np.ndarray
    diffusion: np.ndarray
    jumps: LevyMeasure
    quantum_feed: np.ndarray
    autonomous: bool


def reduced_quantum_generator(params: GeneratorParams) -> ReducedQuantumGenerator:
    blocks, derived = derive_blocks(params)
    return ReducedQuantumGenerator(
        g_matrix=derived.g_matrix,
        hamiltonian=hamiltonians(params),
        jumps=levy_marginal(params.nu, Sector.QUANTUM, params.dims),
        autonomous=_is_zero(blocks.z01),
    )


def reduced_classical_generator(params: GeneratorParams) -> ReducedClassicalGenerator:
    blocks, derived = derive_blocks(params)
    return ReducedClassicalGenerator(
        drift_const=blocks.alpha0,
        drift_linear=blocks.z00.T.copy(),
        diffusion=derived.c_matrix,
        jumps=levy_marginal(params.nu, Sector.CLASSICAL, params.dims),
        quantum_feed=blocks.z10.T.copy(),
        autonomous=_is_zero(blocks.z10),
    )


__all__ = [
    "GeneratorParams",
    "BlockView",
    "DerivedMatrices",
    "PositivityReport",
    "EigenViolation",
    "IndexedAtom",
    "QuantumDiffusiveTerm",
    "ClassicalDiffusiveTerm",
    "GeneratorTermDecomposition",
    "HamiltonianCoefficients",
    "StructureFlags",
    "InformationFlowReport",
    "ReducedQuantumGenerator",
    "ReducedClassicalGenerator",
    "quantum_sigma",
    "derive_blocks",
    "validate_positivity",
    "decompose_terms",
    "reassemble",
    "hamiltonians",
    "classify",
    "check_no_information_flow",
    "reduced_quantum_generator",
    "reduced_classical_generator",
]
