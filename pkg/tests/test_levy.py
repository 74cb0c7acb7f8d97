import numpy as np
import pytest

from hybridqf.errors import DimensionMismatchError, InvalidParameterError
from hybridqf.levy import (
    LevyAtom,
    LevyExponentParams,
    LevyMeasure,
    compensator_drift,
    gaussian_equivalent,
    levy_marginal,
    psi_eval,
    uncompensate_atom,
    validate_levy,
)
from hybridqf.phase_space import PhaseSpaceDim, Sector


@pytest.fixture
def jump_params() -> LevyExponentParams:
    atoms = (
        LevyAtom(np.array([0.3, -0.2, 0.1]), 0.8),
        LevyAtom(np.array([0.0, 0.0, 2.0]), 1.5),
        LevyAtom(np.array([1.2, 0.4, 0.0]), 0.4),
    )
    return LevyExponentParams(
        alpha=np.array([0.1, -0.3, 0.5]),
        a_matrix=np.diag([0.4, 0.2, 0.7]),
        nu=LevyMeasure(dim=3, atoms=atoms),
    )


def naive_psi(params: LevyExponentParams, xi: np.ndarray) -> complex:
    value = 1j * xi @ params.alpha - 0.5 * xi @ params.a_matrix @ xi
    for atom in params.nu.atoms:
        indicator = float(np.linalg.norm(atom.eta) < 1.0)
        theta = atom.eta @ xi
        value += atom.weight * (np.exp(1j * theta) - 1.0 - 1j * indicator * theta)
    return value


class TestPsi:
    def test_vanishes_at_origin(self, jump_params):
        assert psi_eval(jump_params, np.zeros(3)) == 0.0

    def test_matches_direct_formula(self, jump_params, rng):
        for xi in rng.standard_normal((20, 3)):
            assert psi_eval(jump_params, xi) == pytest.approx(naive_psi(jump_params, xi), abs=1e-13)

    def test_hermitian_and_non_positive_real_part(self, jump_params, rng):
        xi = 3.0 * rng.standard_normal((50, 3))
        values, mirrored = psi_eval(jump_params, xi), psi_eval(jump_params, -xi)
        assert np.allclose(mirrored, values.conj(), atol=1e-13)
        assert np.all(values.real <= 1e-15)

    def test_gaussian_only(self):
        params = LevyExponentParams(alpha=np.array([2.0]), a_matrix=np.array([[3.0]]), nu=LevyMeasure(dim=1))
        assert psi_eval(params, np.array([1.0])) == pytest.approx(2.0j - 1.5)

    def test_small_argument_keeps_relative_accuracy(self):
        atom = LevyAtom(np.array([1.0]), 1.0, compensated=True)
        params = LevyExponentParams(alpha=np.zeros(1), a_matrix=np.zeros((1, 1)), nu=LevyMeasure(dim=1, atoms=(atom,)))
        theta = 1e-6
        value = psi_eval(params, np.array([theta]))
        assert value.real == pytest.approx(-0.5 * theta**2 + theta**4 / 24.0, rel=1e-12)
        theta = 1e-3
        value = psi_eval(params, np.array([theta]))
        assert value.imag == pytest.approx(-(theta**3) / 6.0 + theta**5 / 120.0, rel=1e-6)

    def test_broadcasts(self, jump_params, rng):
        assert psi_eval(jump_params, rng.standard_normal((4, 7, 3))).shape == (4, 7)

    def test_nan_rejected(self, jump_params):
        with pytest.raises(InvalidParameterError):
            psi_eval(jump_params, np.array([np.nan, 0.0, 0.0]))

    def test_dimension_mismatch(self, jump_params):
        with pytest.raises(DimensionMismatchError):
            psi_eval(jump_params, np.zeros(2))


class TestParams:
    def test_rejects_indefinite_diffusion(self):
        with pytest.raises(InvalidParameterError):
            LevyExponentParams(alpha=np.zeros(2), a_matrix=np.diag([1.0, -0.1]), nu=LevyMeasure(dim=2))

    def test_rejects_asymmetric_diffusion(self):
        with pytest.raises(InvalidParameterError):
            LevyExponentParams(alpha=np.zeros(2), a_matrix=np.array([[1.0, 0.5], [0.0, 1.0]]), nu=LevyMeasure(dim=2))

    def test_atom_dimension_checked(self):
        with pytest.raises(DimensionMismatchError):
            LevyMeasure(dim=2, atoms=(LevyAtom(np.ones(3), 1.0),))


class TestValidateLevy:
    def test_valid_measure(self, jump_params):
        report = validate_levy(jump_params.nu)
        assert report.valid
        assert report.n_atoms == 3
        assert report.total_rate == pytest.approx(2.7)

    def test_atom_at_origin(self):
        report = validate_levy(LevyMeasure(dim=2, atoms=(LevyAtom(np.zeros(2), 1.0),)))
        assert not report.valid
        assert "origin" in report.violations[0].reason

    def test_negative_and_zero_weights(self):
        nu = LevyMeasure(dim=1, atoms=(LevyAtom(np.ones(1), -0.5), LevyAtom(np.ones(1), 0.0)))
        reasons = [v.reason for v in validate_levy(nu).violations]
        assert reasons == ["negative weight", "zero weight"]

    def test_non_finite_atom(self):
        report = validate_levy(LevyMeasure(dim=1, atoms=(LevyAtom(np.array([np.inf]), 1.0),)))
        assert report.violations[0].reason == "non-finite atom"


class TestMarginals:
    def test_classical_marginal(self, jump_params):
        marginal = levy_marginal(jump_params.nu, Sector.CLASSICAL, PhaseSpaceDim(1, 1))
        assert marginal.dim == 1
        assert np.allclose(marginal.etas, [[0.1], [2.0]])
        assert np.allclose(marginal.weights, [0.8, 1.5])

    def test_marginal_keeps_hybrid_compensation_flag(self):
        atom = LevyAtom(np.array([3.0, 0.0, 0.2]), 1.0)
        marginal = levy_marginal(LevyMeasure(dim=3, atoms=(atom,)), Sector.CLASSICAL, PhaseSpaceDim(1, 1))
        assert not marginal.compensated_mask[0]

    def test_quantum_marginal_drops_classical_only_atoms(self, jump_params):
        marginal = levy_marginal(jump_params.nu, Sector.QUANTUM, PhaseSpaceDim(1, 1))
        assert len(marginal.atoms) == 2


class TestCompensator:
    def test_compensator_drift(self, jump_params):
        assert np.allclose(compensator_drift(jump_params.nu), 0.8 * np.array([0.3, -0.2, 0.1]))

    def test_uncompensate_leaves_psi_invariant(self, jump_params, rng):
        moved = uncompensate_atom(jump_params, 0)
        assert not moved.nu.atoms[0].is_compensated()
        xi = 2.0 * rng.standard_normal((40, 3))
        assert np.max(np.abs(psi_eval(moved, xi) - psi_eval(jump_params, xi))) <= 1e-10

    def test_uncompensate_is_noop_for_large_atom(self, jump_params):
        assert uncompensate_atom(jump_params, 1) is jump_params

    def test_gaussian_equivalent_matches_derivatives(self, jump_params):
        alpha_eff, a_eff = gaussian_equivalent(jump_params)
        h = 1e-4
        eye = np.eye(3)
        gradient = np.array([(psi_eval(jump_params, h * e) - psi_eval(jump_params, -h * e)) / (2 * h) for e in eye])
        assert np.allclose(gradient.imag, alpha_eff, atol=1e-7)
        hessian = np.array(
            [
                [
                    (
                        psi_eval(jump_params, h * (ei + ej))
                        - psi_eval(jump_params, h * (ei - ej))
                        - psi_eval(jump_params, h * (ej - ei))
                        + psi_eval(jump_params, -h * (ei + ej))
                    ).real
                    / (4 * h * h)
                    for ej in eye
                ]
                for ei in eye
            ]
        )
        assert np.allclose(-hessian, a_eff, atol=1e-5)

    def test_gaussian_equivalent_invariant_under_uncompensation(self, jump_params):
        before = gaussian_equivalent(jump_params)
        after = gaussian_equivalent(uncompensate_atom(jump_params, 0))
        assert np.allclose(before[0], after[0], atol=1e-14)
        assert np.allclose(before[1], after[1], atol=1e-14)
