import numpy as np
import pytest
from conftest import build_params, damped_mode_params, hybrid_meter_params

from hybridqf.errors import DimensionMismatchError, InvalidParameterError
from hybridqf.generator import (
    check_no_information_flow,
    classify,
    decompose_terms,
    derive_blocks,
    hamiltonians,
    quantum_sigma,
    reassemble,
    reduced_classical_generator,
    reduced_quantum_generator,
    validate_positivity,
)
from hybridqf.levy import LevyAtom
from hybridqf.phase_space import PhaseSpaceDim


def random_draw(rng: np.random.Generator, n: int, s: int):
    """Unconstrained (Z, A) so that both accepted and rejected draws occur."""

    d = 2 * n + s
    z_matrix = rng.standard_normal((d, d))
    factor = rng.standard_normal((d, d)) * rng.uniform(0.1, 1.5)
    return build_params(n, s, z_matrix, factor @ factor.T)


def no_quantum_noise_draw(rng: np.random.Generator, n: int, s: int):
    """A¹¹ = A¹⁰ = 0 and Hamiltonian Z¹¹ = Sσᵀ, so G = 0, with a random feed Z¹⁰."""

    d = 2 * n + s
    sq = quantum_sigma(PhaseSpaceDim(n, s))
    sym = rng.standard_normal((2 * n, 2 * n))
    z_matrix = rng.standard_normal((d, d))
    z_matrix[: 2 * n, : 2 * n] = 0.5 * (sym + sym.T) @ sq.T
    a_matrix = np.zeros((d, d))
    c_factor = rng.standard_normal((s, s))
    a_matrix[2 * n :, 2 * n :] = c_factor @ c_factor.T
    return build_params(n, s, z_matrix, a_matrix)


class TestDampedMode:
    def test_eigenvalues(self):
        report = validate_positivity(damped_mode_params(gamma=1.0))
        assert report.valid
        assert np.allclose(report.eigenvalues_a_plus_ib, [0.0, 1.0], atol=1e-12)
        assert report.forms_agree

    def test_g_matrix(self):
        gamma = 0.7
        _, derived = derive_blocks(damped_mode_params(gamma))
        sigma = quantum_sigma(PhaseSpaceDim(1, 0))
        assert np.allclose(derived.g_matrix, 0.5 * gamma * (np.eye(2) + 1j * sigma))
        assert np.allclose(np.linalg.eigvalsh(derived.g_matrix), [0.0, gamma], atol=1e-12)
        assert np.allclose(derived.d_matrix, 0.0)

    def test_dissipation_without_noise_rejected(self):
        params = build_params(1, 0, -0.5 * np.eye(2), np.zeros((2, 2)))
        report = validate_positivity(params)
        assert not report.valid
        assert report.violation is not None
        assert report.violation.eigenvalue == pytest.approx(-0.5)
        assert min(report.min_eig_a_plus_ib, report.min_eig_a_minus_ib) == pytest.approx(-0.5)

    def test_pure_classical_reduces_to_psd(self):
        params = build_params(0, 2, np.array([[-1.0, 0.3], [2.0, 0.1]]), np.diag([1.0, 0.0]))
        assert validate_positivity(params).valid
        params = build_params(0, 1, [[-1.0]], [[0.0]])
        assert validate_positivity(params).valid


class TestPositivityForms:
    def test_forms_agree_on_random_draws(self, rng):
        accepted = rejected = 0
        for index in range(1000):
            n, s = [(1, 0), (0, 1), (1, 1), (2, 0), (1, 2), (2, 1)][index % 6]
            report = validate_positivity(random_draw(rng, n, s), tol=1e-9)
            assert report.forms_agree
            direct = min(report.min_eig_a_plus_ib, report.min_eig_a_minus_ib) >= -1e-9
            assert direct == (report.min_eig_block >= -1e-9)
            accepted += report.valid
            rejected += not report.valid
        assert accepted > 0 and rejected > 0

    def test_block_is_unitary_congruence(self, rng):
        params = random_draw(rng, 1, 1)
        _, derived = derive_blocks(params)
        a_minus = params.a_matrix - 1j * derived.b_matrix
        assert np.allclose(
            np.linalg.eigvalsh(derived.positivity_block()), np.linalg.eigvalsh(a_minus), atol=1e-10
        )

    @pytest.mark.parametrize("seed", range(20))
    def test_information_flow_without_quantum_noise_rejected(self, seed):
        rng = np.random.default_rng(seed)
        rejected = 0
        for index in range(50):
            n, s = [(1, 1), (1, 2), (2, 1)][index % 3]
            params = no_quantum_noise_draw(rng, n, s)
            _, derived = derive_blocks(params)
            assert np.allclose(derived.g_matrix, 0.0, atol=1e-12)
            assert np.linalg.norm(derived.e_matrix) > 1e-6
            rejected += not validate_positivity(params).valid
        assert rejected == 50

    def test_hybrid_meter_valid(self):
        report = validate_positivity(hybrid_meter_params())
        assert report.valid
        assert report.min_eig_a_plus_ib == pytest.approx(1.0 - np.sqrt(0.5), abs=1e-12)


class TestDecomposition:
    def test_round_trip(self, make_random_params, rng):
        for n, s in [(1, 0), (0, 2), (1, 1), (2, 1)]:
            params = make_random_params(rng, n, s, jumps=True)
            rebuilt = reassemble(decompose_terms(params))
            assert np.allclose(rebuilt.z_matrix, params.z_matrix, atol=1e-12)
            assert np.allclose(rebuilt.a_matrix, params.a_matrix, atol=1e-12)
            assert np.allclose(rebuilt.alpha, params.alpha)
            assert np.allclose(rebuilt.nu.etas, params.nu.etas)

    def test_atom_classification(self):
        atoms = (
            LevyAtom(np.array([0.5, 0.0, 0.0]), 1.0),
            LevyAtom(np.array([0.0, 0.0, 0.5]), 1.0),
            LevyAtom(np.array([0.5, 0.0, 0.5]), 1.0),
        )
        params = build_params(1, 1, -np.eye(3), np.eye(3), atoms=atoms)
        terms = decompose_terms(params)
        assert [entry.index for entry in terms.lq2] == [0, 2]
        assert [entry.index for entry in terms.kcl2] == [1, 2]
        assert [entry.index for entry in terms.kint4] == [2]

    def test_interaction_terms(self):
        terms = decompose_terms(hybrid_meter_params(kappa=1.0))
        assert np.allclose(terms.kint2, [[-0.5], [0.0]])
        assert np.allclose(terms.kint3, 0.0)
        assert np.allclose(terms.kint1, 0.0)

    def test_hamiltonians(self):
        z_matrix = np.zeros((3, 3))
        z_matrix[:2, :2] = np.array([[0.0, 1.0], [-1.0, 0.0]])
        z_matrix[2, :2] = [0.4, 0.0]
        params = build_params(1, 1, z_matrix, np.diag([0.0, 0.0, 1.0]), alpha=[0.2, 0.0, 0.0])
        coefficients = hamiltonians(params)
        sq = quantum_sigma(params.dims)
        _, derived = derive_blocks(params)
        assert np.allclose(coefficients.hq_quadratic, derived.d_matrix)
        assert np.allclose(coefficients.hq_linear, sq.T @ [0.2, 0.0])
        assert np.allclose(coefficients.hx_coupling, [[0.4, 0.0]] @ sq)


class TestClassifiers:
    def test_translation_invariance(self):
        assert classify(hybrid_meter_params()).translation_invariant
        z_matrix = np.zeros((3, 3))
        z_matrix[2, 0] = 0.3
        params = build_params(1, 1, z_matrix, np.eye(3))
        assert not classify(params).translation_invariant

    def test_hybrid_meter_flags(self):
        flags = classify(hybrid_meter_params())
        assert not flags.quantum_dissipationless
        assert not flags.classical_dissipationless
        assert flags.autonomous_quantum_reduction
        assert not flags.autonomous_classical_reduction

    def test_no_information_flow_when_quantum_dissipationless(self):
        z_matrix = np.zeros((3, 3))
        z_matrix[:2, :2] = np.array([[0.0, 1.0], [-1.0, 0.0]])
        params = build_params(1, 1, z_matrix, np.diag([0.0, 0.0, 1.0]))
        report = check_no_information_flow(params)
        assert report.quantum_dissipationless
        assert report.information_flow_blocked
        assert report.e_norm == pytest.approx(0.0)
        assert "kint2" in report.forced_zero_terms

    def test_information_flow_open_for_meter(self):
        report = check_no_information_flow(hybrid_meter_params())
        assert not report.information_flow_blocked
        assert report.e_norm == pytest.approx(0.5)

    def test_bound_at_tolerance_edge(self):
        tol = 2e-11

        def coupled(eps: float):
            a_matrix = np.diag([0.0, 0.0, 1.0])
            a_matrix[0, 2] = a_matrix[2, 0] = eps
            return build_params(1, 1, np.zeros((3, 3)), a_matrix)

        # min eig of [[0, ε], [ε, 1]] is −tol exactly at ε² = tol(1 + tol)
        edge = np.sqrt(tol * (1.0 + tol))
        report = check_no_information_flow(coupled(0.99 * edge), tol=tol)
        assert report.quantum_dissipationless
        assert report.information_flow_blocked
        assert report.e_norm == pytest.approx(0.99 * edge, rel=1e-9)
        assert report.e_bound == pytest.approx(np.sqrt(2.0 * tol * (1.0 + tol)), rel=1e-6)
        assert report.e_norm <= report.e_bound

        for eps in (1.01 * edge, 1.01 * report.e_bound):
            params = coupled(eps)
            assert not validate_positivity(params, tol=tol).valid
            with pytest.raises(InvalidParameterError):
                check_no_information_flow(params, tol=tol)

    def test_requires_positive_parameters(self):
        with pytest.raises(InvalidParameterError):
            check_no_information_flow(build_params(1, 0, -0.5 * np.eye(2), np.zeros((2, 2))))

    def test_damped_mode_not_dissipationless(self):
        assert not check_no_information_flow(damped_mode_params()).quantum_dissipationless


class TestReducedDynamics:
    def test_classical_reduction_of_meter(self):
        reduced = reduced_classical_generator(hybrid_meter_params(kappa=0.8, c=2.0))
        assert np.allclose(reduced.quantum_feed, [[0.8, 0.0]])
        assert np.allclose(reduced.diffusion, [[2.0]])
        assert not reduced.autonomous

    def test_quantum_reduction_autonomous_without_coupling(self):
        reduced = reduced_quantum_generator(hybrid_meter_params())
        assert reduced.autonomous
        assert np.allclose(reduced.g_matrix, derive_blocks(hybrid_meter_params())[1].g_matrix)

    def test_stability(self):
        assert damped_mode_params().is_stable()
        assert not build_params(0, 1, [[0.2]], [[1.0]]).is_stable()


def test_z_dimension_checked():
    with pytest.raises(DimensionMismatchError):
        build_params(1, 0, np.eye(3), np.eye(2))
