import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st
from numpy.testing import assert_allclose

from app.core.exceptions import DimensionError, DomainError, HermiticityError, UnitsError, ZeroNormError
from app.models_schemas.models import ComplexOperator, StateVector
from app.services.linalg_service import (
    PAULI_X, PAULI_Y, PAULI_Z, HilbertSpaceService, max_norm, named_operator,
    random_complex_vector, random_hermitian, random_unitary, spin_matrices
)

S = 1.0 / np.sqrt(2.0)

finite = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)


@st.composite
def complex_vectors(draw, dim):
    parts = draw(st.lists(finite, min_size=2 * dim, max_size=2 * dim))
    return np.array(parts[:dim]) + 1j * np.array(parts[dim:])


@st.composite
def hermitian_matrices(draw):
    dim = draw(st.integers(min_value=1, max_value=5))
    seed = draw(st.integers(min_value=0, max_value=2**31))
    return random_hermitian(np.random.default_rng(seed), dim)


class TestInner:
    def test_orthonormal_basis(self):
        assert HilbertSpaceService.inner(StateVector([1, 0]), StateVector([0, 1])) == 0

    def test_unit_norm(self):
        v = StateVector([S, 1j * S])
        assert HilbertSpaceService.inner(v, v) == pytest.approx(1.0)

    def test_conjugate_linear_in_first_argument(self):
        assert HilbertSpaceService.inner(StateVector([1, 2j]), StateVector([3, 1])) == pytest.approx(3 - 2j)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            HilbertSpaceService.inner(StateVector([1, 0]), StateVector([1, 0, 0]))

    def test_seeded_corpus_symmetry_and_positivity(self, rng):
        for _ in range(1000):
            dim = int(rng.integers(2, 9))
            u = StateVector(random_complex_vector(rng, dim))
            v = StateVector(random_complex_vector(rng, dim))
            assert HilbertSpaceService.inner(u, v) == pytest.approx(np.conj(HilbertSpaceService.inner(v, u)))
            norm = HilbertSpaceService.inner(u, u)
            assert abs(norm.imag) <= 1e-12 and norm.real >= 0

    @hypothesis_settings(max_examples=50, derandomize=True)
    @given(st.integers(min_value=1, max_value=6).flatmap(lambda d: st.tuples(complex_vectors(d), complex_vectors(d))))
    def test_conjugate_symmetry(self, pair):
        u, v = StateVector(pair[0]), StateVector(pair[1])
        left = HilbertSpaceService.inner(u, v)
        right = np.conj(HilbertSpaceService.inner(v, u))
        assert abs(left - right) <= 1e-9 * max(1.0, abs(left))


class TestDagger:
    def test_identity(self):
        assert_allclose(HilbertSpaceService.dagger(np.eye(3)).entries, np.eye(3))

    def test_nilpotent(self):
        assert_allclose(HilbertSpaceService.dagger([[0, 1], [0, 0]]).entries, [[0, 0], [1, 0]])

    def test_conjugate_transpose(self):
        A = np.array([[1j, 2], [3, -1j]])
        assert_allclose(HilbertSpaceService.dagger(A).entries, [[-1j, 3], [2, 1j]])

    @hypothesis_settings(max_examples=50, derandomize=True)
    @given(st.integers(min_value=0, max_value=2**31), st.integers(min_value=1, max_value=6))
    def test_involution_and_adjoint_pairing(self, seed, dim):
        rng = np.random.default_rng(seed)
        A = ComplexOperator(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
        dagger = HilbertSpaceService.dagger(A)
        assert np.array_equal(HilbertSpaceService.dagger(dagger).entries, A.entries)

        phi = StateVector(random_complex_vector(rng, dim))
        psi = StateVector(random_complex_vector(rng, dim))
        lhs = HilbertSpaceService.inner(dagger @ phi, psi)
        rhs = HilbertSpaceService.inner(phi, A @ psi)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


class TestPredicates:
    def test_hermitian_examples(self):
        assert HilbertSpaceService.is_hermitian(PAULI_Z, 1e-12)
        assert not HilbertSpaceService.is_hermitian([[0, 1], [0, 0]], 1e-12)

    def test_hermitian_tolerance_boundary(self):
        A = PAULI_X + 1e-8 * np.array([[0, 1], [0, 0]])
        assert not HilbertSpaceService.is_hermitian(A, 1e-10)
        assert HilbertSpaceService.is_hermitian(A, 1e-6)

    def test_unitary_examples(self):
        assert HilbertSpaceService.is_unitary(np.eye(2))
        assert not HilbertSpaceService.is_unitary(np.diag([2.0, 1.0]))
        theta = 0.7
        rotation = np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * PAULI_Y
        assert HilbertSpaceService.is_unitary(rotation, 1e-12)

    def test_zero_tolerance_allowed(self):
        assert HilbertSpaceService.is_hermitian(PAULI_X, 0.0)
        assert HilbertSpaceService.is_unitary(np.eye(3), 0.0)

    @pytest.mark.parametrize("tol", [-1e-12, -1.0, float("nan")])
    def test_negative_tolerance_rejected(self, tol):
        with pytest.raises(DomainError):
            HilbertSpaceService.is_hermitian(PAULI_Z, tol)
        with pytest.raises(DomainError):
            HilbertSpaceService.is_unitary(np.eye(2), tol)

    def test_max_norm_of_empty(self):
        assert max_norm(np.zeros((0,))) == 0.0


class TestExponential:
    def test_zero_generator_is_identity(self):
        assert_allclose(HilbertSpaceService.expm_hermitian_generator(np.zeros((3, 3)), 4.2).entries, np.eye(3))

    def test_diagonal_flow(self):
        hbar, omega, t = 0.5, 3.0, 0.8
        H = 0.5 * hbar * omega * PAULI_Z
        U = HilbertSpaceService.expm_hermitian_generator(H, t, hbar).entries
        assert_allclose(U, np.diag([np.exp(-0.5j * omega * t), np.exp(0.5j * omega * t)]), atol=1e-14)

    def test_sigma_x_half_turn(self):
        U = HilbertSpaceService.expm_hermitian_generator(PAULI_X, np.pi, 1.0).entries
        assert_allclose(U, -np.eye(2), atol=1e-14)

    def test_non_hermitian_rejected(self):
        with pytest.raises(HermiticityError):
            HilbertSpaceService.expm_hermitian_generator([[0, 1], [0, 0]], 1.0)

    def test_non_positive_hbar_rejected(self):
        with pytest.raises(UnitsError):
            HilbertSpaceService.expm_hermitian_generator(PAULI_Z, 1.0, 0.0)

    @hypothesis_settings(max_examples=40, derandomize=True)
    @given(hermitian_matrices(), finite)
    def test_unitary_for_hermitian_generators(self, H, theta):
        assert HilbertSpaceService.is_unitary(HilbertSpaceService.expm_hermitian_generator(H, theta), 1e-10)

    @hypothesis_settings(max_examples=40, derandomize=True)
    @given(hermitian_matrices(), finite, finite)
    def test_group_property(self, H, a, b):
        flow = lambda theta: HilbertSpaceService.expm_hermitian_generator(H, theta).entries
        assert max_norm(flow(a) @ flow(b) - flow(a + b)) <= 1e-10


class TestExpectation:
    def test_identity(self, rng):
        psi = StateVector(random_complex_vector(rng, 4))
        assert HilbertSpaceService.expectation(np.eye(4), psi) == pytest.approx(1.0)

    def test_eigenstates(self):
        assert HilbertSpaceService.expectation(PAULI_Z, StateVector([1, 0])) == pytest.approx(1.0)
        assert HilbertSpaceService.expectation(PAULI_X, StateVector([S, S])) == pytest.approx(1.0)

    def test_zero_norm(self):
        with pytest.raises(ZeroNormError):
            HilbertSpaceService.expectation(PAULI_Z, StateVector([0, 0]))

    def test_scale_invariance(self, rng):
        A = random_hermitian(rng, 3)
        psi = random_complex_vector(rng, 3)
        base = HilbertSpaceService.expectation(A, StateVector(psi))
        for c in (1e-3, 2.5 - 1j, 1e4j):
            scaled = HilbertSpaceService.expectation(A, StateVector(c * psi))
            assert abs(scaled - base) <= 1e-12 * max(1.0, abs(base))


class TestNamedOperators:
    def test_spin_half_is_half_pauli(self):
        j_x, j_y, j_z = spin_matrices(2)
        assert_allclose(j_x, 0.5 * PAULI_X)
        assert_allclose(j_y, 0.5 * PAULI_Y)
        assert_allclose(j_z, 0.5 * PAULI_Z)

    def test_spin_commutator(self):
        j_x, j_y, j_z = spin_matrices(4)
        assert_allclose(j_x @ j_y - j_y @ j_x, 1j * j_z, atol=1e-12)

    def test_pauli_requires_dim_two(self):
        with pytest.raises(DimensionError):
            named_operator("sigma_z", 3)

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            named_operator("sigma_w", 2)

    def test_random_unitary_is_unitary(self, rng):
        assert HilbertSpaceService.is_unitary(random_unitary(rng, 6), 1e-12)
