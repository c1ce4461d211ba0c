import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.exceptions import BasePointError, DimensionError, DomainError, MorphismError, UnitarityError
from app.models_schemas.models import FibreMap, FibreVector, PathFamily, StateVector, TrivializationFamily
from app.services.bundle_service import BundleService
from app.services.linalg_service import (
    PAULI_Y, PAULI_Z, HilbertSpaceService, max_norm, random_complex_matrix, random_complex_vector
)

FAMILIES = list(TrivializationFamily)


def rotation_z():
    return BundleService.make_trivialization(TrivializationFamily.ROTATION_FIELD, 2, axis=[0, 0, 1])


def random_point(rng, scale=2.0):
    return scale * rng.standard_normal(3)


class TestPaths:
    def test_line(self):
        path = BundleService.make_path(PathFamily.LINE, (0.0, 3.0), 4)
        assert_allclose(BundleService.eval_path(path, 2.0), [2.0, 0.0, 0.0])

    def test_circle(self):
        path = BundleService.make_path(PathFamily.CIRCLE, (0.0, 2 * np.pi), 9)
        assert_allclose(BundleService.eval_path(path, np.pi), [-1.0, 0.0, 0.0], atol=1e-15)

    def test_figure_eight_self_intersection(self, figure_eight_path):
        assert_allclose(BundleService.eval_path(figure_eight_path, 0.0), [0, 0, 0], atol=1e-15)
        assert_allclose(BundleService.eval_path(figure_eight_path, np.pi), [0, 0, 0], atol=1e-15)

    def test_grid_endpoints(self):
        path = BundleService.make_path(PathFamily.LINE, (0.1, 0.7), 7)
        assert path.grid[0] == 0.1 and path.grid[-1] == 0.7
        assert np.all(np.diff(path.grid) > 0)

    def test_out_of_domain(self, line_path):
        with pytest.raises(DomainError):
            BundleService.eval_path(line_path, 2.5)

    def test_degenerate_domain(self):
        with pytest.raises(DomainError):
            BundleService.make_path(PathFamily.LINE, (1.0, 1.0), 4)


class TestTrivializations:
    def test_identity(self, rng):
        T = BundleService.make_trivialization(TrivializationFamily.IDENTITY, 3)
        assert_allclose(BundleService.trivialization_at(T, random_point(rng)).entries, np.eye(3))

    def test_rotation_zero_angle(self):
        assert_allclose(rotation_z().at([0.0, 4.0, -2.0]), np.eye(2), atol=1e-15)

    def test_rotation_half_turn(self):
        expected = np.diag([np.exp(-0.5j * np.pi), np.exp(0.5j * np.pi)])
        assert_allclose(rotation_z().at([np.pi, 0.0, 0.0]), expected, atol=1e-14)

    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("dim", [2, 4])
    def test_unitary_and_deterministic(self, family, dim, rng):
        T = BundleService.make_trivialization(family, dim, seed=9)
        for _ in range(20):
            x = random_point(rng)
            l_x = T.at(x)
            assert HilbertSpaceService.is_unitary(l_x, 1e-10)
            assert np.array_equal(l_x, T.at(x.copy()))

    def test_zero_axis_rejected(self):
        with pytest.raises(UnitarityError):
            BundleService.make_trivialization(TrivializationFamily.ROTATION_FIELD, 2, axis=[0, 0, 0])

    def test_infinite_strength_rejected(self):
        with pytest.raises(UnitarityError):
            BundleService.make_trivialization(TrivializationFamily.SEEDED_RANDOM_UNITARY, 2, strength=np.inf)

    def test_negative_unitarity_tolerance_rejected(self):
        with pytest.raises(DomainError):
            BundleService.make_trivialization(TrivializationFamily.IDENTITY, 2, unitarity_tol=-1e-10)


class TestFibreVectors:
    def test_identity_components(self):
        T = BundleService.make_trivialization(TrivializationFamily.IDENTITY, 2)
        psi = StateVector([0.6, 0.8j])
        assert_allclose(BundleService.to_fibre(T, [1, 2, 3], psi).components, psi.amplitudes)

    def test_rotation_inverse_applied(self):
        fibre = BundleService.to_fibre(rotation_z(), [np.pi, 0, 0], StateVector([1.0, 0.0]))
        assert_allclose(fibre.components, [1j, 0.0], atol=1e-14)

    def test_round_trip_and_metric(self, trivialization_dim2, rng):
        T = trivialization_dim2
        for _ in range(500):
            x = random_point(rng)
            phi = StateVector(random_complex_vector(rng, 2))
            psi = StateVector(random_complex_vector(rng, 2))
            fibre_phi = BundleService.to_fibre(T, x, phi)
            fibre_psi = BundleService.to_fibre(T, x, psi)
            assert max_norm(BundleService.from_fibre(T, fibre_phi).amplitudes - phi.amplitudes) <= 1e-12
            pulled = BundleService.fibre_inner(T, x, fibre_phi, fibre_psi)
            assert abs(pulled - HilbertSpaceService.inner(phi, psi)) <= 1e-12

    def test_zero_vector(self, trivialization_dim2):
        zero = FibreVector([0.5, 0, 0], [0, 0])
        assert_allclose(BundleService.from_fibre(trivialization_dim2, zero).amplitudes, [0, 0])

    def test_orthogonality_preserved(self, trivialization_dim2):
        x = [0.3, -1.2, 0.8]
        a = BundleService.to_fibre(trivialization_dim2, x, StateVector([1, 0]))
        b = BundleService.to_fibre(trivialization_dim2, x, StateVector([0, 1]))
        assert abs(BundleService.fibre_inner(trivialization_dim2, x, a, b)) <= 1e-14

    def test_unit_vector_inner(self):
        T = BundleService.make_trivialization(TrivializationFamily.IDENTITY, 2)
        v = FibreVector([0, 0, 0], [1, 0])
        assert BundleService.fibre_inner(T, [0, 0, 0], v, v) == 1

    def test_base_point_mismatch(self):
        T = BundleService.make_trivialization(TrivializationFamily.IDENTITY, 2)
        with pytest.raises(BasePointError):
            BundleService.fibre_inner(T, [0, 0, 0], FibreVector([0, 0, 0], [1, 0]), FibreVector([1, 0, 0], [1, 0]))

    def test_dimension_mismatch(self):
        T = BundleService.make_trivialization(TrivializationFamily.IDENTITY, 2)
        with pytest.raises(DimensionError):
            BundleService.to_fibre(T, [0, 0, 0], StateVector([1, 0, 0]))


class TestFibreMaps:
    def test_identity_trivialization_is_conjugate_transpose(self, rng):
        T = BundleService.make_trivialization(TrivializationFamily.IDENTITY, 3)
        M = random_complex_matrix(rng, 3)
        A = FibreMap([1, 0, 0], [0, 1, 0], M)
        conjugate = BundleService.fibre_map_dagger(A, T)
        assert_allclose(conjugate.matrix, M.conj().T)
        assert_allclose(conjugate.source, [0, 1, 0])
        assert_allclose(conjugate.target, [1, 0, 0])

    def test_involution(self, rng):
        T = BundleService.make_trivialization(TrivializationFamily.ROTATION_FIELD, 2, axis=rng.standard_normal(3))
        for _ in range(100):
            A = FibreMap(random_point(rng), random_point(rng), random_complex_matrix(rng, 2))
            twice = BundleService.fibre_map_dagger(BundleService.fibre_map_dagger(A, T), T)
            assert max_norm(twice.matrix - A.matrix) <= 1e-12
            assert np.array_equal(twice.source, A.source)

    def test_reversal_law(self, trivialization_dim2, rng):
        T = trivialization_dim2
        for _ in range(50):
            x, y, z = (random_point(rng) for _ in range(3))
            A = FibreMap(x, y, random_complex_matrix(rng, 2))
            B = FibreMap(y, z, random_complex_matrix(rng, 2))
            lhs = BundleService.fibre_map_dagger(B @ A, T)
            rhs = BundleService.fibre_map_dagger(A, T) @ BundleService.fibre_map_dagger(B, T)
            assert max_norm(lhs.matrix - rhs.matrix) <= 1e-12

    def test_composition_requires_matching_points(self):
        A = FibreMap([0, 0, 0], [1, 0, 0], np.eye(2))
        B = FibreMap([2, 0, 0], [3, 0, 0], np.eye(2))
        with pytest.raises(DimensionError):
            B @ A

    @pytest.mark.parametrize("family", FAMILIES)
    def test_flat_transport_is_hermitian_and_unitary(self, family, rng):
        T = BundleService.make_trivialization(family, 2, seed=4)
        for _ in range(100):
            x, y = random_point(rng), random_point(rng)
            forward = BundleService.flat_transport(T, x, y)
            conjugate = BundleService.fibre_map_dagger(BundleService.flat_transport(T, y, x), T)
            inverse = np.linalg.inv(BundleService.flat_transport(T, y, x).matrix)
            assert max_norm(conjugate.matrix - forward.matrix) <= 1e-10
            assert max_norm(forward.matrix - inverse) <= 1e-10
            assert max_norm(conjugate.matrix - inverse) <= 1e-10

    def test_flat_transport_trivial_cases(self, rng):
        T = BundleService.make_trivialization(TrivializationFamily.SEEDED_RANDOM_UNITARY, 2, seed=1)
        x = random_point(rng)
        assert max_norm(BundleService.flat_transport(T, x, x).matrix - np.eye(2)) <= 1e-12
        identity = BundleService.make_trivialization(TrivializationFamily.IDENTITY, 2)
        assert_allclose(BundleService.flat_transport(identity, x, random_point(rng)).matrix, np.eye(2))

    def test_flat_transport_telescopes(self, trivialization_dim2, rng):
        T = trivialization_dim2
        for _ in range(20):
            x, y, z = (random_point(rng) for _ in range(3))
            composed = BundleService.flat_transport(T, y, z) @ BundleService.flat_transport(T, x, y)
            assert max_norm(composed.matrix - BundleService.flat_transport(T, x, z).matrix) <= 1e-12

    def test_trivialization_is_unitary_into_typical_fibre(self, trivialization_dim2, rng):
        x = random_point(rng)
        l_x = trivialization_dim2.at(x)
        assert BundleService.is_unitary_fibre_to_space(l_x, trivialization_dim2, x)
        assert max_norm(BundleService.fibre_to_space_dagger(l_x, trivialization_dim2, x) - np.linalg.inv(l_x)) <= 1e-12
        assert not BundleService.is_unitary_fibre_to_space(2.0 * l_x, trivialization_dim2, x)


class TestMorphisms:
    @staticmethod
    def conjugated(T, points, matrix):
        return [FibreMap(x, x, np.linalg.solve(T.at(x), matrix @ T.at(x))) for x in points]

    def test_hermitian_morphism(self, trivialization_dim2, rng):
        points = [random_point(rng) for _ in range(10)]
        A = self.conjugated(trivialization_dim2, points, PAULI_Z)
        assert BundleService.is_hermitian_morphism(A, trivialization_dim2)
        assert BundleService.morphism_pairing_defect(A, trivialization_dim2) <= 1e-12

    def test_unitary_morphism(self, trivialization_dim2, rng):
        points = [random_point(rng) for _ in range(10)]
        rotation = HilbertSpaceService.expm_hermitian_generator(PAULI_Y, 1.0).entries
        A = self.conjugated(trivialization_dim2, points, rotation)
        conjugates = BundleService.morphism_dagger(A, trivialization_dim2)
        for a, c in zip(A, conjugates):
            assert max_norm(c.matrix - np.linalg.inv(a.matrix)) <= 1e-12
        assert BundleService.is_unitary_morphism(A, trivialization_dim2)
        assert BundleService.is_isometric_morphism(A, trivialization_dim2)

    def test_zero_morphism(self, trivialization_dim2):
        A = [FibreMap([1, 1, 0], [1, 1, 0], np.zeros((2, 2)))]
        assert_allclose(BundleService.morphism_dagger(A, trivialization_dim2)[0].matrix, np.zeros((2, 2)))

    def test_unitary_iff_isometric(self, trivialization_dim2, rng):
        T = trivialization_dim2
        for k in range(100):
            x = random_point(rng)
            # metade unitária, metade gaussiana (negativos)
            if k % 2:
                matrix = np.linalg.qr(random_complex_matrix(rng, 2))[0]
            else:
                matrix = random_complex_matrix(rng, 2)
            A = self.conjugated(T, [x], matrix)
            assert BundleService.is_unitary_morphism(A, T) == BundleService.is_isometric_morphism(A, T)

    def test_base_point_must_be_preserved(self, trivialization_dim2):
        with pytest.raises(MorphismError):
            BundleService.morphism_dagger([FibreMap([0, 0, 0], [1, 0, 0], np.eye(2))], trivialization_dim2)
