from typing import List, Sequence

import numpy as np
import scipy.linalg as la

from ..core.config import settings
from ..core.exceptions import (
    BasePointError, DimensionError, DomainError, MorphismError, UnitarityError
)
from ..core.logging_config import get_logger
from ..models_schemas.models import (
    BasePath, ComplexOperator, FibreMap, FibreVector, PathFamily, StateVector,
    Trivialization, TrivializationFamily
)
from .linalg_service import (
    HilbertSpaceService, max_norm, random_complex_vector, random_hermitian,
    random_unitary, spin_matrices
)

logger = get_logger(__name__)


def _vector(values, size: int, default) -> np.ndarray:
    values = np.asarray(default if values is None else values, dtype=float)
    if values.shape != (size,):
        raise DimensionError(f"expected {size} coordinates, got shape {values.shape}")
    return values


class BundleService:
    """Caminhos na base, trivializações l_x e conjugação hermitiana entre fibras"""

    # ===== Caminhos =====
    @staticmethod
    def make_path(
        family: PathFamily,
        domain,
        grid_size: int,
        base_dim: int = 3,
        origin=None,
        velocity=None,
        center=None,
        radius: float = 1.0,
        frequency: float = 1.0,
        scale: float = 1.0,
        name: str = None,
    ) -> BasePath:
        a, b = float(domain[0]), float(domain[1])
        if not (np.isfinite(a) and np.isfinite(b) and b > a):
            raise DomainError(f"path domain must be a finite interval with b > a, got [{a}, {b}]")
        if grid_size < 2:
            raise DomainError(f"path grid needs at least 2 points, got {grid_size}")
        if base_dim < 1:
            raise DimensionError(f"base dimension must be positive, got {base_dim}")

        if family is PathFamily.LINE:
            start = _vector(origin, base_dim, np.zeros(base_dim))
            direction = _vector(velocity, base_dim, np.eye(base_dim)[0])
            mapping = lambda t: start + t * direction
        else:
            if base_dim < 2:
                raise DimensionError(f"{family.value} path needs base_dim >= 2")
            planar = np.zeros(base_dim)
            if family is PathFamily.CIRCLE:
                middle = _vector(center, base_dim, np.zeros(base_dim))

                def mapping(t):
                    point = middle.copy()
                    point[0] += radius * np.cos(frequency * t)
                    point[1] += radius * np.sin(frequency * t)
                    return point
            else:
                def mapping(t):
                    point = planar.copy()
                    point[0] = scale * np.sin(t)
                    point[1] = scale * np.sin(2.0 * t)
                    return point

        grid = np.linspace(a, b, grid_size)
        grid[0], grid[-1] = a, b
        path = BasePath(
            family=family,
            domain=(a, b),
            grid=grid,
            map=mapping,
            base_dim=base_dim,
            name=name or family.value,
        )
        for t in (a, b):
            if not np.all(np.isfinite(mapping(t))):
                raise DomainError(f"path {path.name} is not finite at t={t}")
        return path

    @staticmethod
    def eval_path(path: BasePath, t: float) -> np.ndarray:
        a, b = path.domain
        if not a <= t <= b:
            raise DomainError(f"t={t} outside path domain [{a}, {b}]")
        point = np.asarray(path.map(t), dtype=float)
        if not np.all(np.isfinite(point)):
            raise DomainError(f"path {path.name} is not finite at t={t}")
        return point

    # ===== Trivializações =====
    @staticmethod
    def make_trivialization(
        family: TrivializationFamily,
        dim: int,
        base_dim: int = 3,
        axis=None,
        gradient=None,
        seed: int = 0,
        strength: float = 1.0,
        unitarity_tol: float = None,
        name: str = None,
    ) -> Trivialization:
        """
        Famílias fechadas de l_x; a unitariedade é verificada em pontos de prova
        """
        params = {}
        if family is TrivializationFamily.IDENTITY:
            identity = np.eye(dim, dtype=complex)
            evaluator = lambda x: identity.copy()

        elif family is TrivializationFamily.ROTATION_FIELD:
            direction = _vector(axis, 3, [0.0, 0.0, 1.0])
            slope = _vector(gradient, base_dim, np.eye(base_dim)[0])
            length = np.linalg.norm(direction)
            if not np.isfinite(length) or length == 0 or not np.all(np.isfinite(slope)):
                raise UnitarityError(f"rotation_field needs a finite nonzero axis and finite gradient, got axis={direction}")
            direction = direction / length
            j_x, j_y, j_z = spin_matrices(dim)
            generator = direction[0] * j_x + direction[1] * j_y + direction[2] * j_z
            eigenvalues, eigenvectors = la.eigh(generator)
            params = {"axis": direction.tolist(), "gradient": slope.tolist()}

            def evaluator(x):
                angle = float(slope @ x)
                return (eigenvectors * np.exp(-1j * angle * eigenvalues)) @ eigenvectors.conj().T

        elif family is TrivializationFamily.SEEDED_RANDOM_UNITARY:
            if not np.isfinite(strength):
                raise UnitarityError(f"seeded_random_unitary strength must be finite, got {strength}")
            rng = np.random.default_rng(seed)
            anchor = random_unitary(rng, dim)
            generators = np.array([strength * random_hermitian(rng, dim) for _ in range(base_dim)])
            params = {"seed": seed, "strength": strength}

            def evaluator(x):
                field = np.tensordot(x, generators, axes=1)
                eigenvalues, eigenvectors = la.eigh(field)
                return anchor @ ((eigenvectors * np.exp(-1j * eigenvalues)) @ eigenvectors.conj().T)

        else:
            raise UnitarityError(f"unknown trivialization family {family}")

        trivialization = Trivialization(
            family=family,
            dim=dim,
            evaluator=evaluator,
            params=params,
            name=name or family.value,
        )
        for probe in (np.zeros(base_dim), np.ones(base_dim)):
            l_x = trivialization.at(probe)
            if not np.all(np.isfinite(l_x)) or not HilbertSpaceService.is_unitary(l_x, unitarity_tol):
                raise UnitarityError(f"trivialization {trivialization.name} is not unitary at x={probe.tolist()}")
        logger.debug("Trivialization built", family=family.value, dim=dim, params=params)
        return trivialization

    @staticmethod
    def trivialization_at(T: Trivialization, x) -> ComplexOperator:
        return ComplexOperator(T.at(x))

    # ===== Vetores nas fibras =====
    @staticmethod
    def to_fibre(T: Trivialization, x, psi: StateVector) -> FibreVector:
        """Ψ = l_x⁻¹(ψ)"""
        if psi.dim != T.dim:
            raise DimensionError(f"state dim {psi.dim} vs trivialization dim {T.dim}")
        return FibreVector(np.asarray(x, dtype=float), np.linalg.solve(T.at(x), psi.amplitudes))

    @staticmethod
    def from_fibre(T: Trivialization, phi: FibreVector) -> StateVector:
        """ψ = l_x(Ψ)"""
        if phi.dim != T.dim:
            raise DimensionError(f"fibre vector dim {phi.dim} vs trivialization dim {T.dim}")
        return StateVector(T.at(phi.base_point) @ phi.components)

    @staticmethod
    def fibre_inner(T: Trivialization, x, phi: FibreVector, psi: FibreVector) -> complex:
        """
        ⟨Φ|Ψ⟩_x na forma hermitiana padrão dos componentes (referencial ortonormal da fibra)
        """
        x = np.asarray(x, dtype=float)
        for vector in (phi, psi):
            if not np.array_equal(vector.base_point, x):
                raise BasePointError(f"vector at {vector.base_point.tolist()} is not in the fibre over {x.tolist()}")
            if vector.dim != T.dim:
                raise DimensionError(f"fibre vector dim {vector.dim} vs trivialization dim {T.dim}")
        return complex(np.vdot(phi.components, psi.components))

    # ===== Mapas entre fibras =====
    @staticmethod
    def fibre_map_dagger(A: FibreMap, T: Trivialization) -> FibreMap:
        """
        A‡_{x→y} = l_y⁻¹∘(l_x∘A_{y→x}∘l_y⁻¹)†∘l_x, com A = A_{y→x}
        """
        if A.dim != T.dim:
            raise DimensionError(f"fibre map dim {A.dim} vs trivialization dim {T.dim}")
        y, x = A.source, A.target
        l_x, l_y = T.at(x), T.at(y)
        inner = l_x @ A.matrix @ np.linalg.inv(l_y)
        return FibreMap(x, y, np.linalg.solve(l_y, inner.conj().T @ l_x))

    @staticmethod
    def flat_transport(T: Trivialization, x, y) -> FibreMap:
        """l_{x→y} = l_y⁻¹∘l_x"""
        return FibreMap(np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.linalg.solve(T.at(y), T.at(x)))

    @staticmethod
    def fibre_to_space_dagger(A_x, T: Trivialization, x) -> np.ndarray:
        """A_x‡ = l_x⁻¹∘(A_x∘l_x⁻¹)† para A_x: ℋ_x → ℋ"""
        l_x = T.at(x)
        matrix = np.asarray(A_x, dtype=complex)
        if matrix.shape != l_x.shape:
            raise DimensionError(f"map shape {matrix.shape} vs fibre dim {T.dim}")
        return np.linalg.solve(l_x, (matrix @ np.linalg.inv(l_x)).conj().T)

    @staticmethod
    def is_unitary_fibre_to_space(A_x, T: Trivialization, x, tol: float = None) -> bool:
        tol = settings.EQUALITY_TOL if tol is None else tol
        conjugate = BundleService.fibre_to_space_dagger(A_x, T, x)
        return max_norm(conjugate @ np.asarray(A_x, dtype=complex) - np.eye(T.dim)) <= tol

    # ===== Morfismos do fibrado =====
    @staticmethod
    def _check_morphism(A: Sequence[FibreMap]):
        for index, fibre_map in enumerate(A):
            if not np.array_equal(fibre_map.source, fibre_map.target):
                raise MorphismError(
                    f"morphism component {index} maps {fibre_map.source.tolist()} to "
                    f"{fibre_map.target.tolist()}: base points must be preserved"
                )

    @staticmethod
    def morphism_dagger(A: Sequence[FibreMap], T: Trivialization) -> List[FibreMap]:
        """A_x‡ = l_x⁻¹∘(l_x∘A_x∘l_x⁻¹)†∘l_x em cada ponto"""
        BundleService._check_morphism(A)
        conjugates = []
        for fibre_map in A:
            l_x = T.at(fibre_map.source)
            inner = l_x @ fibre_map.matrix @ np.linalg.inv(l_x)
            conjugates.append(FibreMap(fibre_map.source, fibre_map.target, np.linalg.solve(l_x, inner.conj().T @ l_x)))
        return conjugates

    @staticmethod
    def morphism_pairing_defect(
        A: Sequence[FibreMap], T: Trivialization, samples: int = 20, seed: int = 0
    ) -> float:
        """max |⟨A‡Φ|Ψ⟩_x − ⟨Φ|AΨ⟩_x| sobre pares aleatórios"""
        conjugates = BundleService.morphism_dagger(A, T)
        rng = np.random.default_rng(seed)
        worst = 0.0
        for fibre_map, conjugate in zip(A, conjugates):
            x = fibre_map.source
            for _ in range(samples):
                phi = FibreVector(x, random_complex_vector(rng, T.dim))
                psi = FibreVector(x, random_complex_vector(rng, T.dim))
                lhs = BundleService.fibre_inner(T, x, FibreVector(x, conjugate.matrix @ phi.components), psi)
                rhs = BundleService.fibre_inner(T, x, phi, FibreVector(x, fibre_map.matrix @ psi.components))
                worst = max(worst, abs(lhs - rhs))
        return worst

    @staticmethod
    def is_hermitian_morphism(A: Sequence[FibreMap], T: Trivialization, tol: float = None) -> bool:
        tol = settings.EQUALITY_TOL if tol is None else tol
        conjugates = BundleService.morphism_dagger(A, T)
        return all(max_norm(c.matrix - a.matrix) <= tol for a, c in zip(A, conjugates))

    @staticmethod
    def is_unitary_morphism(A: Sequence[FibreMap], T: Trivialization, tol: float = None) -> bool:
        tol = settings.EQUALITY_TOL if tol is None else tol
        conjugates = BundleService.morphism_dagger(A, T)
        return all(max_norm(c.matrix @ a.matrix - np.eye(T.dim)) <= tol for a, c in zip(A, conjugates))

    @staticmethod
    def is_isometric_morphism(
        A: Sequence[FibreMap], T: Trivialization, tol: float = None, samples: int = 20, seed: int = 0
    ) -> bool:
        """⟨AΦ|AΨ⟩_x = ⟨Φ|Ψ⟩_x sobre pares aleatórios"""
        tol = settings.EQUALITY_TOL if tol is None else tol
        BundleService._check_morphism(A)
        rng = np.random.default_rng(seed)
        for fibre_map in A:
            x = fibre_map.source
            for _ in range(samples):
                phi = FibreVector(x, random_complex_vector(rng, T.dim))
                psi = FibreVector(x, random_complex_vector(rng, T.dim))
                mapped = BundleService.fibre_inner(
                    T, x,
                    FibreVector(x, fibre_map.matrix @ phi.components),
                    FibreVector(x, fibre_map.matrix @ psi.components),
                )
                if abs(mapped - BundleService.fibre_inner(T, x, phi, psi)) > tol:
                    return False
        return True
