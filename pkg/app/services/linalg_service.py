from typing import Union

import numpy as np
import scipy.linalg as la

from ..core.config import settings
from ..core.exceptions import DimensionError, DomainError, HermiticityError, UnitsError, ZeroNormError
from ..core.logging_config import get_logger
from ..models_schemas.models import ComplexOperator, StateVector

logger = get_logger(__name__)

MatrixLike = Union[ComplexOperator, np.ndarray]


def as_matrix(A: MatrixLike) -> np.ndarray:
    if isinstance(A, ComplexOperator):
        return A.entries
    matrix = np.asarray(A, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {matrix.shape}")
    return matrix


def max_norm(A) -> float:
    """Norma max-entry usada em todas as verificações de defeito"""
    A = np.asarray(A)
    return float(np.max(np.abs(A))) if A.size else 0.0


class HilbertSpaceService:
    """Primitivas do espaço de Hilbert de dimensão finita"""

    @staticmethod
    def inner(u: StateVector, v: StateVector) -> complex:
        """
        ⟨u|v⟩, antilinear no primeiro argumento (convenção da física)
        """
        if u.dim != v.dim:
            raise DimensionError(f"inner product of dims {u.dim} and {v.dim}")
        return complex(np.vdot(u.amplitudes, v.amplitudes))

    @staticmethod
    def dagger(A: MatrixLike) -> ComplexOperator:
        return ComplexOperator(as_matrix(A).conj().T)

    @staticmethod
    def hermiticity_defect(A: MatrixLike) -> float:
        matrix = as_matrix(A)
        return max_norm(matrix - matrix.conj().T)

    @staticmethod
    def unitarity_defect(A: MatrixLike) -> float:
        matrix = as_matrix(A)
        return max_norm(matrix.conj().T @ matrix - np.eye(matrix.shape[0]))

    @staticmethod
    def _check_tol(tol: float, name: str):
        if not tol >= 0:
            raise DomainError(f"{name} must be non-negative, got {tol}")

    @staticmethod
    def is_hermitian(A: MatrixLike, tol: float = None) -> bool:
        tol = settings.HERMITICITY_TOL if tol is None else tol
        HilbertSpaceService._check_tol(tol, "hermiticity tolerance")
        return HilbertSpaceService.hermiticity_defect(A) <= tol

    @staticmethod
    def is_unitary(A: MatrixLike, tol: float = None) -> bool:
        tol = settings.UNITARITY_TOL if tol is None else tol
        HilbertSpaceService._check_tol(tol, "unitarity tolerance")
        return HilbertSpaceService.unitarity_defect(A) <= tol

    @staticmethod
    def expm_hermitian_generator(
        H: MatrixLike,
        theta: float,
        hbar: float = None,
        hermiticity_tol: float = None,
    ) -> ComplexOperator:
        """
        exp(−iθH/ħ) por autodecomposição hermitiana: V·diag(e^{−iθλ/ħ})·V†
        """
        hbar = settings.DEFAULT_HBAR if hbar is None else hbar
        hermiticity_tol = settings.HERMITICITY_TOL if hermiticity_tol is None else hermiticity_tol
        if not hbar > 0:
            raise UnitsError(f"hbar must be positive, got {hbar}")
        matrix = as_matrix(H)
        defect = HilbertSpaceService.hermiticity_defect(matrix)
        if defect > hermiticity_tol:
            raise HermiticityError(f"generator is not Hermitian (defect {defect:.3e} > {hermiticity_tol:.1e})")
        # Simetriza para eliminar o resíduo anti-hermitiano abaixo da tolerância
        eigenvalues, eigenvectors = la.eigh(0.5 * (matrix + matrix.conj().T))
        phases = np.exp(-1j * theta * eigenvalues / hbar)
        return ComplexOperator((eigenvectors * phases) @ eigenvectors.conj().T)

    @staticmethod
    def generator_exponential(
        H: np.ndarray, theta: float, hbar: float, hermitian: bool, hermiticity_tol: float = None
    ) -> np.ndarray:
        """
        Fator de passo exp(−iθH/ħ); geradores não hermitianos (controles negativos)
        usam a exponencial geral de matrizes.
        """
        if hermitian:
            return HilbertSpaceService.expm_hermitian_generator(H, theta, hbar, hermiticity_tol).entries
        if not hbar > 0:
            raise UnitsError(f"hbar must be positive, got {hbar}")
        return la.expm(-1j * theta * np.asarray(H, dtype=complex) / hbar)

    @staticmethod
    def expectation(A: MatrixLike, psi: StateVector, tol: float = None) -> complex:
        """
        Valor médio ⟨ψ|Aψ⟩/⟨ψ|ψ⟩
        """
        tol = settings.EQUALITY_TOL if tol is None else tol
        matrix = as_matrix(A)
        if matrix.shape[0] != psi.dim:
            raise DimensionError(f"operator dim {matrix.shape[0]} vs state dim {psi.dim}")
        norm_sq = psi.norm_sq
        if norm_sq <= tol:
            raise ZeroNormError(f"state norm² {norm_sq:.3e} is below {tol:.1e}")
        value = np.vdot(psi.amplitudes, matrix @ psi.amplitudes) / norm_sq
        return complex(value)


# ===== Operadores nomeados =====
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def spin_matrices(dim: int):
    """(J_x, J_y, J_z) da representação de spin j = (dim−1)/2; dim 2 dá σ/2"""
    if dim < 1:
        raise DimensionError(f"spin representation needs dim >= 1, got {dim}")
    j = (dim - 1) / 2.0
    m = j - np.arange(dim)
    j_z = np.diag(m).astype(complex)
    # ⟨m+1|J_+|m⟩ = sqrt(j(j+1) − m(m+1)); base ordenada por m decrescente
    raising = np.zeros((dim, dim), dtype=complex)
    for k in range(1, dim):
        raising[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    lowering = raising.conj().T
    j_x = 0.5 * (raising + lowering)
    j_y = -0.5j * (raising - lowering)
    return j_x, j_y, j_z


def named_operator(name: str, dim: int) -> np.ndarray:
    """Operadores por nome: identity, zero, sigma_x/y/z (dim 2), spin_x/y/z"""
    name = name.lower()
    if name == "identity":
        return np.eye(dim, dtype=complex)
    if name == "zero":
        return np.zeros((dim, dim), dtype=complex)
    paulis = {"sigma_x": PAULI_X, "sigma_y": PAULI_Y, "sigma_z": PAULI_Z}
    if name in paulis:
        if dim != 2:
            raise DimensionError(f"{name} is only defined for dim 2, got {dim}")
        return paulis[name].copy()
    spins = {"spin_x": 0, "spin_y": 1, "spin_z": 2}
    if name in spins:
        return spin_matrices(dim)[spins[name]]
    raise KeyError(name)


# ===== Amostragem determinística =====
def random_complex_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    return (rng.standard_normal(dim) + 1j * rng.standard_normal(dim)) / np.sqrt(2.0)


def random_complex_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    return (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    matrix = random_complex_matrix(rng, dim)
    return 0.5 * (matrix + matrix.conj().T)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    """QR de uma matriz gaussiana complexa com fases de R fixadas"""
    q, r = la.qr(random_complex_matrix(rng, dim))
    diagonal = np.diag(r)
    return q * (diagonal / np.abs(diagonal))
