import enum
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..core.exceptions import DimensionError, DomainError


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


class HamiltonianFamily(enum.Enum):
    CONSTANT = "constant"
    PIECEWISE_CONSTANT = "piecewise_constant"
    TWO_LEVEL_DRIVE = "two_level_drive"
    TABULATED = "tabulated"


class Scheme(enum.Enum):
    EXACT_CONSTANT = "exact_constant"
    MAGNUS_MIDPOINT = "magnus_midpoint"
    CRANK_NICOLSON = "crank_nicolson"
    EULER_UNSTABLE = "euler_unstable"


class PathFamily(enum.Enum):
    LINE = "line"
    CIRCLE = "circle"
    FIGURE_EIGHT = "figure_eight"


class TrivializationFamily(enum.Enum):
    IDENTITY = "identity"
    ROTATION_FIELD = "rotation_field"
    SEEDED_RANDOM_UNITARY = "seeded_random_unitary"


class TransportKind(enum.Enum):
    FRAME_FACTORED = "frame_factored"
    FLAT = "flat"
    EVOLUTION = "evolution"
    CUSTOM = "custom"


# ===== Espaço de Hilbert =====
@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = _frozen(self.amplitudes)
        if amplitudes.ndim != 1 or amplitudes.size == 0:
            raise DimensionError(f"state vector must be a non-empty 1-d array, got shape {amplitudes.shape}")
        if not np.all(np.isfinite(amplitudes)):
            raise DomainError("state vector amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class ComplexOperator:
    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] == 0:
            raise DimensionError(f"operator must be square, got shape {entries.shape}")
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "ComplexOperator":
        return cls(np.eye(dim))

    def __matmul__(self, other):
        if isinstance(other, ComplexOperator):
            if other.dim != self.dim:
                raise DimensionError(f"cannot compose dims {self.dim} and {other.dim}")
            return ComplexOperator(self.entries @ other.entries)
        if isinstance(other, StateVector):
            if other.dim != self.dim:
                raise DimensionError(f"cannot apply dim {self.dim} operator to dim {other.dim} vector")
            return StateVector(self.entries @ other.amplitudes)
        return NotImplemented


# ===== Schrödinger =====
@dataclass(frozen=True)
class HamiltonianSegment:
    start: float
    end: float
    matrix: np.ndarray


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    family: HamiltonianFamily
    dim: int
    hbar: float = 1.0
    domain: Tuple[float, float] = (-np.inf, np.inf)
    matrix: Optional[np.ndarray] = None
    segments: Tuple[HamiltonianSegment, ...] = ()
    delta: float = 0.0
    rabi: float = 0.0
    drive_frequency: float = 0.0
    times: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None
    # Controle negativo: soma i·ε à entrada (0,0)
    anti_hermitian_perturbation: float = 0.0
    # None: usa settings.HERMITICITY_TOL
    hermiticity_tol: Optional[float] = None
    name: str = "hamiltonian"

    @property
    def is_negative_control(self) -> bool:
        return self.anti_hermitian_perturbation != 0.0


@dataclass(frozen=True)
class PropagatorMethod:
    scheme: Scheme
    steps: int


@dataclass(frozen=True)
class Propagator:
    """
    𝒰(t, s) como produto ordenado de fatores de passo (tempos mais tardios à esquerda).

    prefix[k] = U_{k-1}···U_0 e inverse_prefix[k] = prefix[k]⁻¹; consultas fora da
    grade usam um passo fracionário do mesmo esquema.
    """
    hamiltonian: TimeDependentHamiltonian
    method: PropagatorMethod
    grid: np.ndarray
    prefix: np.ndarray
    inverse_prefix: np.ndarray
    fractional_step: Callable[[float, float], np.ndarray] = field(repr=False)

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    @property
    def t0(self) -> float:
        return float(self.grid[0])

    @property
    def t1(self) -> float:
        return float(self.grid[-1])

    def _locate(self, t: float) -> Tuple[int, bool]:
        if t < self.t0 or t > self.t1:
            raise DomainError(f"t={t} outside propagator domain [{self.t0}, {self.t1}]")
        k = int(np.searchsorted(self.grid, t, side="right")) - 1
        k = min(k, len(self.grid) - 1)
        on_grid = self.grid[k] == t
        return k, on_grid

    def _forward(self, t: float, s: float) -> np.ndarray:
        # s <= t
        ks, s_on = self._locate(s)
        kt, t_on = self._locate(t)
        if ks == kt and not s_on:
            return self.fractional_step(s, t) if t > s else np.eye(self.dim, dtype=complex)
        if s_on:
            head = np.eye(self.dim, dtype=complex)
            start = ks
        else:
            start = ks + 1
            head = self.fractional_step(s, float(self.grid[start]))
        if start == kt:
            middle = np.eye(self.dim, dtype=complex)
        else:
            middle = self.prefix[kt] @ self.inverse_prefix[start]
        tail = np.eye(self.dim, dtype=complex) if t_on else self.fractional_step(float(self.grid[kt]), t)
        return tail @ middle @ head

    def matrix(self, t: float, s: float) -> np.ndarray:
        """Matriz de 𝒰(t, s); 𝒰(t, t) = I exatamente"""
        if t == s:
            self._locate(t)
            return np.eye(self.dim, dtype=complex)
        if t > s:
            return self._forward(t, s)
        return np.linalg.inv(self._forward(s, t))

    def __call__(self, t: float, s: float) -> ComplexOperator:
        return ComplexOperator(self.matrix(t, s))


# ===== Geometria do fibrado =====
@dataclass(frozen=True)
class BasePath:
    family: PathFamily
    domain: Tuple[float, float]
    grid: np.ndarray
    map: Callable[[float], np.ndarray] = field(repr=False)
    base_dim: int = 3
    name: str = "path"

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class Trivialization:
    family: TrivializationFamily
    dim: int
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    params: Dict[str, object] = field(default_factory=dict)
    name: str = "trivialization"

    def at(self, x) -> np.ndarray:
        return self.evaluator(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class FibreVector:
    base_point: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        base_point = np.array(self.base_point, dtype=float)
        base_point.setflags(write=False)
        object.__setattr__(self, "base_point", base_point)
        object.__setattr__(self, "components", _frozen(self.components))

    @property
    def dim(self) -> int:
        return self.components.size


@dataclass(frozen=True)
class FibreMap:
    """A_{x→y}: ℋ_x → ℋ_y nos referenciais ortonormais das fibras"""
    source: np.ndarray
    target: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        for name in ("source", "target"):
            point = np.array(getattr(self, name), dtype=float)
            point.setflags(write=False)
            object.__setattr__(self, name, point)
        matrix = _frozen(self.matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"fibre map must be square, got shape {matrix.shape}")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "FibreMap") -> "FibreMap":
        # (self ∘ other): other: x→y, self: y→z
        if other.dim != self.dim:
            raise DimensionError(f"cannot compose fibre maps of dims {self.dim} and {other.dim}")
        if not np.array_equal(other.target, self.source):
            raise DimensionError("fibre maps are not composable: target/source base points differ")
        return FibreMap(other.source, self.target, self.matrix @ other.matrix)


# ===== Transportes =====
@dataclass(frozen=True)
class TransportLaw:
    evaluator: Callable[[BasePath, float, float], np.ndarray] = field(repr=False)
    dim: int
    kind: TransportKind = TransportKind.CUSTOM
    name: str = "law"

    def matrix(self, path: BasePath, s: float, t: float) -> np.ndarray:
        """Matriz de L^γ_{s→t}"""
        return np.asarray(self.evaluator(path, s, t), dtype=complex)


@dataclass(frozen=True)
class EvolutionTransport(TransportLaw):
    """Lei do tipo evolution junto do propagador e da trivialização que a geram"""
    path: Optional[BasePath] = field(default=None, repr=False)
    trivialization: Optional[Trivialization] = field(default=None, repr=False)
    propagator: Optional[Propagator] = field(default=None, repr=False)


@dataclass(frozen=True)
class FrameFamily:
    evaluator: Callable[[BasePath, float], np.ndarray] = field(repr=False)
    dim: int
    name: str = "frames"

    def matrix(self, path: BasePath, s: float) -> np.ndarray:
        return np.asarray(self.evaluator(path, s), dtype=complex)


# ===== Transporte de evolução =====
@dataclass(frozen=True)
class PathLifting:
    path: BasePath
    times: np.ndarray
    values: Tuple[FibreVector, ...]
    provenance: Dict[str, str] = field(default_factory=dict)

    def at(self, t: float) -> FibreVector:
        index = int(np.searchsorted(self.times, t))
        if index >= len(self.times) or self.times[index] != t:
            raise DomainError(f"t={t} is not a lifting sample time")
        return self.values[index]


@dataclass(frozen=True)
class GlobalSection:
    generator: StateVector
    trivialization: Trivialization

    def at(self, x) -> FibreVector:
        l_x = self.trivialization.at(x)
        return FibreVector(np.asarray(x, dtype=float), np.linalg.solve(l_x, self.generator.amplitudes))
