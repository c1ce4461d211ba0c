import math
from typing import List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..core.config import settings
from .models import HamiltonianFamily, PathFamily, Scheme, TrivializationFamily

# Entrada complexa: real puro ou par [re, im]
ComplexSpec = Union[float, Tuple[float, float]]
# Operador: nome (sigma_z, identity, ...) ou matriz de entradas complexas
OperatorSpec = Union[str, List[List[ComplexSpec]]]


# ===== Tolerâncias =====
class ToleranceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    hermiticity_tol: float = Field(default=settings.HERMITICITY_TOL, ge=0)
    unitarity_tol: float = Field(default=settings.UNITARITY_TOL, ge=0)
    equality_tol: float = Field(default=settings.EQUALITY_TOL, ge=0)


# ===== Seções do cenário =====
class SegmentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    start: float
    end: float
    matrix: OperatorSpec


class HamiltonianSection(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    family: HamiltonianFamily
    matrix: Optional[OperatorSpec] = None
    segments: List[SegmentSpec] = []
    delta: float = 0.0
    rabi: float = 0.0
    drive_frequency: float = 0.0
    times: List[float] = []
    samples: List[OperatorSpec] = []
    domain: Optional[Tuple[float, float]] = None
    anti_hermitian_perturbation: float = 0.0


class PathSection(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    family: PathFamily
    domain: Tuple[float, float]
    grid_size: int = Field(ge=2)
    base_dim: int = Field(default=3, ge=1)
    origin: Optional[List[float]] = None
    velocity: Optional[List[float]] = None
    center: Optional[List[float]] = None
    radius: float = 1.0
    frequency: float = 1.0
    scale: float = 1.0

    @field_validator("domain")
    @classmethod
    def validate_domain(cls, v):
        if not v[1] > v[0]:
            raise ValueError("domain end must exceed domain start")
        return v


class TrivializationSection(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    family: TrivializationFamily
    axis: Optional[List[float]] = None
    gradient: Optional[List[float]] = None
    seed: int = 0
    strength: float = 1.0


class MethodSection(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    scheme: Scheme
    steps: int = Field(ge=1)


class ObservableSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    name: str
    matrix: OperatorSpec


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    name: str
    dim: int = Field(ge=1)
    hbar: float = Field(default=settings.DEFAULT_HBAR, gt=0)
    hamiltonian: HamiltonianSection
    path: PathSection
    trivialization: TrivializationSection
    method: MethodSection
    initial_state: List[ComplexSpec]
    t0: Optional[float] = None
    observables: List[ObservableSpec] = []
    seed: int = 0
    tolerances: ToleranceConfig = ToleranceConfig()

    @property
    def start_time(self) -> float:
        return self.path.domain[0] if self.t0 is None else self.t0


# ===== Relatórios (registro plano) =====
class PropertyRecord(BaseModel):
    law_id: str
    property: str
    max_defect: float
    tolerance: float
    passed: bool

    @classmethod
    def build(cls, law_id: str, name: str, defect: float, tolerance: float) -> "PropertyRecord":
        defect = float(defect)
        return cls(
            law_id=law_id,
            property=name,
            max_defect=defect,
            tolerance=tolerance,
            passed=not math.isnan(defect) and defect <= tolerance,
        )


class PropertyReport(BaseModel):
    records: List[PropertyRecord] = []

    @property
    def passed(self) -> bool:
        return all(record.passed for record in self.records)

    def record(self, name: str) -> PropertyRecord:
        for record in self.records:
            if record.property == name:
                return record
        raise KeyError(name)

    def failures(self) -> List[PropertyRecord]:
        return [record for record in self.records if not record.passed]


class InvariantReport(PropertyReport):
    scenario: str


# ===== Traces =====
class TraceRecord(BaseModel):
    t: float
    base_point: List[float]
    state_components: List[float]
    fibre_components: List[float]
    norm_sq: float
    expectations: List[float]
    unitarity_defect: float


# ===== Convergência =====
class ConvergenceRow(BaseModel):
    steps: int
    error: float
    observed_order: Optional[float] = None
    unitarity_drift: float


class ConvergenceTable(BaseModel):
    scenario: str
    scheme: Scheme
    reference: str
    rows: List[ConvergenceRow]
