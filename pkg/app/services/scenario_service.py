import csv
import hashlib
import math
import re
import tomllib
from pathlib import Path
from typing import IO, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from ..core.config import settings
from ..core.exceptions import (
    ConfigSyntaxError, ConfigValidationError, DimensionError, QuantumBundleError, ScenarioError
)
from ..core.logging_config import LogContext, get_logger
from ..models_schemas.models import (
    BasePath, HamiltonianFamily, PropagatorMethod, Scheme, StateVector,
    TimeDependentHamiltonian, Trivialization
)
from ..models_schemas.schemas import (
    ComplexSpec, ConvergenceRow, ConvergenceTable, InvariantReport, OperatorSpec,
    PropertyRecord, ScenarioConfig, TraceRecord
)
from .bundle_service import BundleService
from .evolution_service import EvolutionTransportService
from .linalg_service import HilbertSpaceService, max_norm, named_operator, random_complex_matrix
from .schrodinger_service import SchrodingerService
from .transport_service import TransportService

logger = get_logger(__name__)

_LINE_PATTERN = re.compile(r"line (\d+)")
# Rótulos de membros de Union que o pydantic insere no loc dos erros
_UNION_TAGS = {"float", "int", "str", "list", "tuple"}
# Erros abaixo disso são arredondamento; ordem observada não é reportada
_ROUNDOFF_FLOOR = 1e-13
GAUGE_SAMPLES = 50


def _complex(value: ComplexSpec) -> complex:
    if isinstance(value, (tuple, list)):
        return complex(value[0], value[1])
    return complex(value)


def _field_name(loc: Sequence[Union[str, int]]) -> str:
    parts = [
        str(part) for part in loc
        if isinstance(part, int) or (part not in _UNION_TAGS and "[" not in part)
    ]
    return ".".join(parts)


def _format(value: float) -> str:
    return format(float(value), ".17g")


def parse_operator(spec: OperatorSpec, dim: int, field: str) -> np.ndarray:
    """Operador por nome (sigma_z, spin_x, ...) ou matriz de entradas [re, im]"""
    if isinstance(spec, str):
        try:
            return named_operator(spec, dim)
        except KeyError:
            raise ConfigValidationError([field], [f"{field}: unknown operator '{spec}'"])
        except DimensionError as e:
            raise ConfigValidationError([field], [f"{field}: {e.detail}"])
    rows = [[_complex(entry) for entry in row] for row in spec]
    if len(rows) != dim or any(len(row) != dim for row in rows):
        raise ConfigValidationError([field], [f"{field}: expected a {dim}x{dim} matrix"])
    return np.array(rows, dtype=complex)


class ScenarioService:
    """Leitura de cenários, execução, traces CSV e relatórios de invariantes/convergência"""

    # ===== Configuração =====
    @staticmethod
    def load_config(source: Union[bytes, IO[bytes]]) -> ScenarioConfig:
        """
        Lê e valida um cenário TOML; junta todas as falhas de validação num único erro
        """
        raw = source if isinstance(source, (bytes, bytearray)) else source.read()
        try:
            data = tomllib.loads(bytes(raw).decode("utf-8"))
        except UnicodeDecodeError as e:
            raise ConfigSyntaxError(f"config is not valid UTF-8: {e.reason}")
        except tomllib.TOMLDecodeError as e:
            match = _LINE_PATTERN.search(str(e))
            raise ConfigSyntaxError(str(e), int(match.group(1)) if match else None)

        try:
            config = ScenarioConfig.model_validate(data)
        except ValidationError as e:
            fields, messages = [], []
            for error in e.errors():
                name = _field_name(error["loc"]) or "<root>"
                if name not in fields:
                    fields.append(name)
                messages.append(f"{name}: {error['msg']}")
            raise ConfigValidationError(fields, messages)

        ScenarioService._cross_check(config)
        logger.debug("Config loaded", scenario=config.name, dim=config.dim)
        return config

    @staticmethod
    def _cross_check(c: ScenarioConfig):
        fields, messages = [], []

        def fail(name: str, message: str):
            if name not in fields:
                fields.append(name)
            messages.append(f"{name}: {message}")

        if len(c.initial_state) != c.dim:
            fail("initial_state", f"expected {c.dim} entries, got {len(c.initial_state)}")
        a, b = c.path.domain
        if not a <= c.start_time <= b:
            fail("t0", f"{c.start_time} outside path domain [{a}, {b}]")

        # Vetores da base têm base_dim coordenadas; o eixo de rotação vive em ℝ³
        vectors = [
            ("path.origin", c.path.origin, c.path.base_dim),
            ("path.velocity", c.path.velocity, c.path.base_dim),
            ("path.center", c.path.center, c.path.base_dim),
            ("trivialization.axis", c.trivialization.axis, 3),
            ("trivialization.gradient", c.trivialization.gradient, c.path.base_dim),
        ]
        for name, values, size in vectors:
            if values is not None and len(values) != size:
                fail(name, f"expected {size} entries, got {len(values)}")

        h = c.hamiltonian
        if h.family is HamiltonianFamily.CONSTANT and h.matrix is None:
            fail("hamiltonian.matrix", "constant family needs a matrix")
        if h.family is HamiltonianFamily.PIECEWISE_CONSTANT and not h.segments:
            fail("hamiltonian.segments", "piecewise_constant family needs segments")
        if h.family is HamiltonianFamily.TWO_LEVEL_DRIVE and c.dim != 2:
            fail("dim", "two_level_drive needs dim 2")
        if h.family is HamiltonianFamily.TABULATED and len(h.times) != len(h.samples):
            fail("hamiltonian.samples", f"{len(h.samples)} samples for {len(h.times)} times")
        if c.method.scheme is Scheme.EXACT_CONSTANT and h.family not in (
            HamiltonianFamily.CONSTANT, HamiltonianFamily.PIECEWISE_CONSTANT
        ):
            fail("method.scheme", f"exact_constant is not available for {h.family.value}")

        operators = []
        if h.matrix is not None:
            operators.append(("hamiltonian.matrix", h.matrix))
        operators += [(f"hamiltonian.segments.{k}.matrix", s.matrix) for k, s in enumerate(h.segments)]
        operators += [(f"hamiltonian.samples.{k}", s) for k, s in enumerate(h.samples)]
        for name, spec in operators:
            try:
                parse_operator(spec, c.dim, name)
            except ConfigValidationError as e:
                fail(name, "; ".join(e.messages))

        for k, observable in enumerate(c.observables):
            name = f"observables.{k}.matrix"
            try:
                matrix = parse_operator(observable.matrix, c.dim, name)
            except ConfigValidationError as e:
                fail(name, "; ".join(e.messages))
                continue
            if not HilbertSpaceService.is_hermitian(matrix, c.tolerances.hermiticity_tol):
                fail(name, f"observable '{observable.name}' is not Hermitian")

        if fields:
            raise ConfigValidationError(fields, messages)

    # ===== Montagem do cenário =====
    @staticmethod
    def build_hamiltonian(c: ScenarioConfig) -> TimeDependentHamiltonian:
        h = c.hamiltonian
        domain = tuple(h.domain) if h.domain is not None else tuple(c.path.domain)
        options = dict(
            hbar=c.hbar,
            anti_hermitian_perturbation=h.anti_hermitian_perturbation,
            hermiticity_tol=c.tolerances.hermiticity_tol,
            name=c.name,
        )
        if h.anti_hermitian_perturbation:
            logger.warning("Negative-control Hamiltonian", epsilon=h.anti_hermitian_perturbation)

        if h.family is HamiltonianFamily.CONSTANT:
            matrix = parse_operator(h.matrix, c.dim, "hamiltonian.matrix")
            return SchrodingerService.constant(matrix, domain=domain, **options)
        if h.family is HamiltonianFamily.PIECEWISE_CONSTANT:
            segments = [
                (s.start, s.end, parse_operator(s.matrix, c.dim, f"hamiltonian.segments.{k}.matrix"))
                for k, s in enumerate(h.segments)
            ]
            return SchrodingerService.piecewise_constant(segments, **options)
        if h.family is HamiltonianFamily.TWO_LEVEL_DRIVE:
            return SchrodingerService.two_level_drive(h.delta, h.rabi, h.drive_frequency, domain=domain, **options)
        samples = [parse_operator(s, c.dim, f"hamiltonian.samples.{k}") for k, s in enumerate(h.samples)]
        return SchrodingerService.tabulated(h.times, samples, **options)

    @staticmethod
    def build_path(c: ScenarioConfig) -> BasePath:
        p = c.path
        return BundleService.make_path(
            p.family, p.domain, p.grid_size,
            base_dim=p.base_dim, origin=p.origin, velocity=p.velocity, center=p.center,
            radius=p.radius, frequency=p.frequency, scale=p.scale,
        )

    @staticmethod
    def build_trivialization(c: ScenarioConfig) -> Trivialization:
        t = c.trivialization
        return BundleService.make_trivialization(
            t.family, c.dim, base_dim=c.path.base_dim,
            axis=t.axis, gradient=t.gradient, seed=t.seed, strength=t.strength,
            unitarity_tol=c.tolerances.unitarity_tol,
        )

    @staticmethod
    def build_method(c: ScenarioConfig) -> PropagatorMethod:
        return PropagatorMethod(c.method.scheme, c.method.steps)

    @staticmethod
    def initial_state(c: ScenarioConfig) -> StateVector:
        return StateVector(np.array([_complex(value) for value in c.initial_state]))

    @staticmethod
    def observables(c: ScenarioConfig) -> List[Tuple[str, np.ndarray]]:
        return [
            (o.name, parse_operator(o.matrix, c.dim, f"observables.{k}.matrix"))
            for k, o in enumerate(c.observables)
        ]

    @staticmethod
    def _assemble(c: ScenarioConfig):
        H = ScenarioService.build_hamiltonian(c)
        path = ScenarioService.build_path(c)
        T = ScenarioService.build_trivialization(c)
        method = ScenarioService.build_method(c)
        law = EvolutionTransportService.evolution_transport(H, path, T, method)
        return H, path, T, method, law

    # ===== Execução =====
    @staticmethod
    def run_scenario(c: ScenarioConfig) -> List[TraceRecord]:
        """
        Um registro por instante da grade do caminho: estado, componentes na fibra, norma e valores médios
        """
        with LogContext(scenario=c.name):
            try:
                H, path, T, method, law = ScenarioService._assemble(c)
                psi0 = ScenarioService.initial_state(c)
                t0 = c.start_time
                lifting = EvolutionTransportService.lift_state(psi0, t0, H, path, T, method, law=law)
                observables = ScenarioService.observables(c)

                records = []
                for t, value in zip(path.grid, lifting.values):
                    t = float(t)
                    U_t = law.propagator.matrix(t, t0)
                    psi_t = StateVector(U_t @ psi0.amplitudes)
                    records.append(TraceRecord(
                        t=t,
                        base_point=value.base_point.tolist(),
                        state_components=np.column_stack([psi_t.amplitudes.real, psi_t.amplitudes.imag]).ravel().tolist(),
                        fibre_components=np.column_stack([value.components.real, value.components.imag]).ravel().tolist(),
                        norm_sq=psi_t.norm_sq,
                        expectations=[
                            EvolutionTransportService.bundle_expectation(A, lifting, t, T).real
                            for _, A in observables
                        ],
                        unitarity_defect=HilbertSpaceService.unitarity_defect(U_t),
                    ))
            except ScenarioError:
                raise
            except QuantumBundleError as e:
                logger.error("Scenario failed", error=e.detail, error_type=type(e).__name__)
                raise ScenarioError(c.name, e)
            logger.info("Scenario run finished", records=len(records), final_norm_sq=records[-1].norm_sq)
            return records

    @staticmethod
    def trace_header(c: ScenarioConfig) -> List[str]:
        header = ["t"]
        header += [f"x_{k}" for k in range(c.path.base_dim)]
        for prefix in ("psi", "fibre"):
            for k in range(c.dim):
                header += [f"{prefix}_re_{k}", f"{prefix}_im_{k}"]
        header.append("norm_sq")
        header += [f"exp_{o.name}" for o in c.observables]
        header.append("unitarity_defect")
        return header

    @staticmethod
    def write_trace(c: ScenarioConfig, records: Sequence[TraceRecord], stream: IO[str]):
        """CSV com cabeçalho fixo; números com 17 dígitos significativos"""
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(ScenarioService.trace_header(c))
        for record in records:
            values = [record.t, *record.base_point, *record.state_components, *record.fibre_components,
                      record.norm_sq, *record.expectations, record.unitarity_defect]
            writer.writerow([_format(value) for value in values])

    @staticmethod
    def write_sidecar(c: ScenarioConfig, config_bytes: bytes, path: Path):
        digest = hashlib.sha256(config_bytes).hexdigest()
        path.write_text(
            f'scenario = "{c.name}"\n'
            f'config_sha256 = "{digest}"\n'
            f'tool = "{settings.APP_NAME}"\n'
            f'version = "{settings.APP_VERSION}"\n',
            encoding="utf-8",
        )

    # ===== Invariantes =====
    @staticmethod
    def check_invariants(c: ScenarioConfig, samples: int = None, seed: int = None) -> InvariantReport:
        """
        Agrega axiomas de transporte, propriedades do transporte de evolução, equivalências e conservação
        """
        samples = settings.CHECK_SAMPLES if samples is None else samples
        if samples < 1:
            raise ConfigValidationError(["samples"], [f"samples: must be a positive integer, got {samples}"])
        seed = c.seed if seed is None else seed
        tolerances = c.tolerances
        with LogContext(scenario=c.name):
            try:
                records = ScenarioService._invariant_records(c, samples, seed)
            except QuantumBundleError as e:
                logger.error("Invariant check failed to run", error=e.detail, error_type=type(e).__name__)
                raise ScenarioError(c.name, e)
            report = InvariantReport(scenario=c.name, records=records)
            logger.info(
                "Invariants checked",
                records=len(records),
                failures=[r.property for r in report.failures()],
                equality_tol=tolerances.equality_tol,
            )
            return report

    @staticmethod
    def _invariant_records(c: ScenarioConfig, samples: int, seed: int) -> List[PropertyRecord]:
        tol = c.tolerances
        H, path, T, method, law = ScenarioService._assemble(c)
        U = law.propagator
        psi0 = ScenarioService.initial_state(c)
        t0 = c.start_time
        grid = [float(t) for t in path.grid]
        rng = np.random.default_rng(seed)
        records: List[PropertyRecord] = []

        # Hamiltoniano e propagador no espaço de estados
        # tolerância infinita: aqui o defeito é medido, não validado
        hermiticity = max(
            HilbertSpaceService.hermiticity_defect(SchrodingerService.eval_hamiltonian(H, t, math.inf))
            for t in grid
        )
        records.append(PropertyRecord.build(H.name, "hamiltonian_hermiticity", hermiticity, tol.hermiticity_tol))

        unitarity = max(HilbertSpaceService.unitarity_defect(U.matrix(t, t0)) for t in grid)
        records.append(PropertyRecord.build(H.name, "propagator_unitarity", unitarity, tol.unitarity_tol))

        pairs = rng.integers(0, len(grid), size=(samples, 3))
        composition = inverse = adjoint = 0.0
        for i, j, k in pairs:
            t1, t2, t3 = grid[i], grid[j], grid[k]
            composition = max(composition, SchrodingerService.composition_defect(U, t1, t2, t3))
            defects = SchrodingerService.inverse_identity_defect(U, t1, t2)
            inverse = max(inverse, defects.inverse_defect)
            adjoint = max(adjoint, defects.adjoint_defect)
        records.append(PropertyRecord.build(H.name, "propagator_composition", composition, tol.equality_tol))
        records.append(PropertyRecord.build(H.name, "propagator_inverse", inverse, tol.equality_tol))
        records.append(PropertyRecord.build(H.name, "propagator_adjoint", adjoint, tol.unitarity_tol))

        initial_norm = psi0.norm_sq
        lifting = EvolutionTransportService.lift_state(psi0, t0, H, path, T, method, law=law, dual_route=False)
        norm_drift = fibre_drift = 0.0
        for t, value in zip(grid, lifting.values):
            norm_drift = max(norm_drift, abs(SchrodingerService.evolve_state(U, psi0, t0, t).norm_sq - initial_norm))
            fibre_norm = BundleService.fibre_inner(T, value.base_point, value, value).real
            fibre_drift = max(fibre_drift, abs(fibre_norm - initial_norm))
        records.append(PropertyRecord.build(H.name, "norm_conservation", norm_drift, tol.unitarity_tol))
        records.append(PropertyRecord.build(law.name, "fibre_norm_conservation", fibre_drift, tol.unitarity_tol))

        # Transporte: axiomas, propriedades do transporte de evolução e equivalências
        records += TransportService.check_axioms(law, path, samples, seed, tol.equality_tol).records
        records += EvolutionTransportService.transport_property_report(
            law, path, T, samples, seed, tol.equality_tol
        ).records
        records += TransportService.equivalence_records(law, path, T, samples, seed, tol.equality_tol)

        route = EvolutionTransportService.route_defect(law, psi0, t0)
        records.append(PropertyRecord.build(law.name, "lifting_routes", route, settings.DUAL_ROUTE_TOL))

        # Referenciais e gauge
        frames = TransportService.frames_from_transport(law, path, path.domain[0])
        rebuilt = TransportService.transport_from_frames(frames)
        records.append(PropertyRecord.build(
            law.name, "frame_round_trip",
            TransportService.law_defect(law, rebuilt, path, samples, seed), tol.equality_tol,
        ))
        gauge = 0.0
        for _ in range(GAUGE_SAMPLES):
            D = random_complex_matrix(rng, law.dim) + 2.0 * np.eye(law.dim)
            gauged = TransportService.transport_from_frames(TransportService.gauge_transform(frames, D))
            gauge = max(gauge, TransportService.law_defect(law, gauged, path, max(1, samples // 10), seed))
        records.append(PropertyRecord.build(law.name, "gauge_invariance", gauge, tol.equality_tol))

        # Valores médios: fibrado vs espaço de estados
        for name, A in ScenarioService.observables(c):
            defect = 0.0
            for t in grid:
                in_bundle = EvolutionTransportService.bundle_expectation(A, lifting, t, T)
                in_space = HilbertSpaceService.expectation(A, SchrodingerService.evolve_state(U, psi0, t0, t))
                defect = max(defect, abs(in_bundle - in_space))
            records.append(PropertyRecord.build(law.name, f"expectation_{name}", defect, tol.equality_tol))

        return records

    @staticmethod
    def write_report(report: InvariantReport, stream: IO[str]):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["scenario", "law_id", "property", "max_defect", "tolerance", "verdict"])
        for record in report.records:
            writer.writerow([
                report.scenario, record.law_id, record.property,
                _format(record.max_defect), _format(record.tolerance),
                "PASS" if record.passed else "FAIL",
            ])

    # ===== Convergência =====
    @staticmethod
    def convergence_study(c: ScenarioConfig, ladder: Sequence[int]) -> ConvergenceTable:
        """
        Erro de 𝒰(b, a) por número de passos contra o oráculo fechado ou o degrau mais fino
        """
        ladder = [int(steps) for steps in ladder]
        if len(ladder) < 3 or any(n < 1 for n in ladder) or any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigValidationError(["steps"], [f"steps: ladder must be strictly increasing with >= 3 positive entries, got {ladder}"])

        with LogContext(scenario=c.name):
            try:
                H = ScenarioService.build_hamiltonian(c)
                a, b = c.path.domain
                propagators = [
                    SchrodingerService.build_propagator(H, a, b, PropagatorMethod(c.method.scheme, steps))
                    for steps in ladder
                ]
                finals = [U.matrix(b, a) for U in propagators]
                oracle = SchrodingerService.closed_form_propagator(H, a, b)
            except QuantumBundleError as e:
                logger.error("Convergence study failed", error=e.detail, error_type=type(e).__name__)
                raise ScenarioError(c.name, e)

            reference_name = "closed_form" if oracle is not None else f"steps={ladder[-1]}"
            reference = oracle if oracle is not None else finals[-1]
            errors = [max_norm(final - reference) for final in finals]

            rows = []
            for k, (steps, final, error) in enumerate(zip(ladder, finals, errors)):
                order: Optional[float] = None
                if k > 0 and errors[k - 1] > _ROUNDOFF_FLOOR and error > _ROUNDOFF_FLOOR:
                    order = math.log(errors[k - 1] / error) / math.log(steps / ladder[k - 1])
                rows.append(ConvergenceRow(
                    steps=steps,
                    error=error,
                    observed_order=order,
                    unitarity_drift=HilbertSpaceService.unitarity_defect(final),
                ))
            logger.info("Convergence study finished", scheme=c.method.scheme.value, reference=reference_name, rungs=len(rows))
            return ConvergenceTable(scenario=c.name, scheme=c.method.scheme, reference=reference_name, rows=rows)

    @staticmethod
    def write_convergence(table: ConvergenceTable, stream: IO[str]):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["steps", "error", "observed_order", "unitarity_drift"])
        for row in table.rows:
            writer.writerow([
                row.steps,
                _format(row.error),
                "" if row.observed_order is None else _format(row.observed_order),
                _format(row.unitarity_drift),
            ])

