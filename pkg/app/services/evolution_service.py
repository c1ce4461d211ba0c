import math
from typing import List, Optional, Tuple

import numpy as np

from ..core.config import settings
from ..core.exceptions import DimensionError, DomainError, RouteMismatchError, ZeroNormError
from ..core.logging_config import get_logger
from ..models_schemas.models import (
    BasePath, EvolutionTransport, FibreMap, FibreVector, GlobalSection, PathLifting,
    Propagator, PropagatorMethod, StateVector, TimeDependentHamiltonian,
    TransportKind, Trivialization
)
from ..models_schemas.schemas import PropertyRecord, PropertyReport
from .bundle_service import BundleService
from .linalg_service import as_matrix, max_norm
from .schrodinger_service import SchrodingerService

logger = get_logger(__name__)


def bundle_operator(law: EvolutionTransport, t: float, s: float) -> np.ndarray:
    """
    𝔘_γ(t, s) a partir da lei: L^γ_{s→t} = 𝔘_γ(t, s). Único ponto onde a troca de índices acontece.
    """
    return law.matrix(law.path, s, t)


class EvolutionTransportService:
    """Transporte de evolução 𝔘_γ(t,s) = l⁻¹_{γ(t)}∘𝒰(t,s)∘l_{γ(s)} e levantamentos de estados"""

    @staticmethod
    def aligned_steps(path: BasePath, steps: int) -> int:
        """Menor múltiplo do número de intervalos da grade do caminho que é >= steps"""
        intervals = path.grid.size - 1
        return max(1, math.ceil(steps / intervals)) * intervals

    @staticmethod
    def evolution_transport(
        H: TimeDependentHamiltonian,
        path: BasePath,
        T: Trivialization,
        method: PropagatorMethod,
    ) -> EvolutionTransport:
        if H.dim != T.dim:
            raise DimensionError(f"Hamiltonian dim {H.dim} vs trivialization dim {T.dim}")
        steps = EvolutionTransportService.aligned_steps(path, method.steps)
        if steps != method.steps:
            logger.info("Step count aligned to path grid", requested=method.steps, steps=steps)
        a, b = path.domain
        propagator = SchrodingerService.build_propagator(H, a, b, PropagatorMethod(method.scheme, steps))

        def evaluator(gamma: BasePath, s: float, t: float) -> np.ndarray:
            if gamma is not path:
                raise DomainError(f"evolution transport was built along path '{path.name}', not '{gamma.name}'")
            l_s = T.at(BundleService.eval_path(path, s))
            l_t = T.at(BundleService.eval_path(path, t))
            return np.linalg.solve(l_t, propagator.matrix(t, s) @ l_s)

        return EvolutionTransport(
            evaluator=evaluator,
            dim=H.dim,
            kind=TransportKind.EVOLUTION,
            name=f"evolution[{H.name}|{T.name}|{method.scheme.value}]",
            path=path,
            trivialization=T,
            propagator=propagator,
        )

    @staticmethod
    def picture_round_trip_defect(law: EvolutionTransport, s: float, t: float) -> float:
        """‖l_{γ(t)}∘𝔘_γ(t,s)∘l_{γ(s)}⁻¹ − 𝒰(t,s)‖"""
        l_s = law.trivialization.at(BundleService.eval_path(law.path, s))
        l_t = law.trivialization.at(BundleService.eval_path(law.path, t))
        rebuilt = l_t @ bundle_operator(law, t, s) @ np.linalg.inv(l_s)
        return max_norm(rebuilt - law.propagator.matrix(t, s))

    # ===== Levantamentos e seções =====
    @staticmethod
    def route_defect(law: EvolutionTransport, psi0: StateVector, t0: float) -> float:
        """
        Maior diferença relativa, na grade do caminho, entre l⁻¹_{γ(t)}(ψ(t)) e 𝔘_γ(t,t0)Ψ_γ(t0)
        """
        path, T = law.path, law.trivialization
        initial = BundleService.to_fibre(T, BundleService.eval_path(path, t0), psi0)
        worst = 0.0
        for t in path.grid:
            t = float(t)
            psi_t = SchrodingerService.evolve_state(law.propagator, psi0, t0, t)
            value = BundleService.to_fibre(T, BundleService.eval_path(path, t), psi_t)
            transported = bundle_operator(law, t, t0) @ initial.components
            scale = max(1.0, float(np.max(np.abs(value.components))))
            worst = max(worst, max_norm(transported - value.components) / scale)
        return worst

    @staticmethod
    def lift_state(
        psi0: StateVector,
        t0: float,
        H: TimeDependentHamiltonian,
        path: BasePath,
        T: Trivialization,
        method: PropagatorMethod,
        law: Optional[EvolutionTransport] = None,
        dual_route: Optional[bool] = None,
    ) -> PathLifting:
        """
        Ψ_γ(t) = l⁻¹_{γ(t)}(ψ(t)); em modo debug confere com Ψ_γ(t) = 𝔘_γ(t,t0)Ψ_γ(t0)
        """
        if psi0.dim != H.dim:
            raise DimensionError(f"state dim {psi0.dim} vs Hamiltonian dim {H.dim}")
        BundleService.eval_path(path, t0)
        law = law or EvolutionTransportService.evolution_transport(H, path, T, method)
        dual_route = settings.dual_route_enabled if dual_route is None else dual_route

        values = []
        for t in path.grid:
            t = float(t)
            psi_t = SchrodingerService.evolve_state(law.propagator, psi0, t0, t)
            values.append(BundleService.to_fibre(T, BundleService.eval_path(path, t), psi_t))

        if dual_route:
            worst = EvolutionTransportService.route_defect(law, psi0, t0)
            if worst > settings.DUAL_ROUTE_TOL:
                logger.error("Lifting routes disagree", defect=worst, tolerance=settings.DUAL_ROUTE_TOL)
                raise RouteMismatchError(f"state-space and transport routes differ by {worst:.3e}")

        provenance = {
            "hamiltonian": H.name,
            "trivialization": T.name,
            "method": method.scheme.value,
            "t0": repr(t0),
        }
        if dual_route:
            provenance["dual_route_defect"] = repr(worst)
        return PathLifting(path=path, times=path.grid, values=tuple(values), provenance=provenance)

    @staticmethod
    def section_values_at(lifting: PathLifting, x, tol: float = None) -> List[Tuple[float, FibreVector]]:
        """
        Valores da seção ao longo de γ em x: vazio fora do caminho, um por passagem do caminho por x
        """
        tol = settings.SECTION_TOL if tol is None else tol
        if not tol > 0:
            raise DomainError(f"spatial tolerance must be positive, got {tol}")
        x = np.asarray(x, dtype=float)
        distances = np.array([np.linalg.norm(value.base_point - x) for value in lifting.values])
        hits = np.flatnonzero(distances <= tol)

        # Amostras consecutivas dentro da tolerância formam uma única passagem
        runs: List[List[int]] = []
        for index in hits:
            if runs and index == runs[-1][-1] + 1:
                runs[-1].append(int(index))
            else:
                runs.append([int(index)])

        # Num caminho fechado, a passagem que termina em b continua a que começa em a
        last = len(lifting.values) - 1
        closed = np.allclose(lifting.values[0].base_point, lifting.values[last].base_point, atol=tol)
        if closed and len(runs) > 1 and runs[0][0] == 0 and runs[-1][-1] == last:
            runs[0] = runs.pop() + runs[0]

        result = []
        for run in runs:
            best = min(run, key=lambda k: distances[k])
            result.append((float(lifting.times[best]), lifting.values[best]))
        return result

    @staticmethod
    def global_section(phi: StateVector, T: Trivialization) -> GlobalSection:
        """Φ̄: x ↦ l_x⁻¹(φ)"""
        if phi.dim != T.dim:
            raise DimensionError(f"generator dim {phi.dim} vs trivialization dim {T.dim}")
        return GlobalSection(generator=phi, trivialization=T)

    @staticmethod
    def state_global_section(
        U: Propagator, psi0: StateVector, t0: float, t: float, T: Trivialization
    ) -> GlobalSection:
        """Seção global x ↦ l_x⁻¹(ψ(t)) do estado no instante t"""
        return EvolutionTransportService.global_section(SchrodingerService.evolve_state(U, psi0, t0, t), T)

    # ===== Propriedades =====
    @staticmethod
    def transport_property_report(
        law: EvolutionTransport,
        path: BasePath,
        T: Trivialization,
        samples: int = None,
        seed: int = None,
        tol: float = None,
    ) -> PropertyReport:
        """
        Composição, identidade, inversa, conjugação via 𝒰† e a igualdade tripla 𝔘‡ = 𝔘 = 𝔘⁻¹(trocado)
        """
        samples = settings.CHECK_SAMPLES if samples is None else samples
        seed = settings.CHECK_SEED if seed is None else seed
        tol = settings.EQUALITY_TOL if tol is None else tol
        rng = np.random.default_rng(seed)
        grid = path.grid
        identity = np.eye(law.dim)
        U = law.propagator

        composition = identity_defect = inverse = conjugation = triple = round_trip = 0.0
        for _ in range(samples):
            t1, t2, t3 = (float(v) for v in grid[rng.integers(0, grid.size, size=3)])
            composition = max(
                composition,
                max_norm(bundle_operator(law, t3, t1) - bundle_operator(law, t3, t2) @ bundle_operator(law, t2, t1)),
            )

            s, t = t1, t2
            identity_defect = max(identity_defect, max_norm(bundle_operator(law, t, t) - identity))

            forward = bundle_operator(law, t, s)
            backward = bundle_operator(law, s, t)
            inverse = max(inverse, max_norm(backward @ forward - identity))

            # ‡ aplicado a 𝔘_γ(t,s) (mapa γ(s)→γ(t)) usa o mapa reverso 𝔘_γ(s,t)
            x, y = BundleService.eval_path(path, s), BundleService.eval_path(path, t)
            conjugate = BundleService.fibre_map_dagger(FibreMap(y, x, backward), T).matrix
            via_adjoint = np.linalg.solve(T.at(y), U.matrix(s, t).conj().T @ T.at(x))
            conjugation = max(conjugation, max_norm(conjugate - via_adjoint))

            inverse_swapped = np.linalg.inv(backward)
            triple = max(
                triple,
                max_norm(conjugate - forward),
                max_norm(forward - inverse_swapped),
                max_norm(conjugate - inverse_swapped),
            )

            round_trip = max(round_trip, EvolutionTransportService.picture_round_trip_defect(law, s, t))

        records = [
            PropertyRecord.build(law.name, "composition", composition, tol),
            PropertyRecord.build(law.name, "identity", identity_defect, tol),
            PropertyRecord.build(law.name, "inverse", inverse, tol),
            PropertyRecord.build(law.name, "adjoint_conjugation", conjugation, tol),
            PropertyRecord.build(law.name, "hermitian_unitary_triple", triple, tol),
            PropertyRecord.build(law.name, "picture_round_trip", round_trip, tol),
        ]
        report = PropertyReport(records=records)
        logger.info("Evolution transport properties checked", law=law.name, samples=samples, passed=report.passed)
        return report

    @staticmethod
    def bundle_expectation(A, lifting: PathLifting, t: float, T: Trivialization, tol: float = None) -> complex:
        """
        Valor médio do morfismo l_x⁻¹∘A∘l_x contra Ψ(t) com a métrica da fibra em x = γ(t)
        """
        tol = settings.EQUALITY_TOL if tol is None else tol
        value = lifting.at(t)
        x = value.base_point
        matrix = as_matrix(A)
        if matrix.shape[0] != value.dim:
            raise DimensionError(f"operator dim {matrix.shape[0]} vs fibre dim {value.dim}")
        l_x = T.at(x)
        morphism = np.linalg.solve(l_x, matrix @ l_x)
        norm_sq = BundleService.fibre_inner(T, x, value, value).real
        if norm_sq <= tol:
            raise ZeroNormError(f"fibre norm² {norm_sq:.3e} is below {tol:.1e}")
        image = FibreVector(x, morphism @ value.components)
        return BundleService.fibre_inner(T, x, value, image) / norm_sq

    @staticmethod
    def closed_path_spectrum(law: EvolutionTransport, atol: float = 1e-12) -> np.ndarray:
        """
        Autovalores de 𝔘_γ(b,a) num caminho fechado, ordenados por fase
        """
        path = law.path
        a, b = path.domain
        if not np.allclose(BundleService.eval_path(path, a), BundleService.eval_path(path, b), atol=atol):
            raise DomainError(f"path '{path.name}' is not closed on [{a}, {b}]")
        eigenvalues = np.linalg.eigvals(bundle_operator(law, b, a))
        return eigenvalues[np.lexsort((np.abs(eigenvalues), np.angle(eigenvalues)))]
