from typing import List, NamedTuple

import numpy as np

from ..core.config import settings
from ..core.exceptions import SingularFrameError
from ..core.logging_config import get_logger
from ..models_schemas.models import (
    BasePath, FibreMap, FrameFamily, TransportKind, TransportLaw, Trivialization
)
from ..models_schemas.schemas import PropertyRecord, PropertyReport
from .bundle_service import BundleService
from .linalg_service import max_norm, random_complex_vector

logger = get_logger(__name__)

# Acima disso F(s;γ) é tratado como singular
_MAX_CONDITION = 1e12


class TransportVerdict(NamedTuple):
    passed: bool
    defect: float
    isometry_defect: float = 0.0


def _require_invertible(matrix: np.ndarray, what: str, parameter=None):
    condition = np.linalg.cond(matrix)
    if not np.isfinite(condition) or condition > _MAX_CONDITION:
        raise SingularFrameError(f"{what} is singular (condition number {condition:.3e})", parameter)


def _sample_grid(path: BasePath, rng: np.random.Generator, count: int) -> np.ndarray:
    return path.grid[rng.integers(0, path.grid.size, size=count)]


class TransportService:
    """Transportes lineares ao longo de caminhos: axiomas, referenciais e gauge"""

    @staticmethod
    def flat_law(T: Trivialization, name: str = "flat") -> TransportLaw:
        """L^γ_{s→t} = l_{γ(s)→γ(t)}"""
        def evaluator(path: BasePath, s: float, t: float) -> np.ndarray:
            x = BundleService.eval_path(path, s)
            y = BundleService.eval_path(path, t)
            return BundleService.flat_transport(T, x, y).matrix
        return TransportLaw(evaluator=evaluator, dim=T.dim, kind=TransportKind.FLAT, name=name)

    @staticmethod
    def transport_from_frames(F: FrameFamily, name: str = None) -> TransportLaw:
        """
        L^γ_{s→t} = F⁻¹(t;γ)∘F(s;γ)
        """
        def evaluator(path: BasePath, s: float, t: float) -> np.ndarray:
            frame_s = F.matrix(path, s)
            frame_t = F.matrix(path, t)
            _require_invertible(frame_s, f"frame F({s})", s)
            _require_invertible(frame_t, f"frame F({t})", t)
            if s == t:
                return np.eye(F.dim, dtype=complex)
            return np.linalg.solve(frame_t, frame_s)
        return TransportLaw(
            evaluator=evaluator,
            dim=F.dim,
            kind=TransportKind.FRAME_FACTORED,
            name=name or f"from_{F.name}",
        )

    @staticmethod
    def check_frames(F: FrameFamily, path: BasePath):
        """Falha com SingularFrameError no primeiro s da grade com F(s;γ) singular"""
        for s in path.grid:
            _require_invertible(F.matrix(path, float(s)), f"frame F({s})", float(s))

    @staticmethod
    def frames_from_transport(L: TransportLaw, path: BasePath, s0: float) -> FrameFamily:
        """F(s;γ) := L^γ_{s→s0}"""
        BundleService.eval_path(path, s0)
        return FrameFamily(
            evaluator=lambda gamma, s: L.matrix(gamma, s, s0),
            dim=L.dim,
            name=f"{L.name}@{s0:g}",
        )

    @staticmethod
    def gauge_transform(F: FrameFamily, D) -> FrameFamily:
        """F⋆(s;γ) = D(γ)∘F(s;γ)"""
        D = np.asarray(D, dtype=complex)
        _require_invertible(D, "gauge matrix D")
        return FrameFamily(evaluator=lambda gamma, s: D @ F.matrix(gamma, s), dim=F.dim, name=f"{F.name}*")

    @staticmethod
    def law_defect(
        first: TransportLaw, second: TransportLaw, path: BasePath, samples: int = None, seed: int = None
    ) -> float:
        """
        Maior diferença entre duas leis; todos os pares (s, t) da grade, ou `samples` pares sorteados
        """
        if samples is None:
            pairs = ((s, t) for s in path.grid for t in path.grid)
        else:
            _, pairs = TransportService._pairs(path, samples, settings.CHECK_SEED if seed is None else seed)
        worst = 0.0
        for s, t in pairs:
            worst = max(worst, max_norm(first.matrix(path, s, t) - second.matrix(path, s, t)))
        return worst

    @staticmethod
    def check_axioms(
        L: TransportLaw,
        path: BasePath,
        samples: int = None,
        seed: int = None,
        tol: float = None,
    ) -> PropertyReport:
        """
        Defeitos máximos de identidade, composição, linearidade e inversão, amostrados na grade
        """
        samples = settings.CHECK_SAMPLES if samples is None else samples
        seed = settings.CHECK_SEED if seed is None else seed
        tol = settings.EQUALITY_TOL if tol is None else tol
        rng = np.random.default_rng(seed)
        identity = np.eye(L.dim)

        r_values = _sample_grid(path, rng, samples)
        s_values = _sample_grid(path, rng, samples)
        t_values = _sample_grid(path, rng, samples)

        identity_defect = composition_defect = linearity_defect = inversion_defect = 0.0
        for r, s, t in zip(r_values, s_values, t_values):
            identity_defect = max(identity_defect, max_norm(L.matrix(path, s, s) - identity))

            l_rs = L.matrix(path, r, s)
            l_st = L.matrix(path, s, t)
            l_rt = L.matrix(path, r, t)
            composition_defect = max(composition_defect, max_norm(l_st @ l_rs - l_rt))

            lam, mu = random_complex_vector(rng, 2)
            u = random_complex_vector(rng, L.dim)
            v = random_complex_vector(rng, L.dim)
            linearity_defect = max(
                linearity_defect,
                max_norm(l_st @ (lam * u + mu * v) - (lam * (l_st @ u) + mu * (l_st @ v))),
            )

            inversion_defect = max(inversion_defect, max_norm(L.matrix(path, t, s) @ l_st - identity))

        records = [
            PropertyRecord.build(L.name, "identity", identity_defect, tol),
            PropertyRecord.build(L.name, "composition", composition_defect, tol),
            PropertyRecord.build(L.name, "linearity", linearity_defect, tol),
            PropertyRecord.build(L.name, "inversion", inversion_defect, tol),
        ]
        report = PropertyReport(records=records)
        logger.info("Transport axioms checked", law=L.name, samples=samples, passed=report.passed)
        return report

    # ===== Conjugação hermitiana de transportes =====
    @staticmethod
    def _fibre_map(L: TransportLaw, path: BasePath, s: float, t: float) -> FibreMap:
        return FibreMap(BundleService.eval_path(path, s), BundleService.eval_path(path, t), L.matrix(path, s, t))

    @staticmethod
    def transport_dagger(L: TransportLaw, path: BasePath, T: Trivialization, s: float, t: float) -> np.ndarray:
        """(L^γ_{s→t})‡, conjugado a partir de L^γ_{t→s} com x=γ(s), y=γ(t)"""
        return BundleService.fibre_map_dagger(TransportService._fibre_map(L, path, t, s), T).matrix

    @staticmethod
    def _pairs(path: BasePath, samples: int, seed: int):
        rng = np.random.default_rng(seed)
        return rng, zip(_sample_grid(path, rng, samples), _sample_grid(path, rng, samples))

    @staticmethod
    def is_hermitian_transport(
        L: TransportLaw, path: BasePath, T: Trivialization,
        samples: int = None, seed: int = None, tol: float = None,
    ) -> TransportVerdict:
        """(L^γ_{s→t})‡ = L^γ_{s→t} sobre pares (s, t) amostrados"""
        samples = settings.CHECK_SAMPLES if samples is None else samples
        seed = settings.CHECK_SEED if seed is None else seed
        tol = settings.EQUALITY_TOL if tol is None else tol
        _, pairs = TransportService._pairs(path, samples, seed)
        defect = 0.0
        for s, t in pairs:
            conjugate = TransportService.transport_dagger(L, path, T, s, t)
            defect = max(defect, max_norm(conjugate - L.matrix(path, s, t)))
        return TransportVerdict(defect <= tol, defect)

    @staticmethod
    def is_unitary_transport(
        L: TransportLaw, path: BasePath, T: Trivialization,
        samples: int = None, seed: int = None, tol: float = None,
    ) -> TransportVerdict:
        """
        (L^γ_{s→t})‡ = (L^γ_{t→s})⁻¹, i.e. (L^γ_{s→t})‡∘L^γ_{t→s} = id; relata também o defeito de isometria
        """
        samples = settings.CHECK_SAMPLES if samples is None else samples
        seed = settings.CHECK_SEED if seed is None else seed
        tol = settings.EQUALITY_TOL if tol is None else tol
        rng, pairs = TransportService._pairs(path, samples, seed)
        identity = np.eye(L.dim)
        defect = isometry_defect = 0.0
        for s, t in pairs:
            conjugate = TransportService.transport_dagger(L, path, T, s, t)
            defect = max(defect, max_norm(conjugate @ L.matrix(path, t, s) - identity))

            forward = L.matrix(path, s, t)
            phi = random_complex_vector(rng, L.dim)
            psi = random_complex_vector(rng, L.dim)
            isometry_defect = max(
                isometry_defect,
                abs(np.vdot(forward @ phi, forward @ psi) - np.vdot(phi, psi)),
            )
        return TransportVerdict(defect <= tol, defect, float(isometry_defect))

    @staticmethod
    def equivalence_records(
        L: TransportLaw, path: BasePath, T: Trivialization,
        samples: int = None, seed: int = None, tol: float = None,
    ) -> List[PropertyRecord]:
        """Registros de Hermitiano, unitário e concordância entre os dois predicados"""
        tol = settings.EQUALITY_TOL if tol is None else tol
        hermitian = TransportService.is_hermitian_transport(L, path, T, samples, seed, tol)
        unitary = TransportService.is_unitary_transport(L, path, T, samples, seed, tol)
        return [
            PropertyRecord.build(L.name, "hermitian_transport", hermitian.defect, tol),
            PropertyRecord.build(L.name, "unitary_transport", unitary.defect, tol),
            PropertyRecord.build(L.name, "isometric_transport", unitary.isometry_defect, tol),
            PropertyRecord(
                law_id=L.name,
                property="hermitian_iff_unitary",
                max_defect=0.0 if hermitian.passed == unitary.passed else 1.0,
                tolerance=0.0,
                passed=hermitian.passed == unitary.passed,
            ),
        ]
