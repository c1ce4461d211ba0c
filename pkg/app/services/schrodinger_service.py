from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from ..core.config import settings
from ..core.exceptions import (
    DimensionError, DomainError, HermiticityError, MethodMismatchError, UnitsError
)
from ..core.logging_config import get_logger
from ..models_schemas.models import (
    ComplexOperator, HamiltonianFamily, HamiltonianSegment, Propagator,
    PropagatorMethod, Scheme, StateVector, TimeDependentHamiltonian
)
from .linalg_service import (
    PAULI_X, PAULI_Y, PAULI_Z, HilbertSpaceService, as_matrix, max_norm
)

logger = get_logger(__name__)

_EXACT_FAMILIES = (HamiltonianFamily.CONSTANT, HamiltonianFamily.PIECEWISE_CONSTANT)


class InverseDefects(NamedTuple):
    inverse_defect: float
    adjoint_defect: float


class SchrodingerService:
    """Hamiltonianos dependentes do tempo e o operador de evolução 𝒰(t, t₀)"""

    # ===== Construção de Hamiltonianos =====
    @staticmethod
    def _check_hbar(hbar: float):
        if not hbar > 0:
            raise UnitsError(f"hbar must be positive, got {hbar}")

    @staticmethod
    def _check_hermitian_sample(matrix: np.ndarray, label: str, tol: Optional[float]):
        tol = settings.HERMITICITY_TOL if tol is None else tol
        if not HilbertSpaceService.is_hermitian(matrix, tol):
            defect = HilbertSpaceService.hermiticity_defect(matrix)
            raise HermiticityError(f"{label} is not Hermitian (defect {defect:.3e} > {tol:.1e})")

    @staticmethod
    def constant(
        matrix,
        hbar: float = None,
        domain: Tuple[float, float] = (-np.inf, np.inf),
        anti_hermitian_perturbation: float = 0.0,
        hermiticity_tol: float = None,
        name: str = "constant",
    ) -> TimeDependentHamiltonian:
        hbar = settings.DEFAULT_HBAR if hbar is None else hbar
        SchrodingerService._check_hbar(hbar)
        matrix = as_matrix(matrix).copy()
        SchrodingerService._check_hermitian_sample(matrix, "constant Hamiltonian", hermiticity_tol)
        return TimeDependentHamiltonian(
            family=HamiltonianFamily.CONSTANT,
            dim=matrix.shape[0],
            hbar=hbar,
            domain=tuple(domain),
            matrix=matrix,
            anti_hermitian_perturbation=anti_hermitian_perturbation,
            hermiticity_tol=hermiticity_tol,
            name=name,
        )

    @staticmethod
    def piecewise_constant(
        segments: Sequence[Tuple[float, float, object]],
        hbar: float = None,
        anti_hermitian_perturbation: float = 0.0,
        hermiticity_tol: float = None,
        name: str = "piecewise_constant",
    ) -> TimeDependentHamiltonian:
        """
        Segmentos [início, fim) contíguos; o último é fechado à direita
        """
        hbar = settings.DEFAULT_HBAR if hbar is None else hbar
        SchrodingerService._check_hbar(hbar)
        if not segments:
            raise DomainError("piecewise_constant Hamiltonian needs at least one segment")
        built = []
        for index, (start, end, matrix) in enumerate(segments):
            matrix = as_matrix(matrix).copy()
            if not end > start:
                raise DomainError(f"segment {index} has end {end} <= start {start}")
            if built and start != built[-1].end:
                raise DomainError(f"segment {index} starts at {start}, previous ends at {built[-1].end}: gap or overlap")
            if built and matrix.shape != built[-1].matrix.shape:
                raise DimensionError(f"segment {index} has dim {matrix.shape[0]}")
            SchrodingerService._check_hermitian_sample(matrix, f"segment {index}", hermiticity_tol)
            built.append(HamiltonianSegment(float(start), float(end), matrix))
        return TimeDependentHamiltonian(
            family=HamiltonianFamily.PIECEWISE_CONSTANT,
            dim=built[0].matrix.shape[0],
            hbar=hbar,
            domain=(built[0].start, built[-1].end),
            segments=tuple(built),
            anti_hermitian_perturbation=anti_hermitian_perturbation,
            hermiticity_tol=hermiticity_tol,
            name=name,
        )

    @staticmethod
    def two_level_drive(
        delta: float,
        rabi: float,
        drive_frequency: float,
        hbar: float = None,
        domain: Tuple[float, float] = (-np.inf, np.inf),
        anti_hermitian_perturbation: float = 0.0,
        hermiticity_tol: float = None,
        name: str = "two_level_drive",
    ) -> TimeDependentHamiltonian:
        """ℋ(t) = (Δ/2)σ_z + (Ω/2)(cos ωt·σ_x + sin ωt·σ_y)"""
        hbar = settings.DEFAULT_HBAR if hbar is None else hbar
        SchrodingerService._check_hbar(hbar)
        return TimeDependentHamiltonian(
            family=HamiltonianFamily.TWO_LEVEL_DRIVE,
            dim=2,
            hbar=hbar,
            domain=tuple(domain),
            delta=float(delta),
            rabi=float(rabi),
            drive_frequency=float(drive_frequency),
            anti_hermitian_perturbation=anti_hermitian_perturbation,
            hermiticity_tol=hermiticity_tol,
            name=name,
        )

    @staticmethod
    def tabulated(
        times: Sequence[float],
        samples: Sequence[object],
        hbar: float = None,
        anti_hermitian_perturbation: float = 0.0,
        hermiticity_tol: float = None,
        name: str = "tabulated",
    ) -> TimeDependentHamiltonian:
        """Amostras hermitianas interpoladas linearmente entre tempos crescentes"""
        hbar = settings.DEFAULT_HBAR if hbar is None else hbar
        SchrodingerService._check_hbar(hbar)
        times = np.array(times, dtype=float)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
            raise DomainError("tabulated times must be strictly increasing with at least two entries")
        matrices = np.array([as_matrix(sample) for sample in samples], dtype=complex)
        if matrices.shape[0] != times.size:
            raise DimensionError(f"{matrices.shape[0]} samples for {times.size} times")
        for index, matrix in enumerate(matrices):
            SchrodingerService._check_hermitian_sample(
                matrix, f"tabulated entry {index} (t={times[index]})", hermiticity_tol
            )
        times.setflags(write=False)
        matrices.setflags(write=False)
        return TimeDependentHamiltonian(
            family=HamiltonianFamily.TABULATED,
            dim=matrices.shape[1],
            hbar=hbar,
            domain=(float(times[0]), float(times[-1])),
            times=times,
            samples=matrices,
            anti_hermitian_perturbation=anti_hermitian_perturbation,
            hermiticity_tol=hermiticity_tol,
            name=name,
        )

    # ===== Avaliação =====
    @staticmethod
    def _raw_value(H: TimeDependentHamiltonian, t: float) -> np.ndarray:
        if H.family is HamiltonianFamily.CONSTANT:
            return np.array(H.matrix, dtype=complex)
        if H.family is HamiltonianFamily.PIECEWISE_CONSTANT:
            for segment in H.segments[:-1]:
                if segment.start <= t < segment.end:
                    return np.array(segment.matrix, dtype=complex)
            return np.array(H.segments[-1].matrix, dtype=complex)
        if H.family is HamiltonianFamily.TWO_LEVEL_DRIVE:
            phase = H.drive_frequency * t
            return (0.5 * H.delta) * PAULI_Z + (0.5 * H.rabi) * (np.cos(phase) * PAULI_X + np.sin(phase) * PAULI_Y)
        # tabulated
        k = int(np.searchsorted(H.times, t, side="right")) - 1
        k = min(max(k, 0), H.times.size - 2)
        weight = (t - H.times[k]) / (H.times[k + 1] - H.times[k])
        return (1.0 - weight) * H.samples[k] + weight * H.samples[k + 1]

    @staticmethod
    def eval_hamiltonian(H: TimeDependentHamiltonian, t: float, hermiticity_tol: float = None) -> ComplexOperator:
        """
        ℋ(t), validado como hermitiano a cada avaliação
        """
        a, b = H.domain
        if not a <= t <= b:
            raise DomainError(f"t={t} outside Hamiltonian domain [{a}, {b}]")
        value = SchrodingerService._raw_value(H, t)
        if H.is_negative_control:
            value = value.copy()
            value[0, 0] += 1j * H.anti_hermitian_perturbation
            return ComplexOperator(value)
        if hermiticity_tol is None:
            hermiticity_tol = H.hermiticity_tol
        SchrodingerService._check_hermitian_sample(value, f"H({t})", hermiticity_tol)
        return ComplexOperator(value)

    # ===== Fatores de passo =====
    @staticmethod
    def _exact_factor(H: TimeDependentHamiltonian, a: float, b: float) -> np.ndarray:
        hermitian = not H.is_negative_control
        if H.family is HamiltonianFamily.CONSTANT:
            generator = SchrodingerService.eval_hamiltonian(H, a).entries
            return HilbertSpaceService.generator_exponential(generator, b - a, H.hbar, hermitian, H.hermiticity_tol)
        # Produto exato sobre os segmentos que intersectam [a, b]
        result = np.eye(H.dim, dtype=complex)
        for segment in H.segments:
            lo, hi = max(a, segment.start), min(b, segment.end)
            if hi <= lo:
                continue
            generator = SchrodingerService.eval_hamiltonian(H, lo).entries
            factor = HilbertSpaceService.generator_exponential(generator, hi - lo, H.hbar, hermitian, H.hermiticity_tol)
            result = factor @ result
        return result

    @staticmethod
    def step_function(H: TimeDependentHamiltonian, scheme: Scheme) -> Callable[[float, float], np.ndarray]:
        """Fator de passo a→b do esquema escolhido"""
        hermitian = not H.is_negative_control
        identity = np.eye(H.dim, dtype=complex)

        if scheme is Scheme.EXACT_CONSTANT:
            return lambda a, b: SchrodingerService._exact_factor(H, a, b)

        if scheme is Scheme.MAGNUS_MIDPOINT:
            def magnus(a: float, b: float) -> np.ndarray:
                generator = SchrodingerService.eval_hamiltonian(H, 0.5 * (a + b)).entries
                return HilbertSpaceService.generator_exponential(generator, b - a, H.hbar, hermitian, H.hermiticity_tol)
            return magnus

        if scheme is Scheme.CRANK_NICOLSON:
            def crank_nicolson(a: float, b: float) -> np.ndarray:
                generator = SchrodingerService.eval_hamiltonian(H, 0.5 * (a + b)).entries
                half = 0.5j * (b - a) / H.hbar * generator
                return la.lu_solve(la.lu_factor(identity + half), identity - half)
            return crank_nicolson

        def euler(a: float, b: float) -> np.ndarray:
            generator = SchrodingerService.eval_hamiltonian(H, a).entries
            return identity - 1j * (b - a) / H.hbar * generator
        return euler

    # ===== Propagador =====
    @staticmethod
    def build_propagator(
        H: TimeDependentHamiltonian, t0: float, t1: float, method: PropagatorMethod
    ) -> Propagator:
        """
        Exponencial T-ordenada como produto ordenado de fatores de passo
        """
        if method.steps < 1:
            raise DomainError(f"steps must be >= 1, got {method.steps}")
        if not t1 > t0:
            raise DomainError(f"propagator interval needs t1 > t0, got [{t0}, {t1}]")
        a, b = H.domain
        if t0 < a or t1 > b:
            raise DomainError(f"[{t0}, {t1}] not within Hamiltonian domain [{a}, {b}]")
        if method.scheme is Scheme.EXACT_CONSTANT and H.family not in _EXACT_FAMILIES:
            raise MethodMismatchError(
                f"exact_constant requires a constant or piecewise_constant Hamiltonian, got {H.family.value}"
            )

        step = SchrodingerService.step_function(H, method.scheme)
        grid = np.linspace(t0, t1, method.steps + 1)
        grid[0], grid[-1] = t0, t1

        prefix = np.empty((method.steps + 1, H.dim, H.dim), dtype=complex)
        inverse_prefix = np.empty_like(prefix)
        prefix[0] = np.eye(H.dim)
        inverse_prefix[0] = np.eye(H.dim)
        for k in range(method.steps):
            factor = step(float(grid[k]), float(grid[k + 1]))
            prefix[k + 1] = factor @ prefix[k]
            inverse_prefix[k + 1] = inverse_prefix[k] @ np.linalg.inv(factor)

        grid.setflags(write=False)
        prefix.setflags(write=False)
        inverse_prefix.setflags(write=False)

        logger.info(
            "Propagator built",
            hamiltonian=H.name,
            family=H.family.value,
            scheme=method.scheme.value,
            steps=method.steps,
            t0=t0,
            t1=t1,
            final_unitarity_defect=HilbertSpaceService.unitarity_defect(prefix[-1]),
        )
        return Propagator(
            hamiltonian=H,
            method=method,
            grid=grid,
            prefix=prefix,
            inverse_prefix=inverse_prefix,
            fractional_step=step,
        )

    @staticmethod
    def evolve_state(U: Propagator, psi0: StateVector, t0: float, t: float) -> StateVector:
        """ψ(t) = 𝒰(t, t₀)ψ₀"""
        if psi0.dim != U.dim:
            raise DimensionError(f"state dim {psi0.dim} vs propagator dim {U.dim}")
        return StateVector(U.matrix(t, t0) @ psi0.amplitudes)

    @staticmethod
    def composition_defect(U: Propagator, t1: float, t2: float, t3: float) -> float:
        """‖𝒰(t3,t1) − 𝒰(t3,t2)·𝒰(t2,t1)‖"""
        return max_norm(U.matrix(t3, t1) - U.matrix(t3, t2) @ U.matrix(t2, t1))

    @staticmethod
    def recover_hamiltonian(U: Propagator, t: float, delta: float) -> ComplexOperator:
        """
        ℋ(t) = iħ ∂𝒰/∂t ∘ 𝒰(t₀, t) por diferença central
        """
        if not delta > 0:
            raise DomainError(f"finite-difference step must be positive, got {delta}")
        t0 = U.t0
        derivative = (U.matrix(t + delta, t0) - U.matrix(t - delta, t0)) / (2.0 * delta)
        return ComplexOperator(1j * U.hamiltonian.hbar * derivative @ U.matrix(t0, t))

    @staticmethod
    def inverse_identity_defect(U: Propagator, s: float, t: float) -> InverseDefects:
        """
        Defeitos de 𝒰⁻¹(t,s) = 𝒰(s,t) e de 𝒰†(s,t) = 𝒰(t,s)
        """
        forward = U.matrix(t, s)
        backward = U.matrix(s, t)
        inverse_defect = max_norm(backward @ forward - np.eye(U.dim))
        adjoint_defect = max_norm(backward.conj().T - forward)
        return InverseDefects(inverse_defect, adjoint_defect)

    @staticmethod
    def schrodinger_residual(
        U: Propagator, psi0: StateVector, t: float, delta: float
    ) -> float:
        """‖iħ·dψ/dt − ℋ(t)ψ(t)‖ com ψ₀ dado em U.t0"""
        if not delta > 0:
            raise DomainError(f"finite-difference step must be positive, got {delta}")
        t0 = U.t0
        H = U.hamiltonian
        forward = U.matrix(t + delta, t0) @ psi0.amplitudes
        backward = U.matrix(t - delta, t0) @ psi0.amplitudes
        current = U.matrix(t, t0) @ psi0.amplitudes
        lhs = 1j * H.hbar * (forward - backward) / (2.0 * delta)
        rhs = SchrodingerService.eval_hamiltonian(H, t).entries @ current
        return max_norm(lhs - rhs)

    # ===== Oráculos =====
    @staticmethod
    def closed_form_propagator(H: TimeDependentHamiltonian, t0: float, t: float) -> Optional[np.ndarray]:
        """
        𝒰(t, t₀) exato quando a família admite forma fechada; None para tabulated
        """
        if H.is_negative_control:
            return None
        if H.family in _EXACT_FAMILIES:
            if t >= t0:
                return SchrodingerService._exact_factor(H, t0, t)
            return np.linalg.inv(SchrodingerService._exact_factor(H, t, t0))
        if H.family is HamiltonianFamily.TWO_LEVEL_DRIVE:
            # Referencial girante R(t) = exp(−iωtσ_z/2): ℋ' = ((Δ − ħω)/2)σ_z + (Ω/2)σ_x
            frame = lambda time: np.diag(np.exp([-0.5j * H.drive_frequency * time, 0.5j * H.drive_frequency * time]))
            rotating = 0.5 * (H.delta - H.hbar * H.drive_frequency) * PAULI_Z + 0.5 * H.rabi * PAULI_X
            flow = HilbertSpaceService.expm_hermitian_generator(rotating, t - t0, H.hbar, H.hermiticity_tol).entries
            return frame(t) @ flow @ frame(t0).conj().T
        return None

    @staticmethod
    def rabi_transition_probability(H: TimeDependentHamiltonian, t0: float, t: float) -> float:
        """(Ω²/Ω_R²)·sin²(Ω_R(t−t₀)/2ħ) partindo de (1, 0)"""
        if H.family is not HamiltonianFamily.TWO_LEVEL_DRIVE:
            raise MethodMismatchError("Rabi formula needs a two_level_drive Hamiltonian")
        detuning = H.delta - H.hbar * H.drive_frequency
        generalized = np.hypot(H.rabi, detuning)
        if generalized == 0:
            return 0.0
        return float((H.rabi / generalized) ** 2 * np.sin(0.5 * generalized * (t - t0) / H.hbar) ** 2)
