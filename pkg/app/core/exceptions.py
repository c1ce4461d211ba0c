from typing import List, Optional, Sequence


class QuantumBundleError(Exception):
    """Erro base; exit_code faz o papel do status HTTP na CLI"""

    exit_code: int = 3

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# ===== Erros numéricos / de domínio =====
class DimensionError(QuantumBundleError):
    pass


class HermiticityError(QuantumBundleError):
    pass


class UnitarityError(QuantumBundleError):
    pass


class UnitsError(QuantumBundleError):
    pass


class ZeroNormError(QuantumBundleError):
    pass


class DomainError(QuantumBundleError):
    pass


class MethodMismatchError(QuantumBundleError):
    pass


class BasePointError(QuantumBundleError):
    pass


class MorphismError(QuantumBundleError):
    pass


class RouteMismatchError(QuantumBundleError):
    """As duas rotas de levantamento do estado divergiram"""


class SingularFrameError(QuantumBundleError):
    def __init__(self, detail: str, parameter: Optional[float] = None):
        super().__init__(detail)
        self.parameter = parameter


# ===== Erros de configuração =====
class ConfigError(QuantumBundleError):
    exit_code = 2


class ConfigSyntaxError(ConfigError):
    def __init__(self, detail: str, line: Optional[int] = None):
        super().__init__(detail if line is None else f"line {line}: {detail}")
        self.line = line


class ConfigValidationError(ConfigError):
    def __init__(self, fields: Sequence[str], messages: Optional[Sequence[str]] = None):
        self.fields: List[str] = list(fields)
        self.messages: List[str] = list(messages or [])
        details = self.messages or self.fields
        super().__init__("invalid config: " + "; ".join(details))


class ScenarioError(QuantumBundleError):
    """Erro do núcleo anotado com o nome do cenário"""

    def __init__(self, scenario: str, cause: QuantumBundleError):
        super().__init__(f"scenario '{scenario}': {cause.detail}")
        self.scenario = scenario
        self.cause = cause
        self.exit_code = cause.exit_code
