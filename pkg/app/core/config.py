from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Application
    APP_NAME: str = "fibreflow"
    APP_VERSION: str = "1.0.0"
    ENVIRONMENT: str = "development"

    # Logging (stderr; stdout fica livre para traces e relatórios)
    LOG_LEVEL: str = "WARNING"
    LOG_FORMAT: str = "json"

    # Tolerâncias padrão (norma max-entry)
    HERMITICITY_TOL: float = 1e-10
    UNITARITY_TOL: float = 1e-10
    EQUALITY_TOL: float = 1e-9

    # Unidades naturais
    DEFAULT_HBAR: float = 1.0

    # Verificação amostrada de axiomas/propriedades
    CHECK_SAMPLES: int = 200
    CHECK_SEED: int = 0

    # Verificação das duas rotas em lift_state (modo debug)
    DUAL_ROUTE_CHECK: bool = True
    DUAL_ROUTE_TOL: float = 1e-10

    # Tolerância espacial para seções ao longo de caminhos
    SECTION_TOL: float = 1e-9

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"

    @property
    def dual_route_enabled(self) -> bool:
        """Rota dupla só fora de produção"""
        return self.DUAL_ROUTE_CHECK and self.ENVIRONMENT != "production"


settings = Settings()
