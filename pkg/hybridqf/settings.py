from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Numerical defaults and runtime configuration loaded from environment variables."""

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", case_sensitive=False)

    log_level: str = Field("INFO", description="Python logging level for the CLI.")
    output_dir: Path = Field(Path("out"), description="Default directory for command outputs.")

    positivity_tol: float = Field(1e-10, gt=0, description="Slack on minimum eigenvalues in positivity checks.")
    quadrature_order: int = Field(16, ge=2, description="Gauss-Legendre order for the noise-function integral.")
    quadrature_tol: float = Field(1e-10, gt=0, description="Target error of the noise-function integral, scaled by 1+t.")
    quadrature_max_depth: int = Field(40, ge=1, description="Maximum number of dyadic subdivision levels.")

    ode_method: str = Field("DOP853", description="scipy solve_ivp method for the moment equations.")
    ode_rtol: float = Field(1e-11, gt=0, description="Relative tolerance of the moment equations.")
    ode_atol: float = Field(1e-13, gt=0, description="Absolute tolerance of the moment equations.")

    default_n_paths: int = Field(100_000, ge=1, description="Monte Carlo paths when the config does not say.")
    default_dt_fraction: float = Field(1e-3, gt=0, le=1, description="Default dt as a fraction of the horizon.")
    path_block_size: int = Field(4096, ge=1, description="Paths per random substream block.")
    n_workers: int = Field(1, ge=1, description="Threads used to simulate path blocks.")

    twisted_sample_points: int = Field(16, ge=2, le=64, description="Points in admissibility samples.")
    twisted_sample_radius: float = Field(2.0, gt=0, description="Radius of admissibility sample points.")

    otel_service_name: str = Field("hybridqf", description="OpenTelemetry service.name resource attribute.")
    otlp_endpoint: Optional[str] = Field(None, description="OTLP gRPC endpoint for exported traces.")
    otlp_insecure: bool = Field(True, description="Whether to disable TLS when exporting OTLP traces.")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return cached settings instance."""

    return Settings()
