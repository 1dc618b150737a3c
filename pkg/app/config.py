import os
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv
from functools import lru_cache

# Load environment variables from .env file
load_dotenv()

class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Application metadata
    APP_TITLE: str = "Standing-Wave Gate Simulator"
    APP_DESCRIPTION: str = "Simulation and analytic toolkit for standing-wave and traveling-wave trapped-ion gates"
    APP_VERSION: str = "1.0.0"

    # Logging
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # Hilbert space truncation
    FOCK_CUTOFF: int = int(os.getenv("FOCK_CUTOFF", "20"))
    FOCK_GROWTH: int = int(os.getenv("FOCK_GROWTH", "10"))
    TRUNCATION_THRESHOLD: float = float(os.getenv("TRUNCATION_THRESHOLD", "1e-8"))

    # Integrator defaults
    DT_SAMPLES: int = int(os.getenv("DT_SAMPLES", "200"))
    INTEGRATOR_TOL: float = float(os.getenv("INTEGRATOR_TOL", "1e-8"))
    MAX_REFINEMENTS: int = int(os.getenv("MAX_REFINEMENTS", "6"))

    # Worker pool (0 means one worker per logical core)
    DEFAULT_JOBS: int = int(os.getenv("DEFAULT_JOBS", "0"))

    # Output
    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "results")
    CSV_SIGNIFICANT_DIGITS: int = int(os.getenv("CSV_SIGNIFICANT_DIGITS", "9"))

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True)

@lru_cache()
def get_settings() -> Settings:
    """
    Get application settings with caching.

    Returns:
        Settings instance
    """
    return Settings()
