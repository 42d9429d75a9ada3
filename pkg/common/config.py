"""Configurações da biblioteca e da CLI carregadas de variáveis de ambiente.
- Este módulo define a classe `Settings`, lida por todos os módulos para obter
tolerâncias do solver, limites de amostragem, paralelismo e o diretório de saída.
"""

from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    """Configurações tipadas da aplicação.
    - Os valores são lidos de variáveis de ambiente (pelos aliases definidos) e
    opcionalmente de um arquivo `.env` na raiz do projeto.
    """
    output_dir: Path = Field(default=Path("runs"), alias="TCLAMBDA_OUTPUT_DIR")
    log_level: str = Field(default="INFO", alias="TCLAMBDA_LOG_LEVEL")
    solver_tol: float = Field(default=1e-10, gt=0, alias="TCLAMBDA_SOLVER_TOL")
    solver_max_iters: int = Field(default=100_000, ge=1, alias="TCLAMBDA_SOLVER_MAX_ITERS")
    sample_step_cap: int = Field(default=1_000_000, ge=1, alias="TCLAMBDA_SAMPLE_STEP_CAP")
    workers: int = Field(default=1, ge=1, alias="TCLAMBDA_WORKERS")
    bootstrap_resamples: int = Field(default=2000, ge=100, alias="TCLAMBDA_BOOTSTRAP_RESAMPLES")

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=False, extra="ignore")


settings = Settings()
