"""Esquemas Pydantic dos documentos lidos e escritos pela CLI.
- Arquivos de cadeia, checkpoints de modelo, configurações de estudos e manifestos.
- Falhas de validação viram `ConfigError` com os nomes das chaves problemáticas.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from common.errors import ConfigError
from tclambda import __version__
from tclambda.experiments import LayeredChainSpec
from tclambda.markov import MarkovChain
from tclambda.trainer import TabularClassifier, TrainConfig


StudyName = Literal["mse-ratio", "consistency", "lambda-sweep"]


def _error_keys(exc: ValidationError) -> list[str]:
    return [".".join(str(part) for part in err["loc"]) or "<root>" for err in exc.errors()]


def validate_document(model: type[BaseModel], raw: Any, source: str) -> Any:
    """Valida `raw` contra `model`; erros viram ConfigError citando as chaves."""
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        keys = _error_keys(exc)
        raise ConfigError(
            f"{source}: configuracao invalida nas chaves {', '.join(keys)}",
            details={"keys": keys, "errors": [err["msg"] for err in exc.errors()]},
        ) from exc


class ChainDocument(BaseModel):
    """Arquivo de cadeia: `M`, `K`, `Q` (M x M), `R` (M x K) e `initial` (M)."""

    model_config = ConfigDict(extra="forbid")

    M: int = Field(ge=1)
    K: int = Field(ge=1)
    Q: list[list[float]]
    R: list[list[float]]
    initial: list[float]

    @classmethod
    def from_chain(cls, chain: MarkovChain) -> ChainDocument:
        return cls(M=chain.M, K=chain.K, Q=chain.Q.tolist(), R=chain.R.tolist(), initial=chain.initial.tolist())

    def to_chain(self) -> MarkovChain:
        return MarkovChain(M=self.M, K=self.K, Q=self.Q, R=self.R, initial=self.initial)


class CheckpointDocument(BaseModel):
    """Checkpoint de um classificador tabular: logits `theta` (M x K) e a configuração do treino."""

    model_config = ConfigDict(extra="forbid")

    M: int = Field(ge=1)
    K: int = Field(ge=1)
    theta: list[list[float]]
    train: dict[str, Any] | None = None

    @model_validator(mode="after")
    def _shape(self) -> CheckpointDocument:
        if len(self.theta) != self.M or any(len(row) != self.K for row in self.theta):
            raise ValueError(f"theta deve ter {self.M} linhas de {self.K} valores")
        return self

    @classmethod
    def from_model(cls, model: TabularClassifier, train: dict[str, Any] | None = None) -> CheckpointDocument:
        return cls(M=model.M, K=model.K, theta=model.theta.tolist(), train=train)

    def to_model(self) -> TabularClassifier:
        return TabularClassifier(np.asarray(self.theta, dtype=float))


class ChainSource(BaseModel):
    """Origem da cadeia de um estudo: arquivo (`path`) ou cadeia em camadas (`layered`)."""

    model_config = ConfigDict(extra="forbid")

    path: Path | None = None
    layered: LayeredChainSpec | None = None

    @model_validator(mode="after")
    def _exactly_one(self) -> ChainSource:
        if (self.path is None) == (self.layered is None):
            raise ValueError("informe exatamente um entre 'path' e 'layered'")
        return self


class StudyConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    runs: int = Field(ge=1)
    seed: int
    workers: int | None = Field(default=None, ge=1)


class MseRatioStudyConfig(StudyConfig):
    runs: int = Field(ge=2)
    W_values: list[int] = Field(min_length=1)
    T: int = Field(default=2, ge=1)
    probe_state: int = Field(default=1, ge=1)
    samples_per_width: int = Field(default=20, ge=1)
    keep_raw: bool = False

    @model_validator(mode="after")
    def _widths(self) -> MseRatioStudyConfig:
        if any(w < 1 for w in self.W_values):
            raise ValueError("W_values deve conter apenas inteiros >= 1")
        return self


class ConsistencyStudyConfig(StudyConfig):
    chain: ChainSource
    N_values: list[int] = Field(min_length=1)
    probe_state: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _sizes(self) -> ConsistencyStudyConfig:
        if any(n < 1 for n in self.N_values):
            raise ValueError("N_values deve conter apenas inteiros >= 1")
        return self


class LambdaSweepStudyConfig(StudyConfig):
    chain: ChainSource
    N: int = Field(ge=1)
    lambda_values: list[float] = Field(min_length=1)
    train: TrainConfig = Field(default_factory=TrainConfig)
    n_eval: int | None = Field(default=None, ge=1)
    prefix_len: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _lambdas(self) -> LambdaSweepStudyConfig:
        if any(not 0.0 <= lam <= 1.0 for lam in self.lambda_values):
            raise ValueError("lambda_values deve estar em [0, 1]")
        if len(set(self.lambda_values)) != len(self.lambda_values):
            raise ValueError("lambda_values nao pode conter valores repetidos")
        return self


STUDY_CONFIGS: dict[str, type[StudyConfig]] = {
    "mse-ratio": MseRatioStudyConfig,
    "consistency": ConsistencyStudyConfig,
    "lambda-sweep": LambdaSweepStudyConfig,
}


class StudyManifest(BaseModel):
    """Manifesto de proveniência: nome do estudo, versão e configuração efetiva completa."""

    model_config = ConfigDict(extra="forbid")

    study: StudyName
    version: str = __version__
    config: dict[str, Any]


class CommandManifest(BaseModel):
    """Manifesto dos comandos avulsos (ex.: train): comando e argumentos efetivos."""

    model_config = ConfigDict(extra="forbid")

    command: str
    version: str = __version__
    config: dict[str, Any]


def load_study_config(name: str, raw: Any, source: str) -> StudyConfig:
    """Aceita uma configuração simples ou um manifesto gravado por uma execução anterior."""
    if isinstance(raw, dict) and "study" in raw and "config" in raw:
        manifest = validate_document(StudyManifest, raw, source)
        if manifest.study != name:
            raise ConfigError(
                f"{source}: manifesto do estudo '{manifest.study}', esperado '{name}'",
                details={"keys": ["study"]},
            )
        raw = manifest.config
    return validate_document(STUDY_CONFIGS[name], raw, source)
