"""Exceções específicas da aplicação para padronizar tratamento de erros."""

from __future__ import annotations
from dataclasses import dataclass
from typing import Any


@dataclass
class AppError(Exception):
    """Erro base da aplicação.
    - Atributos
        - code: Código curto e estável para identificação do erro.
        - message: Mensagem legível.
        - exit_code: Código de saída da CLI (2 = erro de usuário/config, 3 = falha numérica).
        - details: Informações adicionais para diagnóstico.
    """

    code: str
    message: str
    exit_code: int = 2
    details: dict | None = None

    def __str__(self) -> str:
        return self.message


class UsageError(AppError):
    def __init__(self, message: str, *, details: dict | None = None) -> None:
        super().__init__(code="USAGE_ERROR", message=message, exit_code=2, details=details)


class ConfigError(AppError):
    def __init__(self, message: str, *, details: dict | None = None) -> None:
        super().__init__(code="CONFIG_ERROR", message=message, exit_code=2, details=details)


class DataFormatError(AppError):
    def __init__(self, message: str, *, details: dict | None = None) -> None:
        super().__init__(code="DATA_FORMAT_ERROR", message=message, exit_code=2, details=details)


class ChainStructureError(AppError):
    """Dimensões de Q, R e initial incompatíveis com M e K declarados."""

    def __init__(self, message: str, *, details: dict | None = None) -> None:
        super().__init__(code="CHAIN_STRUCTURE", message=message, exit_code=2, details=details)


class ChainValidationError(AppError):
    """Cadeia com dimensões corretas mas que viola algum invariante."""

    def __init__(self, violations: list[dict[str, Any]], message: str = "Cadeia invalida") -> None:
        super().__init__(code="CHAIN_INVALID", message=message, exit_code=2, details={"violations": violations})
        self.violations = violations


class NonConvergenceError(AppError):
    """Iteração de ponto fixo esgotou `max_iters` sem atingir a tolerância.
    - Carrega o último iterado, o resíduo e o número de iterações.
    """

    def __init__(self, last_iterate: Any, residual: float, iterations: int, message: str = "Iteracao de ponto fixo nao convergiu") -> None:
        super().__init__(
            code="NON_CONVERGENCE",
            message=message,
            exit_code=3,
            details={"residual": residual, "iterations": iterations},
        )
        self.last_iterate = last_iterate
        self.residual = residual
        self.iterations = iterations


class SingularSystemError(AppError):
    def __init__(self, message: str = "Sistema (I - Q) singular", *, details: dict | None = None) -> None:
        super().__init__(code="SINGULAR_SYSTEM", message=message, exit_code=3, details=details)


class TrainingDivergenceError(AppError):
    def __init__(self, epoch: int, learning_rate: float, *, loss: float | None = None) -> None:
        super().__init__(
            code="TRAINING_DIVERGED",
            message=f"Perda nao finita na epoca {epoch} (learning_rate={learning_rate})",
            exit_code=3,
            details={"epoch": epoch, "learning_rate": learning_rate, "loss": loss},
        )
        self.epoch = epoch
        self.learning_rate = learning_rate


class UndefinedMetricError(AppError):
    def __init__(self, message: str, *, details: dict | None = None) -> None:
        super().__init__(code="UNDEFINED_METRIC", message=message, exit_code=3, details=details)
