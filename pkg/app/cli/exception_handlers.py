"""Handlers de exceção da CLI: código de saída estável e payload JSON padronizado em stderr."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Callable

import structlog
from pydantic import ValidationError

from common.errors import AppError


logger = structlog.get_logger("cli.errors")

Handler = Callable[[BaseException], int]

_handlers: list[tuple[type[BaseException], Handler]] = []


def exception_handler(exc_type: type[BaseException]) -> Callable[[Handler], Handler]:
    """Registra um handler; o primeiro tipo compatível, na ordem de registro, é usado."""

    def decorator(fn: Handler) -> Handler:
        _handlers.append((exc_type, fn))
        return fn

    return decorator


def _payload(code: str, message: str, *, details: dict | None = None) -> dict:
    return {"error": {"code": code, "message": message, **({"details": details} if details else {})}}


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, default=str), file=sys.stderr)


@exception_handler(AppError)
def app_error_handler(exc: AppError) -> int:
    logger.error("command_failed", code=exc.code, message=exc.message, exit_code=exc.exit_code)
    _emit(_payload(exc.code, exc.message, details=exc.details))
    return exc.exit_code


@exception_handler(ValidationError)
def validation_handler(exc: ValidationError) -> int:
    errors = [{"loc": list(err["loc"]), "msg": err["msg"]} for err in exc.errors()]
    logger.warning("validation_error", errors=errors)
    _emit(_payload("VALIDATION_ERROR", "Erro de validacao", details={"errors": errors}))
    return 2


@exception_handler(Exception)
def unhandled_handler(exc: BaseException) -> int:
    logger.exception("unhandled_exception")
    _emit(_payload("INTERNAL_ERROR", "Erro interno inesperado"))
    return 1


def dispatch(command: Callable[[argparse.Namespace], int], args: argparse.Namespace) -> int:
    """Executa o comando e converte exceções em código de saída."""
    try:
        return command(args)
    except Exception as exc:
        for exc_type, handler in _handlers:
            if isinstance(exc, exc_type):
                return handler(exc)
        raise
