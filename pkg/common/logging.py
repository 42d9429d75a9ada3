"""Configuração compartilhada de logs estruturados.
- Fornece `setup_logging`, que configura o `structlog` para emitir uma linha JSON
por evento em stderr, deixando stdout e os arquivos de saída livres para CSVs.
- Variáveis de contexto (ex.: `study`, ligada pelo comando `study`) são anexadas
a todos os eventos emitidos enquanto estiverem ligadas.
"""

from __future__ import annotations
import logging
import sys
import structlog


def _resolve_level(level: int | str) -> int:
    if isinstance(level, int):
        return level
    resolved = logging.getLevelName(level.upper())
    return resolved if isinstance(resolved, int) else logging.INFO


def setup_logging(level: int | str = logging.INFO) -> None:
    """Configura o `structlog` e o logging padrão.
    - Parâmetros
        - level: Nível mínimo, inteiro ou nome ("DEBUG", "warning"...); nomes
        desconhecidos caem em INFO.
    """
    level = _resolve_level(level)
    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=level)

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(sort_keys=True),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
