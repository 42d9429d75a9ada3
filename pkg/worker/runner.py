"""Runner de replicações independentes dos estudos Monte Carlo.
- Cada item (tipicamente uma semente derivada) é processado em uma thread via
`asyncio.to_thread`, limitado por um semáforo; a ordem dos resultados é a ordem
dos itens, então a agregação não depende do escalonamento.
"""

from __future__ import annotations

import asyncio
from typing import Any, Callable, Iterable, TypeVar

import structlog

from common.config import settings


logger = structlog.get_logger("worker")

T = TypeVar("T")


async def process_run(fn: Callable[[Any], T], item: Any, index: int, semaphore: asyncio.Semaphore) -> T:
    """Executa uma replicação e registra início, fim ou falha."""
    async with semaphore:
        logger.debug("run_started", index=index)
        try:
            result = await asyncio.to_thread(fn, item)
        except Exception as exc:
            logger.exception("run_failed", index=index, error=str(exc))
            raise
        logger.debug("run_completed", index=index)
        return result


async def run_tasks(fn: Callable[[Any], T], items: Iterable[Any], workers: int) -> list[T]:
    """Processa todos os itens com no máximo `workers` replicações simultâneas."""
    semaphore = asyncio.Semaphore(max(1, workers))
    return list(await asyncio.gather(*(process_run(fn, item, i, semaphore) for i, item in enumerate(items))))


def run_parallel(fn: Callable[[Any], T], items: Iterable[Any], workers: int | None = None) -> list[T]:
    """Ponto de entrada síncrono; com um worker roda sequencialmente, sem event loop."""
    workers = settings.workers if workers is None else workers
    items = list(items)
    logger.debug("runs_dispatched", runs=len(items), workers=workers)
    if workers <= 1:
        return [fn(item) for item in items]
    return asyncio.run(run_tasks(fn, items, workers))
