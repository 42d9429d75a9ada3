"""Testes do runner de replicações: ordem preservada, limite de concorrência e falhas."""

import threading
import time

import pytest

from worker.runner import run_parallel, run_tasks


def _square(x: int) -> int:
    return x * x


def test_run_parallel_sequential_and_threaded_agree():
    items = list(range(20))
    assert run_parallel(_square, items, workers=1) == run_parallel(_square, items, workers=4)
    assert run_parallel(_square, items, workers=4) == [x * x for x in items]


def test_run_parallel_uses_settings_default(monkeypatch):
    monkeypatch.setattr("common.config.settings.workers", 2)
    assert run_parallel(_square, [3, 1, 2]) == [9, 1, 4]


def test_run_parallel_propagates_errors():
    def boom(x: int) -> int:
        if x == 2:
            raise ValueError("falhou")
        return x

    with pytest.raises(ValueError):
        run_parallel(boom, [1, 2, 3], workers=2)


@pytest.mark.anyio
async def test_run_tasks_respects_worker_limit():
    lock = threading.Lock()
    active = {"now": 0, "peak": 0}

    def slow(x: int) -> int:
        with lock:
            active["now"] += 1
            active["peak"] = max(active["peak"], active["now"])
        time.sleep(0.01)
        with lock:
            active["now"] -= 1
        return x

    result = await run_tasks(slow, range(12), workers=3)
    assert result == list(range(12))
    assert active["peak"] <= 3


@pytest.mark.anyio
async def test_run_tasks_preserves_order_with_uneven_durations():
    def uneven(x: int) -> int:
        time.sleep(0.002 * (5 - x))
        return x

    assert await run_tasks(uneven, range(5), workers=5) == [0, 1, 2, 3, 4]


@pytest.fixture
def anyio_backend():
    return "asyncio"
