"""Worker-pool plumbing honouring the CKM_THREADS environment variable."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

from .errors import StructuralError

T = TypeVar("T")
R = TypeVar("R")


def worker_count() -> int:
    """CKM_THREADS: unset -> 1 (serial), 0 -> one per CPU, n -> at most n."""
    raw = os.environ.get("CKM_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise StructuralError(f"CKM_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise StructuralError("CKM_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def pmap(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Order-preserving map; results never depend on the worker count."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
