import os
from concurrent.futures import ThreadPoolExecutor


def thread_count(requested: int | None = None) -> int:
    """Worker count: explicit request, else GCS_THREADS, else the CPU count."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("GCS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"GCS_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def pmap(fn, items, threads: int | None = None) -> list:
    """Ordered map; runs inline when one worker is enough."""
    items = list(items)
    workers = min(thread_count(threads), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
