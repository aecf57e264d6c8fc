"""Worker-count resolution for the thread pools."""

import os


def worker_count(default: int = 1) -> int:
    """Threads to use, from ANNULUS_THREADS (0 or unset means ``default``)."""
    raw = os.environ.get("ANNULUS_THREADS", "").strip()
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        return default
    return n if n > 0 else (os.cpu_count() or 1)
