"""Thread-count plumbing for internally parallel loops."""
from __future__ import annotations

import os

ENV_VAR = "TQMKIT_THREADS"


def thread_count() -> int:
    raw = os.environ.get(ENV_VAR, "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, n)
