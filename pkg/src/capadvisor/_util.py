from __future__ import annotations

import contextlib
import os
import tempfile
from pathlib import Path

THREADS_ENV = "CAPADVISOR_THREADS"


def thread_count() -> int:
    """Worker bound from CAPADVISOR_THREADS; 0 or unset means one per CPU."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a non-negative integer, got {raw!r}")
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be a non-negative integer, got {raw!r}")
    return n or (os.cpu_count() or 1)


@contextlib.contextmanager
def atomic_open(path, mode="w", **kwargs):
    """Write to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    with atomic_open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
