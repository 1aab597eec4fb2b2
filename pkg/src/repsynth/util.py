"""Small shared helpers: atomic file writes and content hashing."""

import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    """Write ``payload`` to ``path`` via a temp file + rename.

    Concurrent writers of the same path are safe: the rename is atomic and
    the last writer wins with a complete file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def content_hash(data: bytes | np.ndarray) -> str:
    """Hex SHA-256 of raw bytes or of an array's contiguous buffer."""
    if isinstance(data, np.ndarray):
        data = np.ascontiguousarray(data).tobytes()
    return hashlib.sha256(data).hexdigest()
