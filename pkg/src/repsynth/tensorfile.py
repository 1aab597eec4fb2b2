"""Binary tensor files for mel and representation matrices.

Layout (little-endian), shared by both kinds:

    bytes 0..7   magic: 7 ASCII chars + NUL  ("R2WMEL1" or "R2WREP1")
    uint32       n_rows
    uint32       n_cols
    uint32       dtype code (1 = float32)
    [REP only]
    float32      frame_shift_ms
    uint32       source_rate (Hz)

followed by the row-major float32 payload. A mel file is therefore
20 bytes of header + 4*n_rows*n_cols bytes of data; a representation
file has a 28-byte header.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .util import atomic_write_bytes

MEL_MAGIC = b"R2WMEL1\x00"
REP_MAGIC = b"R2WREP1\x00"

_DTYPE_F32 = 1

MEL_HEADER_SIZE = 8 + 4 * 3
REP_HEADER_SIZE = 8 + 4 * 3 + 4 + 4


def _check_matrix(matrix: np.ndarray) -> np.ndarray:
    if matrix.ndim != 2:
        raise DataError(f"expected a 2-D matrix, got shape {matrix.shape}")
    return np.ascontiguousarray(matrix, dtype=np.float32)


def save_mel_matrix(path: Path, frames: np.ndarray) -> None:
    frames = _check_matrix(frames)
    header = MEL_MAGIC + struct.pack("<III", frames.shape[0], frames.shape[1], _DTYPE_F32)
    atomic_write_bytes(Path(path), header + frames.tobytes())


def load_mel_matrix(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < MEL_HEADER_SIZE or raw[:8] != MEL_MAGIC:
        raise DataError(f"corrupt header in mel file {path}")
    n_rows, n_cols, dtype = struct.unpack("<III", raw[8:MEL_HEADER_SIZE])
    if dtype != _DTYPE_F32:
        raise DataError(f"unsupported dtype code {dtype} in {path}")
    return _read_payload(raw, MEL_HEADER_SIZE, n_rows, n_cols, path)


def save_rep_matrix(path: Path, frames: np.ndarray, frame_shift_ms: float, source_rate: int) -> None:
    frames = _check_matrix(frames)
    header = REP_MAGIC + struct.pack(
        "<IIIfI", frames.shape[0], frames.shape[1], _DTYPE_F32, frame_shift_ms, source_rate
    )
    atomic_write_bytes(Path(path), header + frames.tobytes())


def load_rep_matrix(path: Path) -> tuple[np.ndarray, float, int]:
    """Returns (frames, frame_shift_ms, source_rate)."""
    raw = Path(path).read_bytes()
    if len(raw) < REP_HEADER_SIZE or raw[:8] != REP_MAGIC:
        raise DataError(f"corrupt header in representation file {path}")
    n_rows, n_cols, dtype, shift_ms, rate = struct.unpack("<IIIfI", raw[8:REP_HEADER_SIZE])
    if dtype != _DTYPE_F32:
        raise DataError(f"unsupported dtype code {dtype} in {path}")
    frames = _read_payload(raw, REP_HEADER_SIZE, n_rows, n_cols, path)
    return frames, float(shift_ms), int(rate)


def _read_payload(raw: bytes, offset: int, n_rows: int, n_cols: int, path: Path) -> np.ndarray:
    expected = n_rows * n_cols * 4
    payload = raw[offset:]
    if len(payload) != expected:
        raise DataError(
            f"truncated tensor file {path}: expected {expected} data bytes, found {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.float32).reshape(n_rows, n_cols).copy()
