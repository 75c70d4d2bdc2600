"""IDX file format: the classic byte-oriented tensor container for digit data.

Supports unsigned-byte image tensors (magic 0x803) and label vectors
(magic 0x801), transparently gzipped when the path ends in .gz.
"""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

_MAGIC_UBYTE_1D = 0x801
_MAGIC_UBYTE_3D = 0x803


def _open(path: Path, mode: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def read_images(path: str | Path) -> np.ndarray:
    """(n, rows, cols) uint8 array from an IDX image file."""
    with _open(Path(path), "rb") as fh:
        magic, n, rows, cols = struct.unpack(">IIII", fh.read(16))
        if magic != _MAGIC_UBYTE_3D:
            raise ValueError(f"{path}: bad image magic 0x{magic:x}")
        data = fh.read(n * rows * cols)
    if len(data) != n * rows * cols:
        raise ValueError(f"{path}: truncated image payload")
    return np.frombuffer(data, dtype=np.uint8).reshape(n, rows, cols)


def read_labels(path: str | Path) -> np.ndarray:
    """(n,) uint8 array from an IDX label file."""
    with _open(Path(path), "rb") as fh:
        magic, n = struct.unpack(">II", fh.read(8))
        if magic != _MAGIC_UBYTE_1D:
            raise ValueError(f"{path}: bad label magic 0x{magic:x}")
        data = fh.read(n)
    if len(data) != n:
        raise ValueError(f"{path}: truncated label payload")
    return np.frombuffer(data, dtype=np.uint8)


def write_images(path: str | Path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with _open(Path(path), "wb") as fh:
        fh.write(struct.pack(">IIII", _MAGIC_UBYTE_3D, n, rows, cols))
        fh.write(images.tobytes())


def write_labels(path: str | Path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with _open(Path(path), "wb") as fh:
        fh.write(struct.pack(">II", _MAGIC_UBYTE_1D, len(labels)))
        fh.write(labels.tobytes())
