"""Reader and writer for the IDX tensor format used by the MNIST files.

Layout: a big-endian 32-bit magic ``0x0000TTNN`` (TT = element type, NN =
number of dimensions), NN big-endian 32-bit dimension sizes, then the payload
in row-major order.  Only unsigned bytes (TT = 0x08) are supported.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
UBYTE = 0x08
MAX_ELEMENTS = 2 ** 31 - 1


class IdxError(ValueError):
    kind = "idx error"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{self.kind} at byte offset {offset}: {message}")
        self.offset = offset


class BadMagic(IdxError):
    kind = "bad magic"


class TruncatedPayload(IdxError):
    kind = "truncated"


class DimensionOverflow(IdxError):
    kind = "dimension overflow"


def parse_idx(buf: bytes, expected_magic: int | None = None) -> np.ndarray:
    if len(buf) < 4:
        raise TruncatedPayload(f"need 4 magic bytes, have {len(buf)}", len(buf))
    (magic,) = struct.unpack_from(">I", buf, 0)
    ndim = magic & 0xFF
    if magic >> 16 != 0 or (magic >> 8) & 0xFF != UBYTE or ndim == 0:
        raise BadMagic(f"unsupported magic 0x{magic:08x}", 0)
    if expected_magic is not None and magic != expected_magic:
        raise BadMagic(f"expected 0x{expected_magic:08x}, got 0x{magic:08x}", 0)
    if len(buf) < 4 + 4 * ndim:
        raise TruncatedPayload(f"header declares {ndim} dimensions", len(buf))
    dims = struct.unpack_from(f">{ndim}I", buf, 4)
    total = 1
    for k, d in enumerate(dims):
        total *= d
        if total > MAX_ELEMENTS:
            raise DimensionOverflow(f"element count exceeds {MAX_ELEMENTS} at dimension {k}", 4 + 4 * k)
    start = 4 + 4 * ndim
    if len(buf) - start < total:
        raise TruncatedPayload(f"payload has {len(buf) - start} of {total} bytes", len(buf))
    return np.frombuffer(buf, dtype=np.uint8, count=total, offset=start).reshape(dims).copy()


def encode_idx(arr) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise TypeError("only uint8 tensors can be encoded")
    if arr.ndim == 0 or arr.ndim > 255:
        raise ValueError("tensor must have between 1 and 255 dimensions")
    header = struct.pack(f">I{arr.ndim}I", (UBYTE << 8) | arr.ndim, *arr.shape)
    return header + np.ascontiguousarray(arr).tobytes()


def write_idx(path, arr) -> None:
    Path(path).write_bytes(encode_idx(arr))


def read_idx_array(path, expected_magic: int | None = None) -> np.ndarray:
    return parse_idx(Path(path).read_bytes(), expected_magic)


def read_idx_labels(path) -> np.ndarray:
    return read_idx_array(path, LABEL_MAGIC)


@dataclass(frozen=True)
class MnistBatch:
    """Preprocessed images, one per column, with the preprocessing record."""

    images: np.ndarray   # (784, m)
    mean: np.ndarray     # (m,) mean intensity subtracted from each image
    r: float
    count: int
    offset: int
    labels: np.ndarray | None = None


def preprocess(raw, r: float, count: int | None = None, offset: int = 0, labels=None) -> MnistBatch:
    """Select images, center each on its own mean intensity, rescale each to norm r.

    Per-image centering keeps the selection linearly independent; subtracting
    the per-pixel mean of the selection would make the columns sum to zero.
    """
    raw = np.asarray(raw)
    if raw.ndim < 2:
        raise ValueError("expected an image tensor with a leading image axis")
    m = raw.shape[0] - offset if count is None else count
    if offset < 0 or m < 1 or offset + m > raw.shape[0]:
        raise ValueError(f"cannot take {m} images at offset {offset} from {raw.shape[0]}")
    X = raw[offset:offset + m].reshape(m, -1).astype(np.float64).T
    mean = X.mean(axis=0)
    X = X - mean[None, :]
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise ValueError("a constant image cannot be centered and rescaled")
    X *= r / norms
    lab = None if labels is None else np.asarray(labels)[offset:offset + m].copy()
    return MnistBatch(X, mean, float(r), m, offset, lab)


def read_idx(path, r: float = 1.0, count: int | None = None, offset: int = 0,
             labels_path=None) -> MnistBatch:
    raw = read_idx_array(path, IMAGE_MAGIC)
    labels = read_idx_labels(labels_path) if labels_path is not None else None
    return preprocess(raw, r, count, offset, labels)
