"""Dense fields, binary masks and their on-disk formats.

Masks are ``uint8`` arrays with values in {0, 1}; scalar fields are 2-D
``float64`` arrays; feature maps are ``(C, H, W)`` ``float64`` arrays.
The helpers here validate those conventions and handle the two file
formats used throughout the package:

* TensorFile: ``b"GPTENSOR"``, dtype byte (0=f64, 1=u8), ndim byte,
  ``ndim`` little-endian u64 extents, then the little-endian row-major
  payload.
* PGM: binary ``P5`` with maxval 255.
"""

from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DimMismatch,
    IoFailure,
    NonBinaryMask,
    NonFinite,
    NotP5,
    ShapeMismatch,
    TooSmall,
    TruncatedPayload,
    ZeroArea,
)

MAGIC = b"GPTENSOR"
DTYPE_F64 = 0
DTYPE_U8 = 1
_DTYPES = {DTYPE_F64: np.dtype("<f8"), DTYPE_U8: np.dtype("u1")}
HEADER_FIXED = 10
FEATURE_NORM_CAP = 1e6


def as_mask(a, min_size: int = 1) -> np.ndarray:
    """Validate and return ``a`` as a 2-D uint8 {0,1} mask."""
    arr = np.asarray(a)
    if arr.ndim != 2:
        raise DimMismatch(f"mask must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < min_size or arr.shape[1] < min_size:
        raise TooSmall(f"mask {arr.shape} smaller than {min_size}x{min_size}")
    if arr.dtype == bool:
        return arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise NonBinaryMask("mask values must be 0 or 1")
    return arr.astype(np.uint8)


def as_field(a, min_size: int = 1) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimMismatch(f"scalar field must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < min_size or arr.shape[1] < min_size:
        raise TooSmall(f"field {arr.shape} smaller than {min_size}x{min_size}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite("scalar field contains NaN or Inf")
    return arr


def as_features(a, norm_cap: float = FEATURE_NORM_CAP) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 3:
        raise DimMismatch(f"feature map must be (C, H, W), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite("feature map contains NaN or Inf")
    if arr.size and np.sqrt((arr**2).sum(axis=0)).max() > norm_cap:
        raise NonFinite(f"per-pixel feature norm exceeds cap {norm_cap:g}")
    return arr


def check_same_shape(*arrays: np.ndarray) -> tuple[int, ...]:
    shape = np.shape(arrays[0])
    for a in arrays[1:]:
        if np.shape(a) != shape:
            raise ShapeMismatch(f"shape {np.shape(a)} != {shape}")
    return shape


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file in the destination directory, then rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def encode_tensor(t) -> bytes:
    arr = np.asarray(t)
    if arr.ndim < 1 or arr.ndim > 4:
        raise DimMismatch(f"tensor ndim must be 1..4, got {arr.ndim}")
    if arr.dtype in (np.uint8, np.bool_):
        code = DTYPE_U8
        arr = arr.astype(np.uint8)
        if not np.all(arr <= 1):
            raise NonBinaryMask("u8 tensors must be binary masks")
    else:
        code = DTYPE_F64
        arr = arr.astype("<f8")
        if not np.all(np.isfinite(arr)):
            raise NonFinite("tensor contains NaN or Inf")
    header = MAGIC + bytes([code, arr.ndim])
    header += np.asarray(arr.shape, dtype="<u8").tobytes()
    return header + np.ascontiguousarray(arr).tobytes()


def decode_tensor(data: bytes) -> np.ndarray:
    if len(data) < HEADER_FIXED or data[:8] != MAGIC:
        raise BadMagic("missing GPTENSOR magic tag")
    code, ndim = data[8], data[9]
    if code not in _DTYPES:
        raise DimMismatch(f"unknown dtype code {code}")
    if ndim < 1 or ndim > 4:
        raise DimMismatch(f"ndim must be 1..4, got {ndim}")
    dims_end = HEADER_FIXED + 8 * ndim
    if len(data) < dims_end:
        raise TruncatedPayload("header truncated")
    dims = tuple(int(d) for d in np.frombuffer(data[HEADER_FIXED:dims_end], dtype="<u8"))
    dtype = _DTYPES[code]
    expected = int(np.prod(dims)) * dtype.itemsize
    payload = data[dims_end:]
    if len(payload) < expected:
        raise TruncatedPayload(f"payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise DimMismatch(f"payload has {len(payload)} bytes, header implies {expected}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
    if code == DTYPE_U8 and not np.all(arr <= 1):
        raise NonBinaryMask("u8 tensor holds values other than 0/1")
    if code == DTYPE_F64:
        arr = arr.astype(np.float64)
    return arr


def write_tensor(t, path) -> None:
    atomic_write_bytes(path, encode_tensor(t))


def read_tensor(path) -> np.ndarray:
    """Read a TensorFile; u8 payloads come back as masks, f64 as float arrays."""
    with open(path, "rb") as fh:
        data = fh.read()
    return decode_tensor(data)


_PGM_HEADER = re.compile(rb"^P5(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def _parse_pgm(data: bytes) -> np.ndarray:
    if not data.startswith(b"P5"):
        raise NotP5("not a binary P5 PGM")
    m = _PGM_HEADER.match(data)
    if m is None:
        raise NotP5("malformed P5 header")
    w, h, maxval = (int(g) for g in m.groups())
    if w == 0 or h == 0:
        raise ZeroArea("PGM has zero width or height")
    if maxval != 255:
        raise NotP5(f"maxval must be 255, got {maxval}")
    body = data[m.end():]
    if len(body) < w * h:
        raise TruncatedPayload("PGM pixel data truncated")
    return np.frombuffer(body[: w * h], dtype=np.uint8).reshape(h, w)


def read_pgm(path) -> np.ndarray:
    """Read a P5 PGM as a mask (pixels >= 128 become 1)."""
    with open(path, "rb") as fh:
        img = _parse_pgm(fh.read())
    return (img >= 128).astype(np.uint8)


def read_pgm_image(path) -> np.ndarray:
    """Read a P5 PGM as an intensity field in [0, 1]."""
    with open(path, "rb") as fh:
        img = _parse_pgm(fh.read())
    return img.astype(np.float64) / 255.0


def pgm_bytes(field) -> bytes:
    arr = np.asarray(field, dtype=np.float64)
    if arr.ndim != 2:
        raise DimMismatch("PGM output needs a 2-D field")
    h, w = arr.shape
    if h == 0 or w == 0:
        raise ZeroArea("cannot write an empty PGM")
    lo, hi = float(arr.min()), float(arr.max())
    if hi > lo:
        img = np.rint((arr - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        img = np.zeros((h, w), dtype=np.uint8)
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def write_pgm(field, path) -> None:
    """Min-max normalise to [0, 255] and write P5; constant fields become all zero."""
    atomic_write_bytes(path, pgm_bytes(field))


def load_field_or_mask(path) -> np.ndarray:
    """Load a 2-D input from either a PGM (as mask) or a TensorFile."""
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"P5":
        return read_pgm(path)
    return read_tensor(path)


def load_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"P5":
        return read_pgm_image(path)
    return read_tensor(path).astype(np.float64)


def resize_bilinear(field, out_shape: tuple[int, int]) -> np.ndarray:
    """Half-pixel-centred bilinear resampling of a 2-D field (edge clamped)."""
    arr = np.asarray(field, dtype=np.float64)
    h, w = arr.shape
    oh, ow = out_shape
    if (oh, ow) == (h, w):
        return arr.copy()

    def axis(n_in, n_out):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    r0, r1, fr = axis(h, oh)
    c0, c1, fc = axis(w, ow)
    top = arr[r0][:, c0] * (1 - fc) + arr[r0][:, c1] * fc
    bot = arr[r1][:, c0] * (1 - fc) + arr[r1][:, c1] * fc
    return top * (1 - fr[:, None]) + bot * fr[:, None]
