"""Bit-exact tensor and mask I/O.

Reads and writes a deliberately narrow subset of the NPY v1.0 format:
little-endian, C-order, rank-3 float tensors and rank-2 unsigned-integer
masks. The subset is implemented by hand so that malformed files fail
loudly with typed errors instead of being silently coerced.

NPY v1.0 layout: magic ``\\x93NUMPY``, version bytes ``\\x01\\x00``, a
little-endian uint16 header length, then an ASCII dict literal with keys
'descr', 'fortran_order' and 'shape', space-padded so that the total
preamble is a multiple of 64 bytes and terminated by ``\\n``. Raw array
bytes follow.

PGM export (binary P5, maxval 255) is offered for eyeballing masks.
"""

from __future__ import annotations

import ast
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, InvalidValue, IoError, UnsupportedLayout

_MAGIC = b"\x93NUMPY"
_VERSION = bytes((1, 0))
_ALIGN = 64

_TENSOR_DESCRS = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}
_MASK_DESCRS = {"|u1": np.dtype("u1"), "<u1": np.dtype("u1"), "<u4": np.dtype("<u4")}


@dataclass(frozen=True)
class FeatureMap:
    """H x W x C patch-feature tensor, float64, C-order.

    Element (h, w, c) lives at data[h, w, c]; the flattened layout is
    data[(h*W + w)*C + c].
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise DimensionError(f"feature map must be rank 3, got rank {arr.ndim}")
        if min(arr.shape) < 1:
            raise DimensionError(f"feature map dims must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidValue("feature map contains NaN or Inf")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class LabelMask:
    """H x W mask of nonnegative integer labels; 0 is background."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise DimensionError(f"mask must be rank 2, got rank {arr.ndim}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise FormatError(f"mask dtype must be integer, got {arr.dtype}")
        if arr.size and int(arr.min()) < 0:
            raise FormatError("mask labels must be nonnegative")
        arr = np.ascontiguousarray(arr.astype(np.int64))
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def label_values(self) -> np.ndarray:
        """Sorted distinct labels present in the mask."""
        return np.unique(self.labels)

    def canonicalized(self) -> "LabelMask":
        """Relabel so the label set is {0..k} with no gaps.

        0 stays 0; nonzero labels are renumbered 1..k in ascending order
        of their original value.
        """
        out = np.zeros_like(self.labels)
        nonzero = [v for v in self.label_values() if v != 0]
        for new, old in enumerate(nonzero, start=1):
            out[self.labels == old] = new
        return LabelMask(out)


def _build_header(descr: str, shape: tuple[int, ...]) -> bytes:
    shape_repr = "(" + ", ".join(str(int(s)) for s in shape) + ("," if len(shape) == 1 else "") + ")"
    body = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_repr}, }}"
    preamble = len(_MAGIC) + len(_VERSION) + 2  # magic + version + uint16 length
    total = preamble + len(body) + 1  # trailing newline
    pad = (-total) % _ALIGN
    header = body + " " * pad + "\n"
    return _MAGIC + _VERSION + struct.pack("<H", len(header)) + header.encode("latin1")


def _parse_header(raw: bytes, path: str) -> tuple[dict, int]:
    """Validate preamble, return (header dict, payload offset)."""
    if len(raw) < 10 or raw[:6] != _MAGIC:
        raise FormatError(f"{path}: not an NPY file (bad magic)")
    if raw[6:8] != _VERSION:
        raise FormatError(f"{path}: unsupported NPY version {raw[6]}.{raw[7]} (only 1.0 is read)")
    (hlen,) = struct.unpack("<H", raw[8:10])
    end = 10 + hlen
    if len(raw) < end or not raw[10:end].endswith(b"\n"):
        raise FormatError(f"{path}: truncated or unterminated NPY header")
    try:
        header = ast.literal_eval(raw[10:end].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"{path}: malformed NPY header dict: {exc}") from exc
    if not isinstance(header, dict) or not {"descr", "fortran_order", "shape"} <= set(header):
        raise FormatError(f"{path}: NPY header missing required keys")
    return header, end


def _read_npy(path: str | Path, allowed: dict[str, np.dtype], rank: int) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    header, offset = _parse_header(raw, str(path))
    descr = header["descr"]
    if header["fortran_order"]:
        raise UnsupportedLayout(f"{path}: Fortran-order arrays are not supported")
    shape = header["shape"]
    if not isinstance(shape, tuple) or len(shape) != rank:
        raise UnsupportedLayout(f"{path}: expected rank {rank}, got shape {shape!r}")
    if descr not in allowed:
        raise FormatError(f"{path}: dtype {descr!r} not accepted here (allowed: {sorted(allowed)})")
    dtype = allowed[descr]
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    payload = raw[offset:]
    if len(payload) != count * dtype.itemsize:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {count * dtype.itemsize}"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    return arr


def load_tensor(path: str | Path) -> FeatureMap:
    """Read a rank-3 float32/float64 NPY file as a float64 FeatureMap."""
    arr = _read_npy(path, _TENSOR_DESCRS, rank=3)
    arr = arr.astype(np.float64)  # widens f4; copies out of the read-only buffer
    if not np.all(np.isfinite(arr)):
        raise InvalidValue(f"{path}: tensor contains NaN or Inf")
    return FeatureMap(arr)


def save_tensor(fm: FeatureMap, path: str | Path) -> None:
    """Write a FeatureMap as NPY v1.0, dtype <f8, C-order."""
    out = _build_header("<f8", fm.data.shape) + fm.data.astype("<f8").tobytes(order="C")
    try:
        Path(path).write_bytes(out)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_mask(path: str | Path) -> LabelMask:
    """Read a rank-2 u1/u4 NPY file as a LabelMask."""
    arr = _read_npy(path, _MASK_DESCRS, rank=2)
    return LabelMask(arr.astype(np.int64))


def save_mask(mask: LabelMask, path: str | Path) -> None:
    """Write a LabelMask; '.pgm' exports binary P5, anything else NPY <u4."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        if int(mask.labels.max(initial=0)) > 255:
            raise FormatError("PGM export requires labels <= 255")
        body = mask.labels.astype("u1").tobytes(order="C")
        out = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii") + body
    else:
        out = _build_header("<u4", mask.labels.shape) + mask.labels.astype("<u4").tobytes(order="C")
    try:
        path.write_bytes(out)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def save_matrix(values: np.ndarray, path: str | Path) -> None:
    """Debug export of a rank-2 float64 matrix (affinities, eigenvectors)."""
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
    if arr.ndim != 2:
        raise DimensionError(f"matrix export expects rank 2, got rank {arr.ndim}")
    out = _build_header("<f8", arr.shape) + arr.tobytes(order="C")
    try:
        Path(path).write_bytes(out)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
