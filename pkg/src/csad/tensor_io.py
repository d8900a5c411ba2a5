"""Interchange formats: CSTF float tensors, PGM label maps, mask-set directories.

These files are the contract between the core and any external feature
extractor, so the layout is deliberately dumb: fixed little-endian headers,
raw payloads, no compression.

CSTF layout: magic ``CSTF`` | u32 version=1 | u32 ndim | ndim*u32 dims |
raw float32 payload, everything little-endian.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, DimMismatch, NonFinite, TooManyClasses, UnsupportedFormat

MAGIC = b"CSTF"
VERSION = 1


@dataclass(frozen=True)
class FeatureTensor:
    """Dense float32 tensor; scoring code expects (C, H, W) order."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if not np.isfinite(arr).all():
            raise NonFinite("tensor contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.data.shape)


def write_tensor(t: FeatureTensor, path) -> None:
    dims = t.dims
    header = MAGIC + struct.pack("<II", VERSION, len(dims))
    header += struct.pack(f"<{len(dims)}I", *dims)
    Path(path).write_bytes(header + t.data.astype("<f4").tobytes())


def read_tensor(path) -> FeatureTensor:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise BadMagic(f"{path}: expected CSTF magic")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise UnsupportedFormat(f"{path}: unsupported version {version}")
    dims = struct.unpack_from(f"<{ndim}I", raw, 12)
    payload = raw[12 + 4 * ndim:]
    expected = int(np.prod(dims)) if dims else 0
    if len(payload) != 4 * expected:
        raise DimMismatch(
            f"{path}: payload holds {len(payload) // 4} floats, dims require {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(dims)
    if not np.isfinite(data).all():
        raise NonFinite(f"{path}: non-finite payload")
    return FeatureTensor(data.copy())


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class indices; 0 is background."""

    pixels: np.ndarray  # uint8, shape (H, W)

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimMismatch("label map must be 2-D and nonempty")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise TooManyClasses("class indices must fit in [0, 255]")
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "pixels", np.ascontiguousarray(arr))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def _read_pgm_tokens(raw: bytes, count: int) -> tuple[list[int], int]:
    """Parse `count` whitespace/comment-separated ASCII integers, return values and offset."""
    vals = []
    i = 0
    while len(vals) < count:
        if i >= len(raw):
            raise UnsupportedFormat("truncated PGM header")
        c = raw[i:i + 1]
        if c == b"#":
            while i < len(raw) and raw[i:i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(raw) and not raw[j:j + 1].isspace():
                j += 1
            tok = raw[i:j]
            if not tok.isdigit():
                raise UnsupportedFormat(f"bad PGM token {tok!r}")
            vals.append(int(tok))
            i = j
    return vals, i + 1  # single whitespace byte after maxval


def write_label_map(m: LabelMap, path) -> None:
    header = f"P5\n{m.width} {m.height}\n255\n".encode()
    Path(path).write_bytes(header + m.pixels.tobytes())


def read_label_map(path) -> LabelMap:
    raw = Path(path).read_bytes()
    if raw[:2] != b"P5":
        raise UnsupportedFormat(f"{path}: not a binary PGM")
    (w, h, maxval), off = _read_pgm_tokens(raw[2:], 3)
    if maxval != 255:
        raise UnsupportedFormat(f"{path}: label maps must be 8-bit (maxval {maxval})")
    payload = raw[2 + off:2 + off + w * h]
    if len(payload) != w * h:
        raise DimMismatch(f"{path}: expected {w * h} pixels, got {len(payload)}")
    return LabelMap(np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy())


def write_pgm16(values: np.ndarray, path) -> None:
    """16-bit PGM, big-endian samples per the format; used for anomaly maps."""
    h, w = values.shape
    header = f"P5\n{w} {h}\n65535\n".encode()
    Path(path).write_bytes(header + values.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:2] != b"P5":
        raise UnsupportedFormat(f"{path}: not a binary PGM")
    (w, h, maxval), off = _read_pgm_tokens(raw[2:], 3)
    if maxval != 65535:
        raise UnsupportedFormat(f"{path}: expected 16-bit PGM")
    payload = raw[2 + off:2 + off + 2 * w * h]
    if len(payload) != 2 * w * h:
        raise DimMismatch(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype=">u2").reshape(h, w).astype(np.uint16)


@dataclass(frozen=True)
class MaskSet:
    """Ordered stack of same-size binary masks; masks may overlap."""

    masks: tuple  # of np.ndarray(bool, (H, W))

    def __post_init__(self):
        norm = []
        shape = None
        for m in self.masks:
            arr = np.asarray(m).astype(bool)
            if shape is None:
                shape = arr.shape
            elif arr.shape != shape:
                raise DimMismatch("all masks in a set must share dimensions")
            norm.append(arr)
        object.__setattr__(self, "masks", tuple(norm))

    def __len__(self):
        return len(self.masks)

    def __iter__(self):
        return iter(self.masks)

    def __getitem__(self, i):
        return self.masks[i]

    @property
    def shape(self):
        return self.masks[0].shape if self.masks else None


def write_mask_set(ms: MaskSet, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, m in enumerate(ms):
        name = f"mask_{i:04d}.pgm"
        write_label_map(LabelMap(m.astype(np.uint8)), directory / name)
        names.append(name)
    h, w = ms.shape if ms.shape else (0, 0)
    manifest = {"width": w, "height": h, "masks": names}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))


def read_mask_set(directory) -> MaskSet:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    masks = []
    for name in manifest["masks"]:
        lm = read_label_map(directory / name)
        if (lm.width, lm.height) != (manifest["width"], manifest["height"]):
            raise DimMismatch(f"{name}: dimensions disagree with manifest")
        masks.append(lm.pixels > 0)
    return MaskSet(tuple(masks))
