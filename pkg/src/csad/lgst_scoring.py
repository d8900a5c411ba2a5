"""Student-teacher difference maps and their reduction to image scores.

Operates purely on supplied feature tensors; no network runs here. The
local head is compared against the teacher, the global head against the
global student, and the two maps average into the combined map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, EmptyInput
from .tensor_io import FeatureTensor


@dataclass(frozen=True)
class LgstInputs:
    teacher: FeatureTensor
    local_head_local: FeatureTensor
    local_head_global: FeatureTensor
    global_student: FeatureTensor

    def __post_init__(self):
        dims = self.teacher.dims
        for name in ("local_head_local", "local_head_global", "global_student"):
            if getattr(self, name).dims != dims:
                raise DimMismatch(f"{name} dims {getattr(self, name).dims} != teacher {dims}")


def difference_map(a: FeatureTensor, b: FeatureTensor) -> np.ndarray:
    """Per-position channel-mean squared difference, shape (H, W)."""
    if a.dims != b.dims:
        raise DimMismatch(f"tensor dims differ: {a.dims} vs {b.dims}")
    d = a.data.astype(np.float64) - b.data.astype(np.float64)
    return np.mean(d * d, axis=0)


def lgst_maps(inp: LgstInputs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(local, global, combined) anomaly maps; combined is their mean."""
    local = difference_map(inp.teacher, inp.local_head_local)
    global_ = difference_map(inp.global_student, inp.local_head_global)
    return local, global_, (local + global_) / 2.0


def map_to_score(m: np.ndarray, reduction: str = "max", top_fraction: float = 0.001) -> float:
    """Reduce an anomaly map to one scalar: max, or mean of the top fraction."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        raise EmptyInput("cannot score an empty map")
    if reduction == "max":
        return float(m.max())
    if reduction == "topk":
        k = max(1, int(round(top_fraction * m.size)))
        flat = np.sort(m.ravel())
        return float(flat[-k:].mean())
    raise ValueError(f"unknown reduction {reduction!r}")


def upsample_bilinear(m: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize used to bring feature-resolution maps to image size."""
    m = np.asarray(m, dtype=float)
    h, w = m.shape
    if (h, w) == (out_h, out_w):
        return m.copy()
    ys = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = m[y0][:, x0] * (1 - fx) + m[y0][:, x1] * fx
    bot = m[y1][:, x0] * (1 - fx) + m[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy
