"""Binary-mask algebra, the two mask-refinement filters, and component geometry.

The two filters reproduce the published reference behaviour exactly,
including iteration order and the "second chance" pass that mutates the
running union while re-admitting deferred masks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ClassAbsent, DimMismatch, EmptyMask, EmptySet
from .tensor_io import LabelMap, MaskSet

COMBINE_THRESHOLD = 0.9
GROUNDING_THRESHOLD = 0.9
PATCH_SIZE = 64

_EIGHT_CONN = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class ComponentCrop:
    """64x64 patch with out-of-component pixels zeroed."""

    patch: np.ndarray          # (64, 64) or (64, 64, 3), float in [0, 1]
    mask: np.ndarray           # (64, 64) bool, resampled component support
    source_mask_id: int = -1
    angle: float = 0.0


def _check_dims(m1: np.ndarray, m2: np.ndarray) -> None:
    if m1.shape != m2.shape:
        raise DimMismatch(f"mask shapes differ: {m1.shape} vs {m2.shape}")


def intersect_ratio(m1: np.ndarray, m2: np.ndarray) -> float:
    """|m1 & m2| / min(|m1|, |m2|); 0 when the intersection is empty."""
    _check_dims(m1, m2)
    inter = int(np.logical_and(m1, m2).sum())
    if inter == 0:
        return 0.0
    return inter / min(int(np.count_nonzero(m1)), int(np.count_nonzero(m2)))


def _drop_empty(masks) -> list:
    return [m for m in masks if np.any(m)]


def filter_by_grounding(grounding: np.ndarray, masks: MaskSet) -> MaskSet:
    """Keep masks covered by the grounding region by more than 90% of their area."""
    kept = []
    for m in _drop_empty(masks):
        _check_dims(grounding, m)
        cover = np.logical_and(grounding, m).sum() / np.count_nonzero(m)
        if cover > GROUNDING_THRESHOLD:
            kept.append(m)
    return MaskSet(tuple(kept))


def filter_by_combine(masks: MaskSet) -> MaskSet:
    """Drop masks that are (nearly) unions of already-kept smaller masks.

    Masks are visited small-to-large; a mask is kept when its overlap ratio
    with the running union stays below 0.9. Deferred masks get a second
    chance against the final union, in deferral order.
    """
    work = _drop_empty(masks)
    if not work:
        raise EmptySet("filter_by_combine needs at least one nonempty mask")
    order = sorted(range(len(work)), key=lambda i: (int(work[i].sum()), i))
    union = np.zeros_like(work[0], dtype=bool)
    kept, deferred = [], []
    for rank, idx in enumerate(order):
        m = work[idx]
        if rank == 0 or intersect_ratio(union, m) < COMBINE_THRESHOLD:
            union |= m
            kept.append(m)
        else:
            deferred.append(m)
    for m in deferred:
        cover = np.logical_and(union, m).sum() / np.count_nonzero(m)
        if cover < COMBINE_THRESHOLD:
            union |= m
            kept.append(m)
    return MaskSet(tuple(kept))


def connected_components(label_map: LabelMap, k: int) -> MaskSet:
    """8-connected components of class k, largest first."""
    region = label_map.pixels == k
    if not region.any():
        raise ClassAbsent(f"class {k} absent from label map")
    labeled, n = ndimage.label(region, structure=_EIGHT_CONN)
    comps = [(labeled == i) for i in range(1, n + 1)]
    comps.sort(key=lambda m: -int(m.sum()))
    return MaskSet(tuple(comps))


def min_area_rect(mask: np.ndarray) -> tuple[tuple[float, float], tuple[float, float], float]:
    """Minimum-area bounding rectangle of the mask's pixel centers.

    Returns (center (x, y), (width, height), angle in degrees). Uses the
    hull-edge alignment property: the optimal rectangle shares an edge
    direction with the convex hull, so sweeping hull edges is exact.
    """
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise EmptyMask("cannot bound an empty mask")
    pts = np.stack([xs, ys], axis=1).astype(float)
    if len(pts) == 1:
        return (float(xs[0]), float(ys[0])), (1.0, 1.0), 0.0
    try:
        from scipy.spatial import ConvexHull
        hull = pts[ConvexHull(pts, qhull_options="QJ").vertices]
    except Exception:
        hull = pts  # collinear degenerate input
    best = None
    n = len(hull)
    for i in range(n):
        edge = hull[(i + 1) % n] - hull[i]
        norm = np.hypot(*edge)
        if norm < 1e-12:
            continue
        ux = edge / norm
        uy = np.array([-ux[1], ux[0]])
        px = hull @ ux
        py = hull @ uy
        w = px.max() - px.min()
        h = py.max() - py.min()
        # +1 accounts for pixel extent so degenerate lines keep unit thickness
        area = (w + 1.0) * (h + 1.0)
        if best is None or area < best[0]:
            cx = (px.max() + px.min()) / 2
            cy = (py.max() + py.min()) / 2
            center = cx * ux + cy * uy
            angle = float(np.degrees(np.arctan2(ux[1], ux[0])))
            best = (area, (float(center[0]), float(center[1])), (w + 1.0, h + 1.0), angle)
    return best[1], best[2], best[3] % 180.0


def _bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample img at float coords, zero outside; img is (H, W) or (H, W, C)."""
    h, w = img.shape[:2]
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    fx = xs - x0
    fy = ys - y0
    out_shape = xs.shape + img.shape[2:]
    acc = np.zeros(out_shape, dtype=float)
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            wgt = (fx if dx else 1 - fx) * (fy if dy else 1 - fy)
            valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            xi = np.clip(xi, 0, w - 1)
            yi = np.clip(yi, 0, h - 1)
            vals = img[yi, xi]
            if img.ndim == 3:
                wgt = wgt[..., None]
                valid = valid[..., None]
            acc += np.where(valid, wgt * vals, 0.0)
    return acc


def normalize_crop(image: np.ndarray, mask: np.ndarray, angle: float,
                   mask_id: int = -1) -> ComponentCrop:
    """Crop a component into a 64x64 patch, rotated by `angle`.

    The component's minimum-area rectangle diagonal is scaled to the patch
    diagonal, the rectangle center lands on the patch center, and pixels
    outside the (nearest-neighbour resampled) mask are zeroed.
    """
    if not np.any(mask):
        raise EmptyMask("cannot crop an empty mask")
    (cx, cy), (rw, rh), _ = min_area_rect(mask)
    scale = (PATCH_SIZE * np.sqrt(2.0)) / np.hypot(rw, rh)
    theta = np.radians(angle)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    # inverse map: patch coords -> source coords
    py, px = np.mgrid[0:PATCH_SIZE, 0:PATCH_SIZE].astype(float)
    dx = (px - (PATCH_SIZE - 1) / 2) / scale
    dy = (py - (PATCH_SIZE - 1) / 2) / scale
    sx = cx + cos_t * dx + sin_t * dy
    sy = cy - sin_t * dx + cos_t * dy
    # nearest-neighbour support lookup
    xi = np.rint(sx).astype(int)
    yi = np.rint(sy).astype(int)
    h, w = mask.shape
    inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    support = np.zeros((PATCH_SIZE, PATCH_SIZE), dtype=bool)
    support[inside] = mask[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)][inside]
    img = np.asarray(image, dtype=float)
    patch = _bilinear_sample(img, sx, sy)
    if patch.ndim == 3:
        patch *= support[..., None]
    else:
        patch *= support
    return ComponentCrop(patch=patch, mask=support, source_mask_id=mask_id, angle=angle)


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Morphological hole fill of a single component mask."""
    return ndimage.binary_fill_holes(mask)
