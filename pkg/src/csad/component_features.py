"""Rotation-invariant component descriptors.

A descriptor is the mean of a per-crop feature function over R uniformly
spaced rotations of the component, so any fixed-dimension feature function
(the built-in analytic one, or vectors coming from an external CNN) plugs
into the same pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import EmptyMask, FeatureDimMismatch
from .mask_ops import ComponentCrop, normalize_crop

FeatureFunction = Callable[[ComponentCrop], np.ndarray]

BUILTIN_DIM = 32
DEFAULT_ROTATIONS = 60


@dataclass(frozen=True)
class ComponentDescriptor:
    vector: np.ndarray
    component_id: int = -1
    image_id: str = ""


def rotation_invariant_descriptor(image, mask, f: FeatureFunction,
                                  rotations: int = DEFAULT_ROTATIONS,
                                  component_id: int = -1,
                                  image_id: str = "") -> ComponentDescriptor:
    """Mean of f over `rotations` uniformly spaced crop angles."""
    if not np.any(mask):
        raise EmptyMask("descriptor of an empty mask")
    if rotations < 1:
        raise ValueError("rotations must be >= 1")
    acc = None
    for r in range(rotations):
        angle = 360.0 * r / rotations
        vec = np.asarray(f(normalize_crop(image, mask, angle)), dtype=float)
        if vec.ndim != 1 or not np.isfinite(vec).all():
            raise FeatureDimMismatch("feature function must return a finite 1-D vector")
        if acc is None:
            acc = np.zeros_like(vec)
        elif acc.shape != vec.shape:
            raise FeatureDimMismatch(
                f"feature dimension changed: {acc.shape} vs {vec.shape}"
            )
        acc += vec
    return ComponentDescriptor(vector=acc / rotations,
                               component_id=component_id, image_id=image_id)


def _hu_moments(mask: np.ndarray) -> np.ndarray:
    """Seven scale/translation/rotation-invariant central moment combinations."""
    ys, xs = np.nonzero(mask)
    m00 = float(len(xs))
    if m00 == 0:
        return np.zeros(7)
    cx, cy = xs.mean(), ys.mean()
    x = xs - cx
    y = ys - cy

    def mu(p, q):
        return float(np.sum(x ** p * y ** q))

    def eta(p, q):
        return mu(p, q) / m00 ** (1 + (p + q) / 2)

    n20, n02, n11 = eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03 = eta(3, 0), eta(0, 3)
    n21, n12 = eta(2, 1), eta(1, 2)
    h1 = n20 + n02
    h2 = (n20 - n02) ** 2 + 4 * n11 ** 2
    h3 = (n30 - 3 * n12) ** 2 + (3 * n21 - n03) ** 2
    h4 = (n30 + n12) ** 2 + (n21 + n03) ** 2
    h5 = ((n30 - 3 * n12) * (n30 + n12)
          * ((n30 + n12) ** 2 - 3 * (n21 + n03) ** 2)
          + (3 * n21 - n03) * (n21 + n03)
          * (3 * (n30 + n12) ** 2 - (n21 + n03) ** 2))
    h6 = ((n20 - n02) * ((n30 + n12) ** 2 - (n21 + n03) ** 2)
          + 4 * n11 * (n30 + n12) * (n21 + n03))
    h7 = ((3 * n21 - n03) * (n30 + n12)
          * ((n30 + n12) ** 2 - 3 * (n21 + n03) ** 2)
          - (n30 - 3 * n12) * (n21 + n03)
          * (3 * (n30 + n12) ** 2 - (n21 + n03) ** 2))
    return np.array([h1, h2, h3, h4, h5, h6, h7])


def builtin_descriptor(crop: ComponentCrop) -> np.ndarray:
    """Analytic 32-dim descriptor: color histogram + area + shape moments.

    Layout: 8 bins x 3 channels of component-pixel color mass (24),
    component area fraction (1), seven moment invariants (7).
    """
    patch = crop.patch
    if patch.ndim == 2:
        patch = np.stack([patch] * 3, axis=-1)
    support = crop.mask
    # boundary pixels carry resampling mixtures; erode them out of the
    # color statistics so the descriptor stays rotation-stable
    inner = ndimage.binary_erosion(support, iterations=2)
    if not inner.any():
        inner = support
    vec = np.zeros(BUILTIN_DIM)
    n = int(inner.sum())
    if n > 0:
        vals = np.clip(patch[inner], 0.0, 1.0)
        for c in range(3):
            hist, _ = np.histogram(vals[:, c], bins=8, range=(0.0, 1.0))
            vec[c * 8:(c + 1) * 8] = hist / n
    vec[24] = n / support.size
    vec[25:32] = _hu_moments(support)
    return vec
