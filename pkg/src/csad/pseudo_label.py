"""Semantic pseudo-label generation and the synthetic-component augmentation.

Pipeline: refined component masks -> rotation-invariant descriptors ->
mean-shift clusters -> small clusters dropped -> per-image label maps ->
histogram-based quality filtering into labeled/unlabeled splits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import clustering, mask_ops
from .clustering import (ClusterAssignment, HdbscanConfig, MeanShiftConfig, NOISE,
                         alpha_filter, hdbscan, largest_cluster_filter, mean_shift)
from .component_features import (builtin_descriptor, rotation_invariant_descriptor)
from .errors import AllNoise, NoComponent, NoSurvivingClusters, NoValidPlacement
from .histogram_scoring import class_histogram
from .tensor_io import LabelMap, MaskSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabelGenConfig:
    mode: str = "coarse"                 # "fine" applies the mask-refinement filters
    alpha: int | None = None             # default: ceil(n_images / 2)
    meanshift: MeanShiftConfig = field(default_factory=lambda: MeanShiftConfig(bandwidth=0.5))
    rotations: int = 8
    fill_holes: bool = True
    feature_fn: object = None            # defaults to the builtin descriptor


@dataclass(frozen=True)
class DatasetSplit:
    labeled: list          # (image id, LabelMap)
    unlabeled: list        # image ids
    n_cls: int


@dataclass(frozen=True)
class LsaConfig:
    min_displacement: float = 0.1        # fraction of max(W, H)
    components_per_image: int = 1
    max_attempts: int = 100

    def __post_init__(self):
        if not (0 < self.min_displacement < 1):
            raise ValueError("min_displacement must be in (0, 1)")


def refine_masks(raw: MaskSet, grounding: np.ndarray | None, mode: str) -> MaskSet:
    """Mode-dependent refinement: fine-grained filters proposals, coarse passes through."""
    if mode != "fine":
        return raw
    ms = raw
    if grounding is not None:
        ms = mask_ops.filter_by_grounding(grounding, ms)
    if len(ms) == 0 or not any(m.any() for m in ms):
        return MaskSet(())
    return mask_ops.filter_by_combine(ms)


def generate_labels(images, refined_masks, cfg: LabelGenConfig):
    """Cluster components across images into classes; paint per-image label maps.

    Returns (n_cls, [LabelMap]). Overlapping components paint smaller areas
    on top so fine parts survive coarse ones.
    """
    feature_fn = cfg.feature_fn or builtin_descriptor
    descriptors = []
    owners = []      # (image index, mask) per descriptor
    for img_idx, (image, masks) in enumerate(zip(images, refined_masks)):
        for m_idx, mask in enumerate(masks):
            d = rotation_invariant_descriptor(image, mask, feature_fn,
                                              rotations=cfg.rotations,
                                              component_id=m_idx)
            descriptors.append(d.vector)
            owners.append((img_idx, mask))
    alpha = cfg.alpha if cfg.alpha is not None else -(-len(images) // 2)
    assignment = alpha_filter(mean_shift(descriptors, cfg.meanshift), alpha)
    if not assignment.sizes:
        raise NoSurvivingClusters(
            f"every cluster fell below alpha={alpha}; lower alpha or add images")
    n_cls = max(assignment.sizes)

    shape = images[0].shape[:2]
    maps = [np.zeros(shape, dtype=np.uint8) for _ in images]
    # paint large components first so smaller ones end up on top
    order = sorted(range(len(owners)), key=lambda i: -int(owners[i][1].sum()))
    for i in order:
        label = assignment.labels[i]
        if label == NOISE:
            continue
        img_idx, mask = owners[i]
        paint = mask_ops.fill_holes(mask) if cfg.fill_holes else mask
        maps[img_idx][paint] = label
    return n_cls, [LabelMap(m) for m in maps]


def filter_label_maps(maps: dict, n_cls: int,
                      cfg: HdbscanConfig | None = None) -> DatasetSplit:
    """Split label maps into a consistent labeled set and an unlabeled rest.

    Density clustering on class histograms; only members of the largest
    cluster keep their labels. If everything lands in noise the filter
    degrades to all-labeled rather than stalling the pipeline.
    """
    ids = list(maps)
    hists = [class_histogram(maps[i], n_cls) for i in ids]
    cfg = cfg or HdbscanConfig.for_n(len(ids))
    try:
        assignment = hdbscan(hists, cfg)
        keep = set(largest_cluster_filter(assignment).tolist())
    except AllNoise:
        log.warning("label-map filtering found no dense cluster; keeping all %d maps", len(ids))
        keep = set(range(len(ids)))
    labeled = [(ids[i], maps[ids[i]]) for i in range(len(ids)) if i in keep]
    unlabeled = [ids[i] for i in range(len(ids)) if i not in keep]
    return DatasetSplit(labeled=labeled, unlabeled=unlabeled, n_cls=n_cls)


def lsa_augment(image, label_map: LabelMap, source_image, source_map: LabelMap,
                cfg: LsaConfig, rng_seed: int):
    """Paste a random source component far from its original position.

    Both the image pixels and the label map are overwritten inside the pasted
    region; everything outside it is untouched. Deterministic per seed.
    """
    rng = np.random.default_rng(rng_seed)
    out_img = np.array(image, copy=True)
    out_pix = np.array(label_map.pixels, copy=True)
    h, w = out_pix.shape
    min_disp = cfg.min_displacement * max(w, h)

    classes = [k for k in np.unique(source_map.pixels) if k != 0]
    if not classes:
        raise NoComponent("source label map has no non-background component")
    for _ in range(cfg.components_per_image):
        k = int(rng.choice(classes))
        comps = mask_ops.connected_components(source_map, k)
        comp = comps[int(rng.integers(len(comps)))]
        ys, xs = np.nonzero(comp)
        cy, cx = ys.mean(), xs.mean()
        top, left = ys.min(), xs.min()
        ch, cw = ys.max() - top + 1, xs.max() - left + 1
        if ch > h or cw > w:
            raise NoValidPlacement("component larger than the target image")
        local = comp[top:top + ch, left:left + cw]
        placed = False
        for _ in range(cfg.max_attempts):
            ny = int(rng.integers(0, h - ch + 1))
            nx = int(rng.integers(0, w - cw + 1))
            new_cy = ny + (cy - top)
            new_cx = nx + (cx - left)
            if np.hypot(new_cy - cy, new_cx - cx) >= min_disp:
                placed = True
                break
        if not placed:
            raise NoValidPlacement(
                f"no placement with displacement >= {min_disp:.1f}px in "
                f"{cfg.max_attempts} attempts")
        region_img = out_img[ny:ny + ch, nx:nx + cw]
        src_img = np.asarray(source_image)[top:top + ch, left:left + cw]
        region_img[local] = src_img[local]
        out_pix[ny:ny + ch, nx:nx + cw][local] = k
    return out_img, LabelMap(out_pix)
