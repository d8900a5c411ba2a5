"""Anomaly-map construction from histogram discrepancies plus branch merging.

Histogram excess (extra components) spreads over the offending class's
pixels in the test map; deficit (missing components) spreads over that
class's region in the training map with the closest class histogram. Spread
is uniform per pixel so each discrepancy's mass is conserved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimMismatch, NoTrainingMaps
from .histogram_scoring import _cell_slices, class_histogram
from .tensor_io import LabelMap, write_pgm16

ZERO_TOL = 1e-12


@dataclass(frozen=True)
class LocalizationResult:
    patch_hist_map: np.ndarray
    lgst_map: np.ndarray
    merged: np.ndarray


def nearest_training_map(test_map: LabelMap, train_maps, n_cls: int) -> LabelMap:
    """Training map minimizing L1 class-histogram distance to the test map."""
    if not train_maps:
        raise NoTrainingMaps("need at least one retained training map")
    th = class_histogram(test_map, n_cls)
    dists = [np.abs(class_histogram(m, n_cls) - th).sum() for m in train_maps]
    return train_maps[int(np.argmin(dists))]


def histogram_anomaly_map(test_map: LabelMap, bank_means: dict, train_maps,
                          patch_sizes, n_cls: int) -> np.ndarray:
    """Sum over patch sizes of per-cell excess/deficit maps.

    `bank_means` maps patch size -> fitted mean patch-histogram vector laid
    out row-major by cell, n_cls entries per cell.
    """
    if not train_maps:
        raise NoTrainingMaps("need at least one retained training map")
    h, w = test_map.pixels.shape
    out = np.zeros((h, w), dtype=float)
    ref = nearest_training_map(test_map, train_maps, n_cls)
    for s in patch_sizes:
        mean_vec = np.asarray(bank_means[s], dtype=float)
        cell_idx = 0
        for rs in _cell_slices(h, s):
            for cs in _cell_slices(w, s):
                mu_cell = mean_vec[cell_idx * n_cls:(cell_idx + 1) * n_cls]
                cell_idx += 1
                cell = test_map.pixels[rs, cs]
                counts = np.bincount(cell.ravel(), minlength=n_cls + 1)
                hist = counts[1:n_cls + 1] / cell.size
                diff = hist - mu_cell
                for k in range(1, n_cls + 1):
                    d = diff[k - 1]
                    if abs(d) <= ZERO_TOL:
                        continue
                    if d > 0:
                        region = cell == k
                        target = out[rs, cs]
                    else:
                        region = ref.pixels[rs, cs] == k
                        target = out[rs, cs]
                    npx = int(region.sum())
                    if npx:
                        target[region] += abs(d) / npx
    return out


def merge_maps(patch_hist_map: np.ndarray, lgst_map: np.ndarray,
               sigma_patch_hist: float = 1.0, sigma_lgst: float = 1.0) -> np.ndarray:
    """Per-pixel sum of the branch maps, each scaled by its calibration sigma."""
    if patch_hist_map.shape != lgst_map.shape:
        raise DimMismatch(
            f"map shapes differ: {patch_hist_map.shape} vs {lgst_map.shape}")
    return patch_hist_map / sigma_patch_hist + lgst_map / sigma_lgst


def write_anomaly_map(m: np.ndarray, path) -> None:
    """16-bit PGM plus a JSON sidecar recording the value range."""
    path = Path(path)
    lo, hi = float(m.min()), float(m.max())
    scale = 65535.0 / (hi - lo) if hi > lo else 0.0
    quant = np.round((m - lo) * scale).astype(np.uint16)
    write_pgm16(quant, path)
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps({"min": lo, "max": hi}, indent=2))


def read_anomaly_map(path) -> np.ndarray:
    from .tensor_io import read_pgm16
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    quant = read_pgm16(path).astype(float)
    if meta["max"] > meta["min"]:
        return meta["min"] + quant * (meta["max"] - meta["min"]) / 65535.0
    return np.full(quant.shape, meta["min"])
