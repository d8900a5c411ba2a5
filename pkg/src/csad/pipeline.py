"""Fit/score/localize glue over a synthetic or externally supplied dataset.

A dataset directory follows the generator layout (images/, labels/,
tensors/, manifest.json); label maps may come from the oracle segmenter or
from the pseudo-label stage.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from . import fusion, histogram_scoring as hs, localization, lgst_scoring
from .errors import TooFewSamples
from .model_store import Model, save_model
from .tensor_io import LabelMap, read_label_map, read_tensor

log = logging.getLogger(__name__)

VAL_FRACTION = 0.2


def _read_tensor_manifest(dataset_dir: Path) -> dict:
    path = dataset_dir / "tensors" / "manifest.json"
    return json.loads(path.read_text()) if path.exists() else {}


def load_lgst_inputs(dataset_dir, image_id: str) -> lgst_scoring.LgstInputs | None:
    dataset_dir = Path(dataset_dir)
    manifest = _read_tensor_manifest(dataset_dir)
    if image_id not in manifest:
        return None
    files = manifest[image_id]
    t = {role: read_tensor(dataset_dir / "tensors" / files[role])
         for role in ("teacher", "local_local", "local_global", "global_student")}
    return lgst_scoring.LgstInputs(
        teacher=t["teacher"], local_head_local=t["local_local"],
        local_head_global=t["local_global"], global_student=t["global_student"])


def lgst_score(inputs: lgst_scoring.LgstInputs, reduction: str = "max") -> float:
    _, _, combined = lgst_scoring.lgst_maps(inputs)
    return lgst_scoring.map_to_score(combined, reduction)


def fit_model(dataset_dir, patch_sizes=None, labels_dir: str = "labels",
              val_fraction: float = VAL_FRACTION, use_lgst: bool = True,
              n_cls: int | None = None) -> Model:
    """Fit banks and calibration from the training split of a dataset."""
    dataset_dir = Path(dataset_dir)
    manifest = json.loads((dataset_dir / "manifest.json").read_text())
    canvas = manifest["canvas"]
    train_ids = manifest["train"]
    if len(train_ids) < 2:
        raise TooFewSamples("need at least two training images")
    patch_sizes = list(patch_sizes or (canvas, canvas // 2))

    maps = {i: read_label_map(dataset_dir / labels_dir / f"{i}.pgm") for i in train_ids}
    if n_cls is None:
        n_cls = max(int(m.pixels.max()) for m in maps.values())

    n_val = max(5, int(round(val_fraction * len(train_ids))))
    if n_val >= len(train_ids):
        raise TooFewSamples("training split too small for a validation hold-out")
    fit_ids, val_ids = train_ids[:-n_val], train_ids[-n_val:]

    banks = {}
    for s in patch_sizes:
        hists = [hs.patch_histogram(maps[i], s, n_cls) for i in fit_ids]
        banks[s] = hs.fit_bank(hists, patch_size=s, n_cls=n_cls)

    val_streams = {f"patch_hist_{s}": [] for s in patch_sizes}
    lgst_vals = []
    for i in val_ids:
        for s in patch_sizes:
            val_streams[f"patch_hist_{s}"].append(
                hs.mahalanobis_score(banks[s], hs.patch_histogram(maps[i], s, n_cls)))
        if use_lgst:
            inp = load_lgst_inputs(dataset_dir, i)
            if inp is not None:
                lgst_vals.append(lgst_score(inp))
    if lgst_vals:
        val_streams["lgst"] = lgst_vals
    elif use_lgst:
        log.warning("no feature tensors found; model will score patch histograms only")

    profile = fusion.calibrate(val_streams)
    return Model(n_cls=n_cls, patch_sizes=patch_sizes, banks=banks,
                 profile=profile, train_maps=[maps[i] for i in fit_ids],
                 canvas=canvas,
                 config={"labels_dir": labels_dir, "val_ids": val_ids})


def score_label_map(model: Model, label_map: LabelMap,
                    lgst_inputs=None) -> dict:
    """Raw per-stream scores plus the fused score for one image."""
    raw = {}
    for s in model.patch_sizes:
        h = hs.patch_histogram(label_map, s, model.n_cls)
        raw[f"patch_hist_{s}"] = hs.mahalanobis_score(model.banks[s], h)
    if lgst_inputs is not None and "lgst" in model.profile.streams:
        raw["lgst"] = lgst_score(lgst_inputs)
    return {"raw": raw, "fused": fusion.fuse(model.profile, raw)}


def branch_sigmas(model: Model) -> tuple[float, float]:
    """Calibration sigmas for merging localization maps (patch-hist, lgst)."""
    ph = [sig for name, (_, sig) in model.profile.streams.items()
          if name.startswith("patch_hist_")]
    sigma_ph = float(np.mean(ph)) if ph else 1.0
    sigma_lgst = model.profile.streams.get("lgst", (0.0, 1.0))[1]
    return sigma_ph, sigma_lgst


def localize(model: Model, label_map: LabelMap,
             lgst_inputs=None) -> localization.LocalizationResult:
    means = {s: model.banks[s].mean for s in model.patch_sizes}
    ph_map = localization.histogram_anomaly_map(
        label_map, means, model.train_maps, model.patch_sizes, model.n_cls)
    h, w = label_map.pixels.shape
    if lgst_inputs is not None:
        _, _, combined = lgst_scoring.lgst_maps(lgst_inputs)
        lg_map = lgst_scoring.upsample_bilinear(combined, h, w)
    else:
        lg_map = np.zeros((h, w))
    sigma_ph, sigma_lgst = branch_sigmas(model)
    merged = localization.merge_maps(ph_map, lg_map, sigma_ph, sigma_lgst)
    return localization.LocalizationResult(patch_hist_map=ph_map,
                                           lgst_map=lg_map, merged=merged)


def save_fitted(model: Model, out_dir) -> None:
    save_model(model, out_dir)
