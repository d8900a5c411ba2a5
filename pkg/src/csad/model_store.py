"""On-disk model directory: banks per patch size, calibration, metadata.

Layout::

    model.json            version, n_cls, patch sizes, config snapshot
    bank_<size>.bin       fitted histogram bank
    calibration.json      trimmed mean/std per score stream
    train_labels/*.pgm    label maps retained for localization
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import UnsupportedFormat
from .fusion import CalibrationProfile
from .histogram_scoring import HistogramBank, load_bank, save_bank
from .tensor_io import LabelMap, read_label_map, write_label_map

MODEL_VERSION = 1


@dataclass
class Model:
    n_cls: int
    patch_sizes: list
    banks: dict                      # patch size -> HistogramBank
    profile: CalibrationProfile
    train_maps: list                 # LabelMap, retained for localization
    canvas: int
    config: dict = field(default_factory=dict)

    def stream_names(self) -> list:
        names = [f"patch_hist_{s}" for s in self.patch_sizes]
        if "lgst" in self.profile.streams:
            names.append("lgst")
        return names


def save_model(model: Model, directory) -> None:
    d = Path(directory)
    (d / "train_labels").mkdir(parents=True, exist_ok=True)
    meta = {
        "version": MODEL_VERSION,
        "n_cls": model.n_cls,
        "patch_sizes": list(model.patch_sizes),
        "canvas": model.canvas,
        "n_train_maps": len(model.train_maps),
        "config": model.config,
    }
    (d / "model.json").write_text(json.dumps(meta, indent=2))
    for s, bank in model.banks.items():
        save_bank(bank, d / f"bank_{s}.bin")
    model.profile.save(d / "calibration.json")
    for i, m in enumerate(model.train_maps):
        write_label_map(m, d / "train_labels" / f"{i:04d}.pgm")


def load_model(directory) -> Model:
    d = Path(directory)
    meta = json.loads((d / "model.json").read_text())
    if meta.get("version") != MODEL_VERSION:
        raise UnsupportedFormat(f"unsupported model version {meta.get('version')}")
    banks = {s: load_bank(d / f"bank_{s}.bin") for s in meta["patch_sizes"]}
    profile = CalibrationProfile.load(d / "calibration.json")
    train_maps = [read_label_map(d / "train_labels" / f"{i:04d}.pgm")
                  for i in range(meta["n_train_maps"])]
    return Model(n_cls=meta["n_cls"], patch_sizes=meta["patch_sizes"],
                 banks=banks, profile=profile, train_maps=train_maps,
                 canvas=meta["canvas"], config=meta.get("config", {}))
