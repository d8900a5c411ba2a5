"""Command-line surface: synth | gen-labels | fit | score | localize | bench.

Configuration is a single JSON file with per-command sections; command-line
flags override config values. Exit codes: 2 config error, 3 no surviving
clusters, 4 too few samples, 5 missing inputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import pipeline, pseudo_label, report, synth
from .clustering import MeanShiftConfig
from .errors import CsadError, NoSurvivingClusters, TooFewSamples
from .mask_ops import connected_components
from .model_store import load_model
from .tensor_io import MaskSet, read_label_map, read_mask_set, write_label_map

log = logging.getLogger("csad")

EXIT_CONFIG = 2
EXIT_NO_CLUSTERS = 3
EXIT_TOO_FEW = 4
EXIT_MISSING_INPUT = 5


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise SystemExit(_fail(EXIT_CONFIG, f"config error: {e}"))


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _model_dir(args) -> Path:
    d = args.model or os.environ.get("CSAD_MODEL_DIR")
    if not d:
        raise SystemExit(_fail(EXIT_MISSING_INPUT, "no model directory (--model or CSAD_MODEL_DIR)"))
    return Path(d)


def cmd_synth(args) -> int:
    cfg = _load_config(args.config).get("synth", {})
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    spec = synth.default_spec(canvas=cfg.get("canvas", 256), seed=seed,
                              n_archetypes=cfg.get("n_archetypes", 4))
    manifest = synth.generate_dataset(
        spec,
        n_train=cfg.get("n_train", 40),
        n_test_normal=cfg.get("n_test_normal", 20),
        n_test_per_kind=cfg.get("n_test_per_kind", 10),
        out_dir=args.out,
    )
    print(f"dataset written to {args.out}: {len(manifest['train'])} train, "
          f"{len(manifest['test'])} test images")
    return 0


def _raw_masks_for(label_map, masks_dir, image_id) -> MaskSet:
    if masks_dir is not None:
        return read_mask_set(Path(masks_dir) / image_id)
    comps = []
    for k in np.unique(label_map.pixels):
        if k == 0:
            continue
        comps.extend(connected_components(label_map, int(k)))
    return MaskSet(tuple(comps))


def cmd_gen_labels(args) -> int:
    cfg = _load_config(args.config).get("labels", {})
    dataset = Path(args.dataset)
    manifest = json.loads((dataset / "manifest.json").read_text())
    train_ids = manifest["train"]

    images, mask_sets = [], []
    mode = args.mode or cfg.get("mode", "coarse")
    for i in train_ids:
        img = synth.load_image(dataset / "images" / f"{i}.png")
        lm = read_label_map(dataset / "labels" / f"{i}.pgm")
        raw = _raw_masks_for(lm, args.masks_dir, i)
        grounding = (lm.pixels > 0) if args.masks_dir is None else None
        images.append(img)
        mask_sets.append(pseudo_label.refine_masks(raw, grounding, mode))

    gen_cfg = pseudo_label.LabelGenConfig(
        mode=mode,
        alpha=args.alpha if args.alpha is not None else cfg.get("alpha"),
        meanshift=MeanShiftConfig(bandwidth=cfg.get("bandwidth", 0.5)),
        rotations=cfg.get("rotations", 8),
    )
    try:
        n_cls, maps = pseudo_label.generate_labels(images, mask_sets, gen_cfg)
    except NoSurvivingClusters as e:
        return _fail(EXIT_NO_CLUSTERS, str(e))

    split = pseudo_label.filter_label_maps(dict(zip(train_ids, maps)), n_cls)
    out_dir = Path(args.out) if args.out else dataset / "labels_generated"
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, m in zip(train_ids, maps):
        write_label_map(m, out_dir / f"{i}.pgm")
    (out_dir / "split.json").write_text(json.dumps({
        "labeled": [i for i, _ in split.labeled],
        "unlabeled": split.unlabeled,
        "n_cls": split.n_cls,
    }, indent=2))
    print(f"labels written to {out_dir}: n_cls={n_cls}, "
          f"{len(split.labeled)} labeled / {len(split.unlabeled)} unlabeled")
    return 0


def cmd_fit(args) -> int:
    cfg = _load_config(args.config).get("fit", {})
    sizes = None
    raw_sizes = args.patch_sizes or cfg.get("patch_sizes")
    if raw_sizes:
        sizes = [int(s) for s in str(raw_sizes).split(",")]
    try:
        model = pipeline.fit_model(args.dataset, patch_sizes=sizes,
                                   labels_dir=args.labels,
                                   val_fraction=cfg.get("val_fraction", 0.2))
    except TooFewSamples as e:
        return _fail(EXIT_TOO_FEW, str(e))
    pipeline.save_fitted(model, _model_dir(args))
    print(f"model fitted: n_cls={model.n_cls}, patch sizes {model.patch_sizes}, "
          f"streams {model.stream_names()}")
    return 0


def _iter_test_entries(dataset: Path):
    manifest = json.loads((dataset / "manifest.json").read_text())
    for entry in manifest["test"]:
        yield entry["id"], entry.get("kind", "unknown")


def cmd_score(args) -> int:
    model = load_model(_model_dir(args))
    dataset = Path(args.dataset)
    if not (dataset / "manifest.json").exists():
        return _fail(EXIT_MISSING_INPUT, f"no manifest in {dataset}")
    rows = []
    warned = False
    for image_id, kind in _iter_test_entries(dataset):
        lm = read_label_map(dataset / args.labels / f"{image_id}.pgm")
        inp = pipeline.load_lgst_inputs(dataset, image_id)
        if inp is None and "lgst" in model.profile.streams and not warned:
            log.warning("feature tensors missing; scoring patch histograms only")
            warned = True
        result = pipeline.score_label_map(model, lm, inp)
        rows.append({"id": image_id, "kind": kind, **result})
    out = Path(args.out) if args.out else dataset / "scores.jsonl"
    with out.open("w") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
    if args.report:
        rep = report.ensure_dir(args.report)
        report.score_distribution_figure(rows, rep / "score_distribution.png")
    print(f"scored {len(rows)} images -> {out}")
    return 0


def cmd_localize(args) -> int:
    from .localization import write_anomaly_map
    model = load_model(_model_dir(args))
    dataset = Path(args.dataset)
    label_path = dataset / args.labels / f"{args.image}.pgm"
    if not label_path.exists():
        return _fail(EXIT_MISSING_INPUT, f"no label map for image {args.image}")
    lm = read_label_map(label_path)
    inp = pipeline.load_lgst_inputs(dataset, args.image)
    result = pipeline.localize(model, lm, inp)
    out = report.ensure_dir(args.out or dataset / "localization" / args.image)
    write_anomaly_map(result.patch_hist_map, out / "patch_hist.pgm")
    write_anomaly_map(result.lgst_map, out / "lgst.pgm")
    write_anomaly_map(result.merged, out / "merged.pgm")
    img_path = dataset / "images" / f"{args.image}.png"
    if img_path.exists():
        report.anomaly_map_figure(synth.load_image(img_path), result.merged,
                                  out / "overlay.png", title=args.image)
    print(f"anomaly maps written to {out}")
    return 0


def cmd_bench(args) -> int:
    model = load_model(_model_dir(args))
    dataset = Path(args.dataset)
    maps = [read_label_map(dataset / args.labels / f"{i}.pgm")
            for i, _ in _iter_test_entries(dataset)]
    if not maps:
        return _fail(EXIT_MISSING_INPUT, "dataset has no test images")
    rep = synth.bench(lambda m: pipeline.score_label_map(model, m),
                      maps, runs=args.runs, batch=args.batch)
    out = Path(args.out) if args.out else dataset / "bench_report.json"
    out.write_text(rep.to_json())
    if args.report:
        report.bench_figure(rep, report.ensure_dir(args.report) / "bench.png")
    print(f"latency {rep.latency_ms:.3f} ms, throughput {rep.throughput_fps:.1f} fps -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csad")
    p.add_argument("--config", help="JSON config file with per-command sections")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (reserved)")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("gen-labels", help="semantic pseudo-labels for a dataset")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out")
    sp.add_argument("--mode", choices=["fine", "coarse"])
    sp.add_argument("--alpha", type=int)
    sp.add_argument("--masks-dir", help="directory of per-image mask sets (sidecar output)")
    sp.set_defaults(func=cmd_gen_labels)

    sp = sub.add_parser("fit", help="fit histogram banks and calibration")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--model")
    sp.add_argument("--labels", default="labels")
    sp.add_argument("--patch-sizes", help="comma-separated, e.g. 256,128")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("score", help="score test images to JSONL")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--model")
    sp.add_argument("--labels", default="labels")
    sp.add_argument("--out")
    sp.add_argument("--report", help="directory for report figures")
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("localize", help="write anomaly maps for one image")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--model")
    sp.add_argument("--labels", default="labels")
    sp.add_argument("--image", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_localize)

    sp = sub.add_parser("bench", help="latency/throughput benchmark")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--model")
    sp.add_argument("--labels", default="labels")
    sp.add_argument("--runs", type=int, default=500)
    sp.add_argument("--batch", type=int, default=8)
    sp.add_argument("--out")
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_CONFIG
    except NoSurvivingClusters as e:
        return _fail(EXIT_NO_CLUSTERS, str(e))
    except TooFewSamples as e:
        return _fail(EXIT_TOO_FEW, str(e))
    except FileNotFoundError as e:
        return _fail(EXIT_MISSING_INPUT, str(e))
    except CsadError as e:
        return _fail(EXIT_CONFIG, str(e))


if __name__ == "__main__":
    sys.exit(main())
