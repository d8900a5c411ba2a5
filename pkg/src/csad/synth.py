"""Synthetic scene benchmark: toy assemblies with oracle segmentation.

Each scene places colored archetype shapes (disk, square, bar, triangle) at
jittered home positions on a dark canvas. Anomaly injectors alter exactly
one aspect: an instance count (missing/extra), an arrangement (swap), or a
shape (sector bite). Colors are unique per archetype so segmentation is
exact by nearest color. Also houses the AUROC evaluator and the
latency/throughput bench harness.
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage
from scipy.stats import rankdata

from .errors import EmptyInput, SpecInfeasible
from .tensor_io import FeatureTensor, LabelMap, write_label_map, write_tensor


class AnomalyKind(enum.Enum):
    MISSING = "missing"
    EXTRA = "extra"
    SWAPPED = "swapped"
    STRUCTURAL = "structural"


@dataclass(frozen=True)
class Archetype:
    name: str
    shape: str                      # disk | square | bar | triangle
    color: tuple                    # RGB in [0, 1]
    size: float                     # characteristic radius / half-extent, px
    homes: tuple                    # nominal centers ((x, y), ...)


@dataclass(frozen=True)
class SceneSpec:
    canvas: int = 256
    archetypes: tuple = ()
    jitter: float = 1.5
    background: tuple = (0.08, 0.08, 0.10)
    seed: int = 0

    def colors(self):
        return [a.color for a in self.archetypes]


def default_spec(canvas: int = 256, seed: int = 0, n_archetypes: int = 4) -> SceneSpec:
    q = canvas // 4
    archetypes = (
        Archetype("disk", "disk", (0.85, 0.10, 0.10), canvas * 0.07, ((q, q),)),
        Archetype("square", "square", (0.10, 0.20, 0.85), canvas * 0.06, ((3 * q, q),)),
        Archetype("bar", "bar", (0.10, 0.75, 0.20), canvas * 0.08, ((q, 3 * q),)),
        Archetype("triangle", "triangle", (0.85, 0.75, 0.10), canvas * 0.07, ((3 * q, 3 * q),)),
    )[:n_archetypes]
    return SceneSpec(canvas=canvas, archetypes=archetypes, seed=seed)


def shape_mask(shape: str, size: float, center, canvas: int) -> np.ndarray:
    cx, cy = center
    yy, xx = np.mgrid[0:canvas, 0:canvas].astype(float)
    dx, dy = xx - cx, yy - cy
    if shape == "disk":
        return dx * dx + dy * dy <= size * size
    if shape == "square":
        return (np.abs(dx) <= size) & (np.abs(dy) <= size)
    if shape == "bar":
        return (np.abs(dx) <= size) & (np.abs(dy) <= size / 3)
    if shape == "triangle":
        inside_y = (dy >= -size) & (dy <= size)
        return inside_y & (np.abs(dx) <= (dy + size) / 2)
    raise ValueError(f"unknown shape {shape!r}")


@dataclass
class Instance:
    archetype: int
    center: tuple


def _check_fit(spec: SceneSpec) -> None:
    for a in spec.archetypes:
        for (hx, hy) in a.homes:
            margin = a.size + 4 * spec.jitter + 1
            if not (margin <= hx <= spec.canvas - margin
                    and margin <= hy <= spec.canvas - margin):
                raise SpecInfeasible(
                    f"{a.name} home {(hx, hy)} cannot fit inside the canvas")


def sample_scene(spec: SceneSpec, rng) -> list[Instance]:
    out = []
    for ai, a in enumerate(spec.archetypes):
        for (hx, hy) in a.homes:
            jx, jy = rng.normal(0.0, spec.jitter, size=2)
            out.append(Instance(ai, (hx + jx, hy + jy)))
    return out


def render(spec: SceneSpec, instances, defect_mask: np.ndarray | None = None):
    """Paint the scene; returns (image HxWx3 float, oracle LabelMap)."""
    c = spec.canvas
    img = np.empty((c, c, 3), dtype=float)
    img[:] = spec.background
    labels = np.zeros((c, c), dtype=np.uint8)
    for inst in instances:
        a = spec.archetypes[inst.archetype]
        m = shape_mask(a.shape, a.size, inst.center, c)
        if defect_mask is not None:
            m = m & ~defect_mask
        img[m] = a.color
        labels[m] = inst.archetype + 1
    return img, LabelMap(labels)


def inject_anomaly(spec: SceneSpec, instances, kind: AnomalyKind, rng):
    """Return (instances, defect_mask, ground_truth_mask) for the given kind."""
    c = spec.canvas
    insts = [Instance(i.archetype, i.center) for i in instances]
    if kind is AnomalyKind.MISSING:
        i = int(rng.integers(len(insts)))
        gone = insts.pop(i)
        a = spec.archetypes[gone.archetype]
        gt = shape_mask(a.shape, a.size, gone.center, c)
        gt = ndimage.binary_dilation(gt, iterations=6)
        return insts, None, gt
    if kind is AnomalyKind.EXTRA:
        ai = int(rng.integers(len(spec.archetypes)))
        a = spec.archetypes[ai]
        margin = a.size + 2
        for _ in range(200):
            x = rng.uniform(margin, c - margin)
            y = rng.uniform(margin, c - margin)
            far = all(np.hypot(x - hx, y - hy) > 3.5 * a.size
                      for b in spec.archetypes for (hx, hy) in b.homes)
            if far:
                insts.append(Instance(ai, (x, y)))
                return insts, None, shape_mask(a.shape, a.size, (x, y), c)
        raise SpecInfeasible("no free location for an extra component")
    if kind is AnomalyKind.SWAPPED:
        if len(insts) < 2:
            raise SpecInfeasible("need two instances to swap")
        i, j = rng.choice(len(insts), size=2, replace=False)
        while insts[i].archetype == insts[j].archetype:
            i, j = rng.choice(len(insts), size=2, replace=False)
        # move each shape by a whole-pixel offset so its rasterized footprint
        # translates exactly and per-class pixel counts are preserved
        (xi, yi), (xj, yj) = insts[i].center, insts[j].center
        insts[i].center = (xi + round(xj - xi), yi + round(yj - yi))
        insts[j].center = (xj + round(xi - xj), yj + round(yi - yj))
        gt = np.zeros((c, c), dtype=bool)
        for idx in (i, j):
            a = spec.archetypes[insts[idx].archetype]
            gt |= shape_mask(a.shape, a.size, insts[idx].center, c)
        return insts, None, gt
    if kind is AnomalyKind.STRUCTURAL:
        i = int(rng.integers(len(insts)))
        a = spec.archetypes[insts[i].archetype]
        cx, cy = insts[i].center
        ang = rng.uniform(0, 2 * np.pi)
        bx = cx + a.size * np.cos(ang)
        by = cy + a.size * np.sin(ang)
        bite = shape_mask("disk", a.size * 0.6, (bx, by), c)
        body = shape_mask(a.shape, a.size, (cx, cy), c)
        return insts, bite, bite & body
    raise ValueError(f"unknown anomaly kind {kind}")


def oracle_segment(image: np.ndarray, spec: SceneSpec) -> LabelMap:
    """Per-pixel nearest color among background + archetype colors."""
    palette = np.array([spec.background] + list(spec.colors()))
    d = np.linalg.norm(image[:, :, None, :] - palette[None, None, :, :], axis=3)
    return LabelMap(np.argmin(d, axis=2).astype(np.uint8))


# --- synthetic student/teacher tensors --------------------------------------

FEAT_CHANNELS = 16
FEAT_HW = 28
_PROJ_SEED = 1234567
_STUDENT_NOISE = 1e-3
_PERTURB = 0.5


def _downsample(img: np.ndarray, out: int) -> np.ndarray:
    c = img.shape[0]
    f = c // out
    return img[:f * out, :f * out].reshape(out, f, out, f, -1).mean(axis=(1, 3))


def synth_tensors(image: np.ndarray, gt_mask: np.ndarray | None, rng):
    """Four-tensor bundle exercising the student-teacher scorer end to end.

    The teacher is a fixed random projection of the downsampled image; the
    student heads equal the teacher up to tiny noise on normal scenes and
    get an additional localized perturbation inside the anomaly region.
    """
    proj = np.random.default_rng(_PROJ_SEED).normal(
        0, 1, size=(3, FEAT_CHANNELS)) / np.sqrt(3)
    small = _downsample(image, FEAT_HW)
    teacher = np.transpose(small @ proj, (2, 0, 1)).astype(np.float32)
    bump = np.zeros((FEAT_HW, FEAT_HW), dtype=np.float32)
    if gt_mask is not None:
        down = _downsample(gt_mask[:, :, None].astype(float), FEAT_HW)[:, :, 0]
        bump = (_PERTURB * (down > 0.05)).astype(np.float32)

    def student():
        noise = rng.normal(0, _STUDENT_NOISE, size=teacher.shape).astype(np.float32)
        return teacher + noise + bump[None, :, :]

    return {
        "teacher": FeatureTensor(teacher),
        "local_local": FeatureTensor(student()),
        "local_global": FeatureTensor(student()),
        "global_student": FeatureTensor(
            teacher + rng.normal(0, _STUDENT_NOISE, size=teacher.shape).astype(np.float32)),
    }


# --- dataset generation -----------------------------------------------------

TENSOR_ROLES = ("teacher", "local_local", "local_global", "global_student")


def _save_image(img: np.ndarray, path) -> None:
    Image.fromarray(np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)).save(path)


def load_image(path) -> np.ndarray:
    return np.asarray(Image.open(path), dtype=float) / 255.0


def generate_dataset(spec: SceneSpec, n_train: int, n_test_normal: int,
                     n_test_per_kind: int, out_dir,
                     kinds=tuple(AnomalyKind)) -> dict:
    """Write images/, labels/, masks/, tensors/ and a manifest; seeded."""
    _check_fit(spec)
    out = Path(out_dir)
    for sub in ("images", "labels", "masks", "tensors"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    entries = {"train": [], "test": []}
    tensor_manifest = {}

    def emit(image_id: str, rng, kind: AnomalyKind | None):
        instances = sample_scene(spec, rng)
        gt = None
        defect = None
        if kind is not None:
            instances, defect, gt = inject_anomaly(spec, instances, kind, rng)
        img, labels = render(spec, instances, defect)
        _save_image(img, out / "images" / f"{image_id}.png")
        write_label_map(labels, out / "labels" / f"{image_id}.pgm")
        if gt is not None:
            write_label_map(LabelMap(gt.astype(np.uint8)),
                            out / "masks" / f"{image_id}.pgm")
        bundle = synth_tensors(img, gt, rng)
        files = {}
        for role in TENSOR_ROLES:
            name = f"{image_id}.{role}.cstf"
            write_tensor(bundle[role], out / "tensors" / name)
            files[role] = name
        tensor_manifest[image_id] = files

    for i in range(n_train):
        image_id = f"train_{i:04d}"
        emit(image_id, np.random.default_rng([spec.seed, 0, i]), None)
        entries["train"].append(image_id)
    for i in range(n_test_normal):
        image_id = f"test_normal_{i:04d}"
        emit(image_id, np.random.default_rng([spec.seed, 1, i]), None)
        entries["test"].append({"id": image_id, "kind": "normal"})
    for ki, kind in enumerate(kinds):
        for i in range(n_test_per_kind):
            image_id = f"test_{kind.value}_{i:04d}"
            emit(image_id, np.random.default_rng([spec.seed, 2 + ki, i]), kind)
            entries["test"].append({"id": image_id, "kind": kind.value})

    manifest = {
        "version": 1,
        "canvas": spec.canvas,
        "seed": spec.seed,
        "background": list(spec.background),
        "archetypes": [
            {"name": a.name, "shape": a.shape, "color": list(a.color),
             "size": a.size, "homes": [list(h) for h in a.homes]}
            for a in spec.archetypes
        ],
        "jitter": spec.jitter,
        **entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    (out / "tensors" / "manifest.json").write_text(json.dumps(tensor_manifest, indent=2))
    return manifest


def spec_from_manifest(manifest: dict) -> SceneSpec:
    archetypes = tuple(
        Archetype(a["name"], a["shape"], tuple(a["color"]), a["size"],
                  tuple(tuple(h) for h in a["homes"]))
        for a in manifest["archetypes"])
    return SceneSpec(canvas=manifest["canvas"], archetypes=archetypes,
                     jitter=manifest["jitter"],
                     background=tuple(manifest["background"]),
                     seed=manifest["seed"])


# --- evaluation and benchmarking -------------------------------------------

def auroc(scores_normal, scores_anomalous) -> float:
    """P(anomalous score > normal score), ties counted half (Mann-Whitney)."""
    a = np.asarray(scores_anomalous, dtype=float)
    n = np.asarray(scores_normal, dtype=float)
    if len(a) == 0 or len(n) == 0:
        raise EmptyInput("both score lists must be nonempty")
    ranks = rankdata(np.concatenate([a, n]))
    u = ranks[:len(a)].sum() - len(a) * (len(a) + 1) / 2
    return float(u / (len(a) * len(n)))


@dataclass(frozen=True)
class BenchReport:
    latency_ms: float
    throughput_fps: float
    runs: int
    batch_size: int
    total_time_s: float
    warmup: int

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)


def bench(score_one, items, runs: int = 500, batch: int = 8,
          warmup: int = 10) -> BenchReport:
    """Time `score_one(item)`: batch-1 latency, then batched throughput."""
    if not items:
        raise EmptyInput("bench needs at least one item")
    for i in range(warmup):
        score_one(items[i % len(items)])
    t0 = time.perf_counter()
    for i in range(runs):
        score_one(items[i % len(items)])
    latency_ms = (time.perf_counter() - t0) / runs * 1000.0

    for i in range(warmup):
        score_one(items[i % len(items)])
    t0 = time.perf_counter()
    for r in range(runs):
        for b in range(batch):
            score_one(items[(r * batch + b) % len(items)])
    total = time.perf_counter() - t0
    return BenchReport(latency_ms=latency_ms,
                       throughput_fps=batch * runs / total,
                       runs=runs, batch_size=batch,
                       total_time_s=total, warmup=warmup)
