import { mkdtempSync, readFileSync, readdirSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { PNG } from "pngjs";
import { describe, expect, it } from "vitest";

import { FEATURE_DIM, cropFeatures, cropToMask, lgstTensors, segmentMasks } from "../src/backend.js";
import { decodeTensor, encodeTensor, makeTensor, readTensor, writeTensor } from "../src/cstf.js";
import type { RgbImage } from "../src/image.js";
import { readPng } from "../src/image.js";
import { runJob } from "../src/run.js";
import { decodePgm, encodePgm, writeMaskSet } from "../src/pgm.js";

function tmp(): string {
  return mkdtempSync(join(tmpdir(), "extractor-"));
}

/** Flat background with solid rectangles, the simplest componentful photo. */
function testScene(width = 64, height = 48): RgbImage {
  const data = new Uint8Array(width * height * 3).fill(200);
  const paint = (x0: number, y0: number, w: number, h: number, rgb: number[]) => {
    for (let y = y0; y < y0 + h; y++) {
      for (let x = x0; x < x0 + w; x++) {
        data.set(rgb, 3 * (y * width + x));
      }
    }
  };
  paint(5, 5, 12, 10, [220, 30, 30]);
  paint(30, 8, 10, 14, [30, 30, 220]);
  paint(45, 28, 14, 12, [30, 180, 30]);
  return { width, height, data };
}

function scenePng(dir: string, name: string, img = testScene()): string {
  const png = new PNG({ width: img.width, height: img.height });
  for (let p = 0; p < img.width * img.height; p++) {
    png.data[4 * p] = img.data[3 * p];
    png.data[4 * p + 1] = img.data[3 * p + 1];
    png.data[4 * p + 2] = img.data[3 * p + 2];
    png.data[4 * p + 3] = 255;
  }
  const path = join(dir, name);
  writeFileSync(path, PNG.sync.write(png));
  return path;
}

describe("cstf", () => {
  it("round-trips dims and payload exactly", () => {
    const t = makeTensor([2, 3], Float32Array.from([1, -2.5, 3e-7, 4, 0, 6]));
    const back = decodeTensor(encodeTensor(t));
    expect(back.dims).toEqual([2, 3]);
    expect(Array.from(back.data)).toEqual(Array.from(t.data));
  });

  it("writes files the reader accepts", () => {
    const dir = tmp();
    const t = makeTensor([4], Float32Array.from([0.25, 0.5, 0.75, 1]));
    writeTensor(t, join(dir, "t.bin"));
    expect(readTensor(join(dir, "t.bin")).dims).toEqual([4]);
  });

  it("rejects wrong payload size and non-finite values", () => {
    expect(() => makeTensor([3], Float32Array.from([1, 2]))).toThrow();
    expect(() => makeTensor([1], Float32Array.from([NaN]))).toThrow();
  });

  it("starts with the CSTF magic and little-endian header", () => {
    const raw = encodeTensor(makeTensor([1], Float32Array.from([1])));
    expect(raw.toString("ascii", 0, 4)).toBe("CSTF");
    expect(raw.readUInt32LE(4)).toBe(1);
    expect(raw.readUInt32LE(8)).toBe(1);
  });
});

describe("pgm", () => {
  it("round-trips an image exactly", () => {
    const img = { width: 3, height: 2, pixels: Uint8Array.from([0, 1, 255, 7, 8, 9]) };
    const back = decodePgm(encodePgm(img));
    expect(back.width).toBe(3);
    expect(back.height).toBe(2);
    expect(Array.from(back.pixels)).toEqual(Array.from(img.pixels));
  });

  it("mask-set manifest lists every emitted file", () => {
    const dir = tmp();
    const mask = { width: 4, height: 4, pixels: new Uint8Array(16).fill(1) };
    const manifest = writeMaskSet([mask, mask, mask], dir);
    expect(manifest.masks).toHaveLength(3);
    const onDisk = readdirSync(dir);
    for (const name of manifest.masks) expect(onDisk).toContain(name);
    expect(JSON.parse(readFileSync(join(dir, "manifest.json"), "utf8"))).toEqual(manifest);
  });
});

describe("segmentMasks", () => {
  it("finds one mask per solid rectangle with image dimensions", () => {
    const img = testScene();
    const { masks, grounding } = segmentMasks(img);
    expect(masks).toHaveLength(3);
    for (const m of masks) {
      expect(m.width).toBe(img.width);
      expect(m.height).toBe(img.height);
    }
    expect(masks[0].pixels.reduce((a, b) => a + b, 0)).toBe(14 * 12);
    const union = masks.reduce((a, m) => a + m.pixels.reduce((x, y) => x + y, 0), 0);
    expect(grounding.pixels.reduce((a, b) => a + b, 0)).toBe(union);
  });

  it("is deterministic across calls", () => {
    const a = segmentMasks(testScene());
    const b = segmentMasks(testScene());
    expect(a.masks.map((m) => Array.from(m.pixels))).toEqual(
      b.masks.map((m) => Array.from(m.pixels)));
  });
});

describe("cropFeatures", () => {
  it("gives identical vectors for identical crops", () => {
    const img = testScene();
    const { masks } = segmentMasks(img);
    const a = cropFeatures(cropToMask(img, masks[0]));
    const b = cropFeatures(cropToMask(img, masks[0]));
    expect(Array.from(a.data)).toEqual(Array.from(b.data));
  });

  it("emits finite vectors of the documented dimension", () => {
    const img = testScene();
    const { masks } = segmentMasks(img);
    for (const m of masks) {
      const t = cropFeatures(cropToMask(img, m));
      expect(t.dims).toEqual([FEATURE_DIM]);
      for (const v of t.data) expect(Number.isFinite(v)).toBe(true);
    }
  });

  it("separates differently colored crops", () => {
    const img = testScene();
    const { masks } = segmentMasks(img);
    const a = cropFeatures(cropToMask(img, masks[0]));
    const b = cropFeatures(cropToMask(img, masks[1]));
    expect(Array.from(a.data)).not.toEqual(Array.from(b.data));
  });
});

describe("lgstTensors", () => {
  it("matches the requested shape for every role", () => {
    const tensors = lgstTensors(testScene(), [16, 28, 28]);
    for (const role of ["teacher", "local_local", "local_global", "global_student"]) {
      expect(tensors[role].dims).toEqual([16, 28, 28]);
    }
  });

  it("teacher bytes are identical across runs", () => {
    const a = encodeTensor(lgstTensors(testScene(), [8, 14, 14]).teacher);
    const b = encodeTensor(lgstTensors(testScene(), [8, 14, 14]).teacher);
    expect(a.equals(b)).toBe(true);
  });

  it("students equal the teacher on clean input", () => {
    const tensors = lgstTensors(testScene(), [4, 7, 7]);
    expect(Array.from(tensors.local_local.data)).toEqual(Array.from(tensors.teacher.data));
  });
});

describe("runJob", () => {
  function makeJob() {
    const input = tmp();
    for (let i = 0; i < 2; i++) scenePng(input, `photo_${i}.png`);
    return { input_dir: input, out_dir: tmp(), category: "demo",
             tags: ["rectangle"], tensor_shape: [4, 7, 7] as [number, number, number] };
  }

  it("emits masks, grounding, features, and tensors for every image", () => {
    const job = makeJob();
    const manifest = runJob(job);
    expect(Object.keys(manifest.images)).toEqual(["photo_0", "photo_1"]);
    for (const entry of Object.values(manifest.images)) {
      const maskManifest = JSON.parse(
        readFileSync(join(job.out_dir, entry.masks, "manifest.json"), "utf8"));
      expect(maskManifest.masks.length).toBeGreaterThan(0);
      expect(decodePgm(readFileSync(join(job.out_dir, entry.grounding))).width).toBe(64);
      expect(entry.features.length).toBe(maskManifest.masks.length);
      for (const f of entry.features) {
        expect(readTensor(join(job.out_dir, f)).dims).toEqual([FEATURE_DIM]);
      }
      for (const t of Object.values(entry.tensors)) {
        expect(readTensor(join(job.out_dir, t)).dims).toEqual([4, 7, 7]);
      }
    }
    const tm = JSON.parse(readFileSync(join(job.out_dir, "tensors", "manifest.json"), "utf8"));
    expect(Object.keys(tm).sort()).toEqual(["photo_0", "photo_1"]);
    expect(Object.keys(tm.photo_0).sort()).toEqual(
      ["global_student", "local_global", "local_local", "teacher"]);
  });

  it("manifest references only files that exist", () => {
    const job = makeJob();
    const manifest = runJob(job);
    for (const entry of Object.values(manifest.images)) {
      const referenced = [entry.grounding, ...entry.features, ...Object.values(entry.tensors)];
      for (const rel of referenced) expect(() => readFileSync(join(job.out_dir, rel))).not.toThrow();
    }
  });

  it("re-running a job reproduces every artifact byte for byte", () => {
    const job = makeJob();
    runJob(job);
    const first = new Map<string, Buffer>();
    const walk = (dir: string, into: Map<string, Buffer>) => {
      for (const e of readdirSync(dir, { withFileTypes: true })) {
        const p = join(dir, e.name);
        if (e.isDirectory()) walk(p, into);
        else into.set(p.slice(job.out_dir.length), readFileSync(p));
      }
    };
    walk(job.out_dir, first);
    runJob(job);
    const second = new Map<string, Buffer>();
    walk(job.out_dir, second);
    expect([...second.keys()].sort()).toEqual([...first.keys()].sort());
    for (const [k, v] of first) expect(second.get(k)!.equals(v)).toBe(true);
  });

  it("fails on an input directory without images", () => {
    expect(() => runJob({ input_dir: tmp(), out_dir: tmp(), category: "x",
                          tags: [], tensor_shape: [4, 7, 7] })).toThrow();
  });

  it("reads back its own PNG inputs", () => {
    const dir = tmp();
    const img = testScene();
    scenePng(dir, "a.png", img);
    const back = readPng(join(dir, "a.png"));
    expect(back.width).toBe(img.width);
    expect(Array.from(back.data)).toEqual(Array.from(img.data));
  });
});
