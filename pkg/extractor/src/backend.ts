// Deterministic analytic stand-ins for the heavyweight vision models. Each
// routine is a pure function of the input bytes, so re-runs are byte-stable
// and the emitted artifacts can be compared exactly.

import type { RgbImage } from "./image.js";
import type { GrayImage } from "./pgm.js";
import { Tensor, makeTensor } from "./cstf.js";

const QUANT_LEVELS = 8;
const MIN_MASK_PIXELS = 16;

function quantize(img: RgbImage): Uint16Array {
  const step = 256 / QUANT_LEVELS;
  const out = new Uint16Array(img.width * img.height);
  for (let p = 0; p < out.length; p++) {
    const r = Math.floor(img.data[3 * p] / step);
    const g = Math.floor(img.data[3 * p + 1] / step);
    const b = Math.floor(img.data[3 * p + 2] / step);
    out[p] = (r * QUANT_LEVELS + g) * QUANT_LEVELS + b;
  }
  return out;
}

function backgroundColor(quant: Uint16Array): number {
  const counts = new Map<number, number>();
  for (const q of quant) counts.set(q, (counts.get(q) ?? 0) + 1);
  let best = quant[0];
  let bestCount = -1;
  for (const [q, c] of counts) {
    if (c > bestCount) {
      best = q;
      bestCount = c;
    }
  }
  return best;
}

/** 4-connected components of same-quantized-color pixels, one mask each. */
export function segmentMasks(img: RgbImage): { masks: GrayImage[]; grounding: GrayImage } {
  const { width, height } = img;
  const quant = quantize(img);
  const bg = backgroundColor(quant);
  const seen = new Uint8Array(width * height);
  const masks: GrayImage[] = [];
  const grounding = new Uint8Array(width * height);
  const stack: number[] = [];
  for (let start = 0; start < quant.length; start++) {
    if (seen[start] || quant[start] === bg) continue;
    const color = quant[start];
    const pixels = new Uint8Array(width * height);
    let count = 0;
    stack.push(start);
    seen[start] = 1;
    while (stack.length > 0) {
      const p = stack.pop()!;
      pixels[p] = 1;
      grounding[p] = 1;
      count++;
      const x = p % width;
      const neighbors = [p - width, p + width, x > 0 ? p - 1 : -1, x < width - 1 ? p + 1 : -1];
      for (const n of neighbors) {
        if (n >= 0 && n < quant.length && !seen[n] && quant[n] === color) {
          seen[n] = 1;
          stack.push(n);
        }
      }
    }
    if (count >= MIN_MASK_PIXELS) masks.push({ width, height, pixels });
  }
  // largest first, ties by scan order, so output order is deterministic
  masks.sort((a, b) => sum(b.pixels) - sum(a.pixels));
  return { masks, grounding: { width, height, pixels: grounding } };
}

function sum(a: Uint8Array): number {
  let s = 0;
  for (const v of a) s += v;
  return s;
}

const HIST_LEVELS = 4;
export const FEATURE_DIM = 6 + HIST_LEVELS * HIST_LEVELS * HIST_LEVELS;

/** Per-crop descriptor: channel means and stds plus a coarse color histogram. */
export function cropFeatures(crop: RgbImage): Tensor {
  const n = crop.width * crop.height;
  const vec = new Float32Array(FEATURE_DIM);
  for (let c = 0; c < 3; c++) {
    let mean = 0;
    for (let p = 0; p < n; p++) mean += crop.data[3 * p + c];
    mean /= n;
    let varc = 0;
    for (let p = 0; p < n; p++) varc += (crop.data[3 * p + c] - mean) ** 2;
    vec[c] = mean / 255;
    vec[3 + c] = Math.sqrt(varc / n) / 255;
  }
  const step = 256 / HIST_LEVELS;
  for (let p = 0; p < n; p++) {
    const r = Math.floor(crop.data[3 * p] / step);
    const g = Math.floor(crop.data[3 * p + 1] / step);
    const b = Math.floor(crop.data[3 * p + 2] / step);
    vec[6 + (r * HIST_LEVELS + g) * HIST_LEVELS + b] += 1 / n;
  }
  return makeTensor([FEATURE_DIM], vec);
}

/** splitmix32-style hash, the deterministic seed for the channel projection. */
function hash(x: number): number {
  x = Math.imul(x ^ (x >>> 16), 0x45d9f3b);
  x = Math.imul(x ^ (x >>> 16), 0x45d9f3b);
  return (x ^ (x >>> 16)) >>> 0;
}

const PROJ_SEED = 0x5eed;

function downsample(img: RgbImage, size: number): Float32Array {
  const out = new Float32Array(size * size * 3);
  for (let gy = 0; gy < size; gy++) {
    const y0 = Math.floor((gy * img.height) / size);
    const y1 = Math.max(y0 + 1, Math.floor(((gy + 1) * img.height) / size));
    for (let gx = 0; gx < size; gx++) {
      const x0 = Math.floor((gx * img.width) / size);
      const x1 = Math.max(x0 + 1, Math.floor(((gx + 1) * img.width) / size));
      for (let c = 0; c < 3; c++) {
        let acc = 0;
        for (let y = y0; y < y1; y++) {
          for (let x = x0; x < x1; x++) acc += img.data[3 * (y * img.width + x) + c];
        }
        out[3 * (gy * size + gx) + c] = acc / ((y1 - y0) * (x1 - x0) * 255);
      }
    }
  }
  return out;
}

/**
 * Teacher and student feature tensors in (C, H, W) order: a fixed random
 * projection of the downsampled image. Students equal the teacher, which
 * is the expected eval-mode behavior on in-distribution data.
 */
export function lgstTensors(img: RgbImage, shape: [number, number, number]): Record<string, Tensor> {
  const [channels, h, w] = shape;
  if (h !== w) throw new Error("tensor grid must be square");
  const grid = downsample(img, h);
  const data = new Float32Array(channels * h * w);
  for (let c = 0; c < channels; c++) {
    for (let p = 0; p < h * w; p++) {
      let acc = 0;
      for (let k = 0; k < 3; k++) {
        const u = hash(PROJ_SEED + c * 3 + k) / 0xffffffff;
        acc += (2 * u - 1) * grid[3 * p + k];
      }
      data[c * h * w + p] = acc;
    }
  }
  const teacher = makeTensor([channels, h, w], data);
  return {
    teacher,
    local_local: makeTensor([channels, h, w], Float32Array.from(data)),
    local_global: makeTensor([channels, h, w], Float32Array.from(data)),
    global_student: makeTensor([channels, h, w], Float32Array.from(data)),
  };
}

/** Axis-aligned bounding-box crop of a mask's support within the image. */
export function cropToMask(img: RgbImage, mask: GrayImage): RgbImage {
  let x0 = img.width, y0 = img.height, x1 = -1, y1 = -1;
  for (let y = 0; y < img.height; y++) {
    for (let x = 0; x < img.width; x++) {
      if (mask.pixels[y * img.width + x]) {
        if (x < x0) x0 = x;
        if (x > x1) x1 = x;
        if (y < y0) y0 = y;
        if (y > y1) y1 = y;
      }
    }
  }
  if (x1 < 0) throw new Error("empty mask has no crop");
  const w = x1 - x0 + 1;
  const h = y1 - y0 + 1;
  const data = new Uint8Array(w * h * 3);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      for (let c = 0; c < 3; c++) {
        data[3 * (y * w + x) + c] = img.data[3 * ((y0 + y) * img.width + x0 + x) + c];
      }
    }
  }
  return { width: w, height: h, data };
}
