// Binary (P5) 8-bit PGM images plus the mask-set directory layout: one PGM
// per mask and a manifest.json listing width, height, and file names.

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

export interface GrayImage {
  width: number;
  height: number;
  pixels: Uint8Array; // row-major
}

export function encodePgm(img: GrayImage): Buffer {
  const header = Buffer.from(`P5\n${img.width} ${img.height}\n255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(img.pixels)]);
}

export function decodePgm(raw: Buffer): GrayImage {
  if (raw.toString("ascii", 0, 2) !== "P5") throw new Error("not a binary PGM");
  const vals: number[] = [];
  let i = 2;
  while (vals.length < 3) {
    const c = raw[i];
    if (c === undefined) throw new Error("truncated PGM header");
    if (c === 0x23) {
      while (i < raw.length && raw[i] !== 0x0a) i++;
    } else if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) {
      i++;
    } else {
      let j = i;
      while (j < raw.length && raw[j] >= 0x30 && raw[j] <= 0x39) j++;
      if (j === i) throw new Error("bad PGM token");
      vals.push(parseInt(raw.toString("ascii", i, j), 10));
      i = j;
    }
  }
  i++; // single whitespace byte after maxval
  const [width, height, maxval] = vals;
  if (maxval !== 255) throw new Error(`expected 8-bit PGM, maxval ${maxval}`);
  const pixels = raw.subarray(i, i + width * height);
  if (pixels.length !== width * height) throw new Error("truncated PGM payload");
  return { width, height, pixels: Uint8Array.from(pixels) };
}

export function writePgm(img: GrayImage, path: string): void {
  writeFileSync(path, encodePgm(img));
}

export function readPgm(path: string): GrayImage {
  return decodePgm(readFileSync(path));
}

export interface MaskSetManifest {
  width: number;
  height: number;
  masks: string[];
}

export function writeMaskSet(masks: GrayImage[], dir: string): MaskSetManifest {
  mkdirSync(dir, { recursive: true });
  const names = masks.map((_, i) => `mask_${String(i).padStart(4, "0")}.pgm`);
  masks.forEach((m, i) => writePgm(m, join(dir, names[i])));
  const manifest: MaskSetManifest = {
    width: masks[0]?.width ?? 0,
    height: masks[0]?.height ?? 0,
    masks: names,
  };
  writeFileSync(join(dir, "manifest.json"), JSON.stringify(manifest, null, 2));
  return manifest;
}
