// CSTF tensor files: magic "CSTF" | u32 version=1 | u32 ndim | ndim*u32 dims
// | raw float32 payload, all little-endian.

import { readFileSync, writeFileSync } from "node:fs";

export const MAGIC = "CSTF";
export const VERSION = 1;

export interface Tensor {
  dims: number[];
  data: Float32Array;
}

export function makeTensor(dims: number[], data: Float32Array): Tensor {
  const expected = dims.reduce((a, b) => a * b, 1);
  if (data.length !== expected) {
    throw new Error(`tensor data holds ${data.length} floats, dims require ${expected}`);
  }
  for (const v of data) {
    if (!Number.isFinite(v)) throw new Error("tensor contains non-finite values");
  }
  return { dims, data };
}

export function encodeTensor(t: Tensor): Buffer {
  const header = Buffer.alloc(12 + 4 * t.dims.length);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(t.dims.length, 8);
  t.dims.forEach((d, i) => header.writeUInt32LE(d, 12 + 4 * i));
  const payload = Buffer.alloc(4 * t.data.length);
  t.data.forEach((v, i) => payload.writeFloatLE(v, 4 * i));
  return Buffer.concat([header, payload]);
}

export function decodeTensor(raw: Buffer): Tensor {
  if (raw.toString("ascii", 0, 4) !== MAGIC) throw new Error("expected CSTF magic");
  const version = raw.readUInt32LE(4);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const ndim = raw.readUInt32LE(8);
  const dims: number[] = [];
  for (let i = 0; i < ndim; i++) dims.push(raw.readUInt32LE(12 + 4 * i));
  const off = 12 + 4 * ndim;
  const expected = dims.reduce((a, b) => a * b, 1);
  if (raw.length - off !== 4 * expected) {
    throw new Error(`payload holds ${(raw.length - off) / 4} floats, dims require ${expected}`);
  }
  const data = new Float32Array(expected);
  for (let i = 0; i < expected; i++) data[i] = raw.readFloatLE(off + 4 * i);
  return { dims, data };
}

export function writeTensor(t: Tensor, path: string): void {
  writeFileSync(path, encodeTensor(t));
}

export function readTensor(path: string): Tensor {
  return decodeTensor(readFileSync(path));
}
