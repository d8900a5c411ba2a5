import { mkdirSync, readdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { FEATURE_DIM, cropFeatures, cropToMask, lgstTensors, segmentMasks } from "./backend.js";
import { writeTensor } from "./cstf.js";
import { readPng } from "./image.js";
import type { Job } from "./job.js";
import { writeMaskSet, writePgm } from "./pgm.js";

export interface RunManifest {
  category: string;
  tags: string[];
  feature_dim: number;
  images: Record<string, {
    masks: string;
    grounding: string;
    features: string[];
    tensors: Record<string, string>;
  }>;
}

const TENSOR_ROLES = ["teacher", "local_local", "local_global", "global_student"] as const;

export function runJob(job: Job): RunManifest {
  const names = readdirSync(job.input_dir).filter((n) => n.endsWith(".png")).sort();
  if (names.length === 0) throw new Error(`no .png images in ${job.input_dir}`);
  for (const sub of ["masks", "grounding", "features", "tensors"]) {
    mkdirSync(join(job.out_dir, sub), { recursive: true });
  }
  const manifest: RunManifest = {
    category: job.category,
    tags: job.tags,
    feature_dim: FEATURE_DIM,
    images: {},
  };
  const tensorManifest: Record<string, Record<string, string>> = {};
  for (const name of names) {
    const id = name.replace(/\.png$/, "");
    const img = readPng(join(job.input_dir, name));

    const { masks, grounding } = segmentMasks(img);
    if (masks.length === 0) throw new Error(`${name}: no component proposals found`);
    writeMaskSet(masks, join(job.out_dir, "masks", id));
    const groundingFile = join("grounding", `${id}.pgm`);
    writePgm(
      { ...grounding, pixels: grounding.pixels.map((v) => (v ? 255 : 0)) },
      join(job.out_dir, groundingFile),
    );

    mkdirSync(join(job.out_dir, "features", id), { recursive: true });
    const featureFiles = masks.map((m, i) => {
      const rel = join("features", id, `crop_${String(i).padStart(4, "0")}.bin`);
      writeTensor(cropFeatures(cropToMask(img, m)), join(job.out_dir, rel));
      return rel;
    });

    const tensors = lgstTensors(img, job.tensor_shape);
    const tensorFiles: Record<string, string> = {};
    for (const role of TENSOR_ROLES) {
      const file = `${id}_${role}.bin`;
      writeTensor(tensors[role], join(job.out_dir, "tensors", file));
      tensorFiles[role] = file;
    }
    tensorManifest[id] = tensorFiles;

    manifest.images[id] = {
      masks: join("masks", id),
      grounding: groundingFile,
      features: featureFiles,
      tensors: Object.fromEntries(
        Object.entries(tensorFiles).map(([r, f]) => [r, join("tensors", f)]),
      ),
    };
  }
  writeFileSync(
    join(job.out_dir, "tensors", "manifest.json"),
    JSON.stringify(tensorManifest, null, 2),
  );
  writeFileSync(join(job.out_dir, "manifest.json"), JSON.stringify(manifest, null, 2));
  return manifest;
}
