#!/usr/bin/env node
import { loadJob } from "./job.js";
import { runJob } from "./run.js";

function usage(): never {
  console.error("usage: extractor run --job job.json");
  process.exit(2);
}

export function main(argv: string[]): number {
  if (argv[0] !== "run") usage();
  const flag = argv.indexOf("--job");
  if (flag < 0 || flag + 1 >= argv.length) usage();
  try {
    const manifest = runJob(loadJob(argv[flag + 1]));
    console.log(`extracted ${Object.keys(manifest.images).length} image(s)`);
    return 0;
  } catch (err) {
    console.error(`extractor: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
