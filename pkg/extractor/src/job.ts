import { readFileSync } from "node:fs";
import { z } from "zod";

export const JobSchema = z.object({
  input_dir: z.string(),
  out_dir: z.string(),
  category: z.string().default("unknown"),
  tags: z.array(z.string()).default([]),
  tensor_shape: z.tuple([z.number().int().positive(),
                         z.number().int().positive(),
                         z.number().int().positive()]).default([16, 28, 28]),
});

export type Job = z.infer<typeof JobSchema>;

export function loadJob(path: string): Job {
  return JobSchema.parse(JSON.parse(readFileSync(path, "utf8")));
}
