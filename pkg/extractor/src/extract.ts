import { promises as fs } from "node:fs";
import path from "node:path";
import { Backbone, DEFAULT_SEED, FEATURE_DIM, describeBackbone } from "./backbone.js";
import { decodeImage } from "./decode.js";
import { saveFeatures } from "./format.js";

export interface ExtractOptions {
  /** Directory scanned (non-recursively) for images. */
  imageDir: string;
  /** Output feature table path; IDs go to `<out>.ids`. */
  out: string;
  /** Files read and decoded concurrently per batch. Order-invariant. */
  batchSize?: number;
  /** Backbone weight seed. Change only to define a new embedding space. */
  seed?: number;
}

export interface SkipEntry {
  file: string;
  reason: string;
}

export interface ExtractResult {
  count: number;
  dim: number;
  skipped: SkipEntry[];
}

export const SKIP_SUFFIX = ".skipped";
export const MANIFEST_SUFFIX = ".manifest.json";

/**
 * Embed every decodable image in a directory and write one feature table.
 *
 * Rows are ordered by sorted filename and identified by file basename.
 * Files that fail to decode are recorded in `<out>.skipped` (tab-separated
 * file and reason, one per line) instead of aborting the run. A manifest at
 * `<out>.manifest.json` pins the backbone and preprocessing so downstream
 * consumers can verify that two tables share an embedding space.
 */
export async function extract(options: ExtractOptions): Promise<ExtractResult> {
  const { imageDir, out } = options;
  const batchSize = options.batchSize ?? 16;
  const seed = options.seed ?? DEFAULT_SEED;
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new Error(`batchSize must be a positive integer, got ${batchSize}`);
  }

  const entries = await fs.readdir(imageDir, { withFileTypes: true });
  const names = entries
    .filter((e) => e.isFile())
    .map((e) => e.name)
    .sort();

  const backbone = new Backbone(seed);
  const ids: string[] = [];
  const rows: Float32Array[] = [];
  const skipped: SkipEntry[] = [];

  for (let start = 0; start < names.length; start += batchSize) {
    const batch = names.slice(start, start + batchSize);
    const buffers = await Promise.all(
      batch.map((name) => fs.readFile(path.join(imageDir, name))),
    );
    // Decode and embed in batch order so output rows stay filename-sorted.
    for (let i = 0; i < batch.length; i++) {
      try {
        rows.push(backbone.embed(decodeImage(buffers[i])));
        ids.push(batch[i]);
      } catch (err) {
        skipped.push({ file: batch[i], reason: (err as Error).message });
      }
    }
  }

  if (ids.length === 0) {
    throw new Error(`${imageDir}: no decodable images`);
  }

  const data = new Float32Array(ids.length * FEATURE_DIM);
  rows.forEach((row, i) => data.set(row, i * FEATURE_DIM));
  await saveFeatures({ ids, dim: FEATURE_DIM, data }, out);

  const skipLines = skipped.map((s) => `${s.file}\t${s.reason}`);
  await fs.writeFile(
    out + SKIP_SUFFIX,
    skipLines.length ? skipLines.join("\n") + "\n" : "",
    "utf-8",
  );

  const manifest = {
    version: 1,
    backbone: describeBackbone(seed),
    images: ids.length,
    skipped: skipped.length,
  };
  await fs.writeFile(out + MANIFEST_SUFFIX, JSON.stringify(manifest, null, 2) + "\n", "utf-8");

  return { count: ids.length, dim: FEATURE_DIM, skipped };
}
