import { promises as fs } from "node:fs";

/**
 * Binary feature table layout:
 *   bytes 0..3   magic "FSF1"
 *   bytes 4..7   row count n, uint32 little-endian
 *   bytes 8..11  feature dim d, uint32 little-endian
 *   then n * d float32 little-endian values, row-major
 * Row IDs live in a sidecar at `<path>.ids`, n newline-terminated lines.
 */

export const MAGIC = "FSF1";
export const IDS_SUFFIX = ".ids";

export interface FeatureTable {
  ids: string[];
  dim: number;
  /** Row-major, length ids.length * dim. */
  data: Float32Array;
}

export async function saveFeatures(table: FeatureTable, path: string): Promise<void> {
  const n = table.ids.length;
  if (n === 0 || table.dim === 0) {
    throw new Error("refusing to write an empty feature table");
  }
  if (table.data.length !== n * table.dim) {
    throw new Error(`data length ${table.data.length} != ${n} x ${table.dim}`);
  }
  const buf = Buffer.alloc(12 + 4 * n * table.dim);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(n, 4);
  buf.writeUInt32LE(table.dim, 8);
  for (let i = 0; i < table.data.length; i++) {
    buf.writeFloatLE(table.data[i], 12 + 4 * i);
  }
  await fs.writeFile(path, buf);
  await fs.writeFile(path + IDS_SUFFIX, table.ids.join("\n") + "\n", "utf-8");
}

export async function loadFeatures(path: string): Promise<FeatureTable> {
  const buf = await fs.readFile(path);
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad magic, not a ${MAGIC} feature file`);
  }
  const n = buf.readUInt32LE(4);
  const dim = buf.readUInt32LE(8);
  if (buf.length !== 12 + 4 * n * dim) {
    throw new Error(`${path}: payload size does not match header ${n}x${dim}`);
  }
  const data = new Float32Array(n * dim);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(12 + 4 * i);
  }
  const idsText = await fs.readFile(path + IDS_SUFFIX, "utf-8");
  const ids = idsText.split("\n");
  if (ids.length > 0 && ids[ids.length - 1] === "") {
    ids.pop();
  }
  if (ids.length !== n) {
    throw new Error(`${path}${IDS_SUFFIX}: ${ids.length} ids for ${n} rows`);
  }
  return { ids, dim, data };
}
