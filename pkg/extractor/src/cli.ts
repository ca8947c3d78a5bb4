#!/usr/bin/env node
import { parseArgs } from "node:util";
import { extract } from "./extract.js";
import { DEFAULT_SEED } from "./backbone.js";

const USAGE = `usage: fsf-extract --images <dir> --out <file> [--batch-size N] [--seed N]

Embeds every decodable PNG/JPEG in <dir> and writes a binary feature table
to <file> with row IDs in <file>.ids, a skip list in <file>.skipped, and a
backbone manifest in <file>.manifest.json.`;

async function main(argv: string[]): Promise<number> {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        images: { type: "string" },
        out: { type: "string" },
        "batch-size": { type: "string", default: "16" },
        seed: { type: "string", default: String(DEFAULT_SEED) },
        help: { type: "boolean", default: false },
      },
    }));
  } catch (err) {
    console.error((err as Error).message);
    console.error(USAGE);
    return 2;
  }
  if (values.help) {
    console.log(USAGE);
    return 0;
  }
  if (!values.images || !values.out) {
    console.error("--images and --out are required");
    console.error(USAGE);
    return 2;
  }
  const batchSize = Number(values["batch-size"]);
  const seed = Number(values.seed);
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    console.error(`--batch-size must be a positive integer, got ${values["batch-size"]}`);
    return 2;
  }
  if (!Number.isInteger(seed) || seed < 0) {
    console.error(`--seed must be a non-negative integer, got ${values.seed}`);
    return 2;
  }

  try {
    const result = await extract({
      imageDir: values.images,
      out: values.out,
      batchSize,
      seed,
    });
    console.log(
      `wrote ${result.count} x ${result.dim} features to ${values.out}` +
        (result.skipped.length ? `, skipped ${result.skipped.length}` : ""),
    );
    return 0;
  } catch (err) {
    console.error((err as Error).message);
    return 1;
  }
}

main(process.argv.slice(2)).then((code) => {
  process.exitCode = code;
});
