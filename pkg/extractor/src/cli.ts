/**
 * extract-embeddings --images <dir> --backbone <resnet18|dinov2-small>
 *                    --out embeddings.csv [--batch-size N] [--weights <dir>]
 *
 * Exit codes mirror the training CLI: 0 success, 2 usage/validation error.
 */

import { FAMILIES, BackboneFamily } from './backbone.js';
import { extractDirectory } from './extract.js';

const USAGE =
  'usage: extract-embeddings --images <dir> --backbone <resnet18|dinov2-small> ' +
  '--out <embeddings.csv> [--batch-size N] [--weights <tfjs model dir>]';

interface CliArgs {
  images: string;
  backbone: BackboneFamily;
  out: string;
  batchSize: number;
  weights?: string;
}

export function parseArgs(argv: string[]): CliArgs {
  const values = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith('--') || value === undefined) {
      throw new Error(USAGE);
    }
    values.set(flag.slice(2), value);
  }
  const images = values.get('images');
  const backbone = values.get('backbone') as BackboneFamily | undefined;
  const out = values.get('out');
  if (!images || !backbone || !out) throw new Error(USAGE);
  if (!FAMILIES.includes(backbone)) {
    throw new Error(`unknown backbone ${backbone}; choose one of ${FAMILIES.join(', ')}`);
  }
  const batchSize = Number(values.get('batch-size') ?? '8');
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new Error(`--batch-size must be a positive integer, got ${values.get('batch-size')}`);
  }
  const known = new Set(['images', 'backbone', 'out', 'batch-size', 'weights']);
  for (const flag of values.keys()) {
    if (!known.has(flag)) throw new Error(`unknown flag --${flag}\n${USAGE}`);
  }
  return { images, backbone, out, batchSize, weights: values.get('weights') };
}

export async function main(argv: string[]): Promise<number> {
  let args: CliArgs;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 2;
  }
  try {
    const result = await extractDirectory({
      imagesDir: args.images,
      family: args.backbone,
      outPath: args.out,
      batchSize: args.batchSize,
      weightsDir: args.weights,
    });
    console.log(
      `wrote ${result.written} embedding rows (d=${result.dim}) to ${args.out}` +
        (result.skipped.length ? `; skipped ${result.skipped.length} (see skipped.txt)` : ''),
    );
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;

if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
