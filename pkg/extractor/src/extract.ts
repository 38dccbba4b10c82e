/**
 * Directory-to-CSV extraction: every decodable image in the input directory
 * becomes one row of embeddings.csv (header id,e0..e{d-1}), with the file
 * stem as sample id. Undecodable files are skipped with a warning and listed
 * in a skipped.txt sidecar next to the output file.
 */

import * as tf from '@tensorflow/tfjs';
import { promises as fs } from 'fs';
import * as path from 'path';

import { Backbone, BackboneFamily, loadBackbone, LoadOptions } from './backbone.js';
import { loadAndPreprocess } from './preprocess.js';

export interface ExtractOptions extends LoadOptions {
  imagesDir: string;
  family: BackboneFamily;
  outPath: string;
  batchSize?: number;
  log?: (line: string) => void;
}

export interface ExtractResult {
  written: number;
  skipped: string[];
  dim: number;
}

function stem(filename: string): string {
  const ext = path.extname(filename);
  return ext ? filename.slice(0, -ext.length) : filename;
}

export async function extractDirectory(options: ExtractOptions): Promise<ExtractResult> {
  const log = options.log ?? ((line: string) => console.warn(line));
  const entries = (await fs.readdir(options.imagesDir, { withFileTypes: true }))
    .filter((e) => e.isFile())
    .map((e) => e.name)
    .sort();
  if (entries.length === 0) {
    throw new Error(`no files in image directory ${options.imagesDir}`);
  }
  const seen = new Map<string, string>();
  for (const name of entries) {
    const id = stem(name);
    const clash = seen.get(id);
    if (clash) {
      throw new Error(`duplicate sample id ${id} from files ${clash} and ${name}`);
    }
    seen.set(id, name);
  }

  const backbone = await loadBackbone(options.family, options);
  try {
    return await extractWithBackbone(backbone, entries, options, log);
  } finally {
    backbone.dispose();
  }
}

async function extractWithBackbone(
  backbone: Backbone,
  entries: string[],
  options: ExtractOptions,
  log: (line: string) => void,
): Promise<ExtractResult> {
  const batchSize = options.batchSize ?? 8;
  const skipped: string[] = [];
  const lines: string[] = [];
  const header = ['id'];
  for (let j = 0; j < backbone.dim; j++) header.push(`e${j}`);
  lines.push(header.join(','));

  let pendingIds: string[] = [];
  let pendingTensors: tf.Tensor3D[] = [];

  const flush = () => {
    if (pendingIds.length === 0) return;
    const batch = tf.stack(pendingTensors) as tf.Tensor4D;
    pendingTensors.forEach((t) => t.dispose());
    const features = backbone.embed(batch);
    batch.dispose();
    const [rows, width] = features.shape;
    if (width !== backbone.dim) {
      features.dispose();
      throw new Error(
        `backbone reported dim ${backbone.dim} but produced ${width} features`,
      );
    }
    const values = features.dataSync() as Float32Array;
    features.dispose();
    for (let r = 0; r < rows; r++) {
      const cells = [pendingIds[r]];
      for (let c = 0; c < width; c++) cells.push(String(values[r * width + c]));
      lines.push(cells.join(','));
    }
    pendingIds = [];
    pendingTensors = [];
  };

  for (const name of entries) {
    const file = path.join(options.imagesDir, name);
    try {
      pendingTensors.push(await loadAndPreprocess(file, backbone.preprocessing));
      pendingIds.push(stem(name));
    } catch (err) {
      skipped.push(name);
      log(`warning: skipping undecodable image ${name}: ${(err as Error).message}`);
      continue;
    }
    if (pendingIds.length >= batchSize) flush();
  }
  flush();

  const written = lines.length - 1;
  if (written === 0) {
    throw new Error(`no decodable images in ${options.imagesDir}`);
  }
  await fs.mkdir(path.dirname(path.resolve(options.outPath)), { recursive: true });
  await fs.writeFile(options.outPath, lines.join('\n') + '\n', 'utf8');
  if (skipped.length > 0) {
    const sidecar = path.join(path.dirname(path.resolve(options.outPath)), 'skipped.txt');
    await fs.writeFile(sidecar, skipped.join('\n') + '\n', 'utf8');
  }
  return { written, skipped, dim: backbone.dim };
}
