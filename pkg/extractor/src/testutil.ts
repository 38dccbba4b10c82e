/** Shared helpers for the test suites: tiny deterministic PNG fixtures. */

import { Jimp } from 'jimp';
import { promises as fs } from 'fs';
import * as os from 'os';
import * as path from 'path';

/** Write a small PNG with a deterministic per-pixel pattern. */
export async function writePatternPng(
  file: string,
  width: number,
  height: number,
  phase: number,
): Promise<void> {
  const image = new Jimp({ width, height, color: 0xffffffff });
  const { data } = image.bitmap;
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 4;
      data[i] = (x * 7 + phase * 13) % 256;
      data[i + 1] = (y * 11 + phase * 29) % 256;
      data[i + 2] = (x * y + phase) % 256;
      data[i + 3] = 255;
    }
  }
  await image.write(file as `${string}.${string}`);
}

export async function makeTempDir(tag: string): Promise<string> {
  return fs.mkdtemp(path.join(os.tmpdir(), `extractor-${tag}-`));
}

export async function readCsv(file: string): Promise<string[][]> {
  const text = await fs.readFile(file, 'utf8');
  return text
    .trim()
    .split('\n')
    .map((line) => line.split(','));
}
