import { describe, expect, it } from 'vitest';
import * as path from 'path';

import { decodeImage, loadAndPreprocess, preprocess } from './preprocess.js';
import { makeTempDir, writePatternPng } from './testutil.js';
import { Jimp } from 'jimp';

const P = {
  resizeTo: 256,
  cropTo: 224,
  mean: [0.485, 0.456, 0.406] as [number, number, number],
  std: [0.229, 0.224, 0.225] as [number, number, number],
};

describe('decodeImage', () => {
  it('decodes a png to an HxWx3 tensor in [0, 255]', async () => {
    const dir = await makeTempDir('decode');
    const file = path.join(dir, 'img.png');
    await writePatternPng(file, 40, 30, 1);
    const tensor = await decodeImage(file);
    expect(tensor.shape).toEqual([30, 40, 3]);
    const values = await tensor.data();
    expect(Math.min(...values)).toBeGreaterThanOrEqual(0);
    expect(Math.max(...values)).toBeLessThanOrEqual(255);
    tensor.dispose();
  });

  it('rejects files that are not images', async () => {
    const dir = await makeTempDir('bad');
    const file = path.join(dir, 'not-an-image.png');
    const fs = await import('fs/promises');
    await fs.writeFile(file, 'plain text, definitely not a png');
    await expect(decodeImage(file)).rejects.toThrow();
  });
});

describe('preprocess', () => {
  it('produces the crop size regardless of input aspect ratio', async () => {
    const dir = await makeTempDir('shapes');
    for (const [w, h] of [
      [64, 64],
      [100, 50],
      [50, 100],
    ]) {
      const file = path.join(dir, `img_${w}x${h}.png`);
      await writePatternPng(file, w, h, 2);
      const out = await loadAndPreprocess(file, P);
      expect(out.shape).toEqual([224, 224, 3]);
      out.dispose();
    }
  });

  it('normalizes a constant-color image to exact per-channel values', async () => {
    const dir = await makeTempDir('const');
    const file = path.join(dir, 'grey.png');
    const image = new Jimp({ width: 32, height: 32, color: 0x80402aff }); // r=128 g=64 b=42
    await image.write(file as `${string}.${string}`);
    const raw = await decodeImage(file);
    const out = preprocess(raw, P);
    raw.dispose();
    const values = await out.data();
    out.dispose();
    const expected = [
      (128 / 255 - P.mean[0]) / P.std[0],
      (64 / 255 - P.mean[1]) / P.std[1],
      (42 / 255 - P.mean[2]) / P.std[2],
    ];
    for (let c = 0; c < 3; c++) {
      expect(values[c]).toBeCloseTo(expected[c], 5);
      // same value at an arbitrary other pixel
      expect(values[1000 * 3 + c]).toBeCloseTo(expected[c], 5);
    }
  });
});
