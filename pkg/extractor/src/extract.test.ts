import { describe, expect, it } from 'vitest';
import { execFile } from 'child_process';
import { promises as fs } from 'fs';
import * as path from 'path';
import { promisify } from 'util';

import { main, parseArgs } from './cli.js';
import { extractDirectory } from './extract.js';
import { makeTempDir, readCsv, writePatternPng } from './testutil.js';

const run = promisify(execFile);

async function imageDir(count: number, tag: string): Promise<string> {
  const dir = await makeTempDir(tag);
  for (let i = 0; i < count; i++) {
    await writePatternPng(path.join(dir, `embryo_${i}.png`), 48, 48, i);
  }
  return dir;
}

describe('extractDirectory', () => {
  it('writes one row per image with the backbone-reported width', async () => {
    const images = await imageDir(3, 'rows');
    const out = await makeTempDir('rows-out');
    const result = await extractDirectory({
      imagesDir: images,
      family: 'resnet18',
      outPath: path.join(out, 'embeddings.csv'),
    });
    expect(result.written).toBe(3);
    expect(result.skipped).toEqual([]);
    const rows = await readCsv(path.join(out, 'embeddings.csv'));
    expect(rows[0]).toEqual(['id', ...Array.from({ length: result.dim }, (_, j) => `e${j}`)]);
    expect(rows).toHaveLength(4);
    expect(rows.slice(1).map((r) => r[0])).toEqual(['embryo_0', 'embryo_1', 'embryo_2']);
    for (const row of rows.slice(1)) {
      expect(row).toHaveLength(result.dim + 1);
      expect(row.slice(1).every((cell) => Number.isFinite(Number(cell)))).toBe(true);
    }
  });

  it('gives identical rows for identical images and identical bytes across runs', async () => {
    const images = await makeTempDir('dup');
    await writePatternPng(path.join(images, 'one.png'), 40, 40, 7);
    await fs.copyFile(path.join(images, 'one.png'), path.join(images, 'two.png'));
    const out = await makeTempDir('dup-out');
    const first = path.join(out, 'first.csv');
    const second = path.join(out, 'second.csv');
    await extractDirectory({ imagesDir: images, family: 'resnet18', outPath: first });
    await extractDirectory({ imagesDir: images, family: 'resnet18', outPath: second });

    const rows = await readCsv(first);
    expect(rows[1].slice(1)).toEqual(rows[2].slice(1)); // duplicate image, same row
    expect(await fs.readFile(first, 'utf8')).toBe(await fs.readFile(second, 'utf8'));
  });

  it('skips undecodable files, lists them in skipped.txt, and keeps going', async () => {
    const images = await imageDir(2, 'skip');
    await fs.writeFile(path.join(images, 'broken.png'), 'not an image at all');
    const out = await makeTempDir('skip-out');
    const warnings: string[] = [];
    const result = await extractDirectory({
      imagesDir: images,
      family: 'resnet18',
      outPath: path.join(out, 'embeddings.csv'),
      log: (line) => warnings.push(line),
    });
    expect(result.written).toBe(2);
    expect(result.skipped).toEqual(['broken.png']);
    expect(warnings.join('\n')).toContain('broken.png');
    const sidecar = await fs.readFile(path.join(out, 'skipped.txt'), 'utf8');
    expect(sidecar.trim()).toBe('broken.png');
  });

  it('fails on an empty directory', async () => {
    const images = await makeTempDir('empty');
    const out = await makeTempDir('empty-out');
    await expect(
      extractDirectory({
        imagesDir: images,
        family: 'resnet18',
        outPath: path.join(out, 'embeddings.csv'),
      }),
    ).rejects.toThrow(/no files/);
  });

  it('fails when two files share a stem', async () => {
    const images = await makeTempDir('clash');
    await writePatternPng(path.join(images, 'a.png'), 32, 32, 1);
    await writePatternPng(path.join(images, 'a.jpeg.png'), 32, 32, 2);
    await fs.rename(path.join(images, 'a.jpeg.png'), path.join(images, 'a.jpeg'));
    const out = await makeTempDir('clash-out');
    await expect(
      extractDirectory({
        imagesDir: images,
        family: 'resnet18',
        outPath: path.join(out, 'embeddings.csv'),
      }),
    ).rejects.toThrow(/duplicate sample id a/);
  });

  it('round-trips through the training toolkit dataset loader', async () => {
    const images = await imageDir(3, 'roundtrip');
    const out = await makeTempDir('roundtrip-out');
    const emb = path.join(out, 'embeddings.csv');
    const result = await extractDirectory({
      imagesDir: images,
      family: 'resnet18',
      outPath: emb,
    });
    const grades = [
      ['embryo_0', 'A', 'B', '0'],
      ['embryo_1', 'B', 'A', '2'],
      ['embryo_2', 'A', 'A', '1'],
    ];
    const lab = path.join(out, 'labels.csv');
    await fs.writeFile(
      lab,
      'id,te,icm,exp\n' + grades.map((g) => g.join(',')).join('\n') + '\n',
    );
    const script = [
      'import sys',
      'from memebg.data import load_dataset',
      'ds = load_dataset(sys.argv[1], sys.argv[2])',
      'print(f"{ds.n} {ds.dim}")',
    ].join('\n');
    const { stdout } = await run('python3', ['-c', script, emb, lab]);
    expect(stdout.trim()).toBe(`3 ${result.dim}`);
  });
});

describe('cli', () => {
  it('parses the documented flags', () => {
    const args = parseArgs([
      '--images', '/tmp/imgs',
      '--backbone', 'dinov2-small',
      '--out', '/tmp/e.csv',
      '--batch-size', '4',
    ]);
    expect(args).toEqual({
      images: '/tmp/imgs',
      backbone: 'dinov2-small',
      out: '/tmp/e.csv',
      batchSize: 4,
      weights: undefined,
    });
  });

  it('exits 2 on usage errors', async () => {
    expect(await main(['--images', '/tmp/x'])).toBe(2);
    expect(await main(['--images', '/tmp/x', '--backbone', 'vgg', '--out', 'e.csv'])).toBe(2);
  });

  it('exits 2 on an empty image directory', async () => {
    const images = await makeTempDir('cli-empty');
    const out = await makeTempDir('cli-empty-out');
    expect(
      await main([
        '--images', images,
        '--backbone', 'resnet18',
        '--out', path.join(out, 'e.csv'),
      ]),
    ).toBe(2);
  });

  it('runs the full extraction end to end', async () => {
    const images = await imageDir(2, 'cli-e2e');
    const out = await makeTempDir('cli-e2e-out');
    const code = await main([
      '--images', images,
      '--backbone', 'resnet18',
      '--out', path.join(out, 'embeddings.csv'),
    ]);
    expect(code).toBe(0);
    const rows = await readCsv(path.join(out, 'embeddings.csv'));
    expect(rows).toHaveLength(3);
  });
});
