/**
 * Frozen image backbones that map preprocessed batches to embedding rows.
 *
 * Two families are offered, mirroring the standard architectures so the
 * feature width is whatever the instantiated model actually reports:
 *
 * - resnet18: conv stem + 4 stages of 2 basic blocks + global average
 *   pooling (512-wide features), built with the tfjs layers API;
 * - dinov2-small: a ViT-S/14 encoder (patch 14, embed dim 384, 12 blocks,
 *   6 heads, CLS token) built from raw ops.
 *
 * Offline builds use frozen seed-deterministic weights; a locally saved
 * tfjs layers model (model.json + weight shards) can be supplied instead
 * via `weightsDir` and is used as-is, with the feature width read from its
 * output shape.
 */

import * as tf from '@tensorflow/tfjs';
import { promises as fs } from 'fs';
import * as path from 'path';

import { Preprocessing } from './preprocess.js';
import { createRng, normalArray, Rng } from './rng.js';

export type BackboneFamily = 'resnet18' | 'dinov2-small';

export const FAMILIES: BackboneFamily[] = ['resnet18', 'dinov2-small'];

const IMAGENET_EVAL: Omit<Preprocessing, 'cropTo' | 'resizeTo'> = {
  mean: [0.485, 0.456, 0.406],
  std: [0.229, 0.224, 0.225],
};

export function preprocessingFor(family: BackboneFamily): Preprocessing {
  // both families use the standard eval transform of their reference
  // implementations: shorter side 256, center crop 224, ImageNet stats
  switch (family) {
    case 'resnet18':
    case 'dinov2-small':
      return { resizeTo: 256, cropTo: 224, ...IMAGENET_EVAL };
    default:
      throw new Error(`unknown backbone family ${family as string}`);
  }
}

export interface Backbone {
  family: BackboneFamily;
  preprocessing: Preprocessing;
  /** Feature width reported by the instantiated model, never assumed. */
  dim: number;
  /** [batch, crop, crop, 3] -> [batch, dim]; frozen, inference only. */
  embed(batch: tf.Tensor4D): tf.Tensor2D;
  dispose(): void;
}

export interface LoadOptions {
  /** Directory with a tfjs layers model (model.json + shards) to use
   * instead of the built-in seeded architecture. */
  weightsDir?: string;
  /** Seed for the built-in deterministic weights. */
  seed?: number;
}

export async function loadBackbone(
  family: BackboneFamily,
  options: LoadOptions = {},
): Promise<Backbone> {
  const preprocessing = preprocessingFor(family);
  if (options.weightsDir) {
    const model = await loadLocalLayersModel(options.weightsDir);
    return wrapLayersModel(family, preprocessing, model);
  }
  const seed = options.seed ?? 1;
  if (family === 'resnet18') {
    return wrapLayersModel(family, preprocessing, buildResnet18(preprocessing.cropTo, seed));
  }
  return buildVitSmall14(preprocessing, seed);
}

// --- resnet18 (layers API) ---------------------------------------------------

function wrapLayersModel(
  family: BackboneFamily,
  preprocessing: Preprocessing,
  model: tf.LayersModel,
): Backbone {
  const outputShape = model.outputs[0].shape;
  const dim = outputShape[outputShape.length - 1];
  if (typeof dim !== 'number' || outputShape.length !== 2) {
    throw new Error(
      `backbone must produce [batch, features], got shape ${JSON.stringify(outputShape)}`,
    );
  }
  return {
    family,
    preprocessing,
    dim,
    embed: (batch) => tf.tidy(() => model.predict(batch) as tf.Tensor2D),
    dispose: () => model.dispose(),
  };
}

export function buildResnet18(inputSize: number, seed: number): tf.LayersModel {
  let nextSeed = seed;
  const init = () => tf.initializers.heNormal({ seed: nextSeed++ });

  const convBn = (x: tf.SymbolicTensor, filters: number, kernel: number, stride: number) => {
    const conv = tf.layers
      .conv2d({
        filters,
        kernelSize: kernel,
        strides: stride,
        padding: 'same',
        useBias: false,
        kernelInitializer: init(),
      })
      .apply(x) as tf.SymbolicTensor;
    return tf.layers.batchNormalization({}).apply(conv) as tf.SymbolicTensor;
  };

  const basicBlock = (x: tf.SymbolicTensor, filters: number, stride: number) => {
    let out = convBn(x, filters, 3, stride);
    out = tf.layers.reLU().apply(out) as tf.SymbolicTensor;
    out = convBn(out, filters, 3, 1);
    const inChannels = x.shape[x.shape.length - 1];
    const shortcut =
      stride !== 1 || inChannels !== filters ? convBn(x, filters, 1, stride) : x;
    const added = tf.layers.add().apply([out, shortcut]) as tf.SymbolicTensor;
    return tf.layers.reLU().apply(added) as tf.SymbolicTensor;
  };

  const input = tf.input({ shape: [inputSize, inputSize, 3] });
  let x = convBn(input, 64, 7, 2);
  x = tf.layers.reLU().apply(x) as tf.SymbolicTensor;
  x = tf.layers
    .maxPooling2d({ poolSize: 3, strides: 2, padding: 'same' })
    .apply(x) as tf.SymbolicTensor;
  const stages: Array<[number, number]> = [
    [64, 1],
    [128, 2],
    [256, 2],
    [512, 2],
  ];
  for (const [filters, firstStride] of stages) {
    x = basicBlock(x, filters, firstStride);
    x = basicBlock(x, filters, 1);
  }
  const pooled = tf.layers.globalAveragePooling2d({}).apply(x) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: pooled });
}

// --- dinov2-small: ViT-S/14 from raw ops --------------------------------------

interface VitBlockWeights {
  ln1g: tf.Tensor1D;
  ln1b: tf.Tensor1D;
  qkvW: tf.Tensor2D;
  qkvB: tf.Tensor1D;
  projW: tf.Tensor2D;
  projB: tf.Tensor1D;
  ln2g: tf.Tensor1D;
  ln2b: tf.Tensor1D;
  fc1W: tf.Tensor2D;
  fc1B: tf.Tensor1D;
  fc2W: tf.Tensor2D;
  fc2B: tf.Tensor1D;
}

const VIT_SMALL = { patch: 14, embedDim: 384, depth: 12, heads: 6, mlpRatio: 4 };

function buildVitSmall14(preprocessing: Preprocessing, seed: number): Backbone {
  const { patch, embedDim, depth, heads, mlpRatio } = VIT_SMALL;
  const tokens = (preprocessing.cropTo / patch) ** 2; // 16 * 16 = 256
  const rng = createRng(seed);
  const owned: tf.Tensor[] = [];
  const keep = <T extends tf.Tensor>(t: T): T => {
    owned.push(t);
    return t;
  };
  const weight = (shape: number[], fanIn: number): tf.Tensor =>
    keep(tf.tensor(normalArray(rng, shape.reduce((a, b) => a * b, 1), Math.sqrt(2 / fanIn)), shape));
  const zeros = (shape: number[]) => keep(tf.zeros(shape));
  const ones = (shape: number[]) => keep(tf.ones(shape));

  const patchW = weight([patch, patch, 3, embedDim], patch * patch * 3) as tf.Tensor4D;
  const patchB = zeros([embedDim]) as tf.Tensor1D;
  const clsToken = weight([1, 1, embedDim], embedDim) as tf.Tensor3D;
  const posEmbed = weight([1, tokens + 1, embedDim], embedDim) as tf.Tensor3D;
  const blocks: VitBlockWeights[] = [];
  for (let i = 0; i < depth; i++) {
    blocks.push({
      ln1g: ones([embedDim]) as tf.Tensor1D,
      ln1b: zeros([embedDim]) as tf.Tensor1D,
      qkvW: weight([embedDim, 3 * embedDim], embedDim) as tf.Tensor2D,
      qkvB: zeros([3 * embedDim]) as tf.Tensor1D,
      projW: weight([embedDim, embedDim], embedDim) as tf.Tensor2D,
      projB: zeros([embedDim]) as tf.Tensor1D,
      ln2g: ones([embedDim]) as tf.Tensor1D,
      ln2b: zeros([embedDim]) as tf.Tensor1D,
      fc1W: weight([embedDim, mlpRatio * embedDim], embedDim) as tf.Tensor2D,
      fc1B: zeros([mlpRatio * embedDim]) as tf.Tensor1D,
      fc2W: weight([mlpRatio * embedDim, embedDim], mlpRatio * embedDim) as tf.Tensor2D,
      fc2B: zeros([embedDim]) as tf.Tensor1D,
    });
  }
  const lnFg = ones([embedDim]) as tf.Tensor1D;
  const lnFb = zeros([embedDim]) as tf.Tensor1D;

  const layerNorm = (x: tf.Tensor3D, g: tf.Tensor1D, b: tf.Tensor1D) => {
    const { mean, variance } = tf.moments(x, -1, true);
    return x.sub(mean).div(variance.add(1e-6).sqrt()).mul(g).add(b) as tf.Tensor3D;
  };

  const gelu = (x: tf.Tensor) => x.mul(0.5).mul(tf.erf(x.div(Math.SQRT2)).add(1));

  const attention = (x: tf.Tensor3D, w: VitBlockWeights, batch: number) => {
    const t = x.shape[1];
    const dh = embedDim / heads;
    const qkv = x
      .reshape([batch * t, embedDim])
      .matMul(w.qkvW)
      .add(w.qkvB)
      .reshape([batch, t, 3, heads, dh])
      .transpose([2, 0, 3, 1, 4]); // [3, B, heads, T, dh]
    const [q, k, v] = tf.unstack(qkv, 0) as tf.Tensor4D[];
    const scores = tf.matMul(q, k, false, true).div(Math.sqrt(dh));
    const att = tf.softmax(scores, -1);
    const ctx = tf
      .matMul(att, v) // [B, heads, T, dh]
      .transpose([0, 2, 1, 3])
      .reshape([batch * t, embedDim]);
    return ctx.matMul(w.projW).add(w.projB).reshape([batch, t, embedDim]) as tf.Tensor3D;
  };

  const embed = (batch: tf.Tensor4D): tf.Tensor2D =>
    tf.tidy(() => {
      const b = batch.shape[0];
      const patches = tf
        .conv2d(batch, patchW, patch, 'valid')
        .add(patchB)
        .reshape([b, tokens, embedDim]) as tf.Tensor3D;
      let x = tf.concat([clsToken.tile([b, 1, 1]), patches], 1).add(posEmbed) as tf.Tensor3D;
      for (const w of blocks) {
        x = x.add(attention(layerNorm(x, w.ln1g, w.ln1b), w, b)) as tf.Tensor3D;
        const h = layerNorm(x, w.ln2g, w.ln2b)
          .reshape([b * (tokens + 1), embedDim])
          .matMul(w.fc1W)
          .add(w.fc1B);
        const mlp = gelu(h).matMul(w.fc2W).add(w.fc2B).reshape([b, tokens + 1, embedDim]);
        x = x.add(mlp) as tf.Tensor3D;
      }
      const final = layerNorm(x, lnFg, lnFb);
      return final.slice([0, 0, 0], [b, 1, embedDim]).reshape([b, embedDim]) as tf.Tensor2D;
    });

  return {
    family: 'dinov2-small',
    preprocessing,
    dim: embedDim,
    embed,
    dispose: () => owned.forEach((t) => t.dispose()),
  };
}

// --- local tfjs layers-model IO (no network) -----------------------------------

export async function loadLocalLayersModel(dir: string): Promise<tf.LayersModel> {
  const manifestPath = path.join(dir, 'model.json');
  const manifest = JSON.parse(await fs.readFile(manifestPath, 'utf8'));
  const weightSpecs: tf.io.WeightsManifestEntry[] = [];
  const buffers: Buffer[] = [];
  for (const group of manifest.weightsManifest ?? []) {
    weightSpecs.push(...group.weights);
    for (const shard of group.paths) {
      buffers.push(await fs.readFile(path.join(dir, shard)));
    }
  }
  const weightData = new Uint8Array(Buffer.concat(buffers)).buffer;
  return tf.loadLayersModel({
    load: async () => ({
      modelTopology: manifest.modelTopology,
      format: manifest.format,
      generatedBy: manifest.generatedBy,
      convertedBy: manifest.convertedBy,
      weightSpecs,
      weightData,
    }),
  });
}

export async function saveLocalLayersModel(model: tf.LayersModel, dir: string): Promise<void> {
  await fs.mkdir(dir, { recursive: true });
  await model.save({
    save: async (artifacts) => {
      const weightData = artifacts.weightData as ArrayBuffer;
      await fs.writeFile(path.join(dir, 'weights.bin'), Buffer.from(weightData));
      const manifest = {
        modelTopology: artifacts.modelTopology,
        format: artifacts.format,
        generatedBy: artifacts.generatedBy,
        convertedBy: artifacts.convertedBy,
        weightsManifest: [{ paths: ['weights.bin'], weights: artifacts.weightSpecs }],
      };
      await fs.writeFile(path.join(dir, 'model.json'), JSON.stringify(manifest));
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } };
    },
  });
}
