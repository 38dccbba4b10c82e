/**
 * Image decoding and the eval-time preprocessing pipeline: resize the
 * shorter side, center-crop, scale to [0,1], normalize per channel.
 */

import * as tf from '@tensorflow/tfjs';
import { Jimp } from 'jimp';

export interface Preprocessing {
  resizeTo: number; // shorter-side target
  cropTo: number; // square center crop
  mean: [number, number, number];
  std: [number, number, number];
}

/** Decode an image file to an RGB float tensor in [0, 255]. Throws on files
 * that are not decodable images. */
export async function decodeImage(path: string): Promise<tf.Tensor3D> {
  const image = await Jimp.read(path);
  const { width, height, data } = image.bitmap; // RGBA bytes
  const rgb = new Float32Array(width * height * 3);
  for (let i = 0, j = 0; i < data.length; i += 4, j += 3) {
    rgb[j] = data[i];
    rgb[j + 1] = data[i + 1];
    rgb[j + 2] = data[i + 2];
  }
  return tf.tensor3d(rgb, [height, width, 3]);
}

/** Shorter-side resize (bilinear), center crop, [0,1] scaling, then
 * per-channel normalization. Returns [crop, crop, 3]. */
export function preprocess(image: tf.Tensor3D, p: Preprocessing): tf.Tensor3D {
  return tf.tidy(() => {
    const [h, w] = image.shape;
    const scale = p.resizeTo / Math.min(h, w);
    const rh = Math.max(p.cropTo, Math.round(h * scale));
    const rw = Math.max(p.cropTo, Math.round(w * scale));
    const resized = tf.image.resizeBilinear(image, [rh, rw]);
    const top = Math.floor((rh - p.cropTo) / 2);
    const left = Math.floor((rw - p.cropTo) / 2);
    const cropped = tf.slice(resized, [top, left, 0], [p.cropTo, p.cropTo, 3]);
    const unit = cropped.div(255);
    return unit.sub(tf.tensor1d(p.mean)).div(tf.tensor1d(p.std)) as tf.Tensor3D;
  });
}

export async function loadAndPreprocess(path: string, p: Preprocessing): Promise<tf.Tensor3D> {
  const raw = await decodeImage(path);
  const out = preprocess(raw, p);
  raw.dispose();
  return out;
}
