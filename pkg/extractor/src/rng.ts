/**
 * Deterministic PRNG for seeding backbone weights: mulberry32 for uniforms,
 * Box-Muller on top for normals. Integer-only state, so a given seed yields
 * the same weights on every platform and run.
 */

export interface Rng {
  uniform(): number; // [0, 1)
  normal(): number; // standard normal
}

export function createRng(seed: number): Rng {
  let a = seed >>> 0;
  let spare: number | null = null;

  const uniform = () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };

  const normal = () => {
    if (spare !== null) {
      const z = spare;
      spare = null;
      return z;
    }
    const u1 = 1 - uniform(); // (0, 1] so the log stays finite
    const u2 = uniform();
    const r = Math.sqrt(-2 * Math.log(u1));
    spare = r * Math.sin(2 * Math.PI * u2);
    return r * Math.cos(2 * Math.PI * u2);
  };

  return { uniform, normal };
}

/** Float32 buffer of normal draws scaled by stddev. */
export function normalArray(rng: Rng, size: number, stddev: number): Float32Array {
  const out = new Float32Array(size);
  for (let i = 0; i < size; i++) out[i] = rng.normal() * stddev;
  return out;
}
