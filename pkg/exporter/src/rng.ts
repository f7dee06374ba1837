/** Deterministic RNG and seeded tensor generation.
 *
 * mulberry32 is the shared stream between this tool and the service test
 * suite: golden input tensors are regenerated on both sides from a seed, so
 * no large input blobs need to be committed.
 */

export type Rand = () => number;

export function mulberry32(seed: number): Rand {
  let a = seed >>> 0;
  return function () {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t = (t ^ (t + Math.imul(t ^ (t >>> 7), t | 61))) >>> 0;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Uniform values in [-1, 1), rounded to float32, filled in C order. */
export function mb32Tensor(seed: number, count: number): Float32Array {
  const rand = mulberry32(seed);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = Math.fround(2 * rand() - 1);
  }
  return out;
}

/** Standard normal via Box-Muller on the mulberry32 stream. */
export function normal(rand: Rand): number {
  const u1 = 1 - rand(); // avoid log(0)
  const u2 = rand();
  return Math.sqrt(-2 * Math.log(u1)) * Math.cos(2 * Math.PI * u2);
}

export function normalTensor(rand: Rand, count: number, scale: number): Float32Array {
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = Math.fround(normal(rand) * scale);
  }
  return out;
}

export function heTensor(rand: Rand, count: number, fanIn: number): Float32Array {
  return normalTensor(rand, count, Math.sqrt(2 / fanIn));
}
