/** Deterministic PRNG so exported backbone weights and embedding tables are
 * reproducible byte-for-byte across runs and machines. */

export type Rng = () => number

// mulberry32: small, fast, good enough for weight init
export function mulberry32(seed: number): Rng {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

/** Standard normal via Box-Muller. */
export function gaussian(rng: Rng): number {
  let u = 0
  while (u === 0) u = rng()
  return Math.sqrt(-2.0 * Math.log(u)) * Math.cos(2.0 * Math.PI * rng())
}

export function normalArray(rng: Rng, count: number, scale = 1.0): Float32Array {
  const out = new Float32Array(count)
  for (let i = 0; i < count; i++) out[i] = Math.fround(gaussian(rng) * scale)
  return out
}
