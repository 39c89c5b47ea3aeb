import { describe, expect, it } from 'vitest'

import { extractFeatures, seededPyramid } from '../src/backbone.js'
import { Raster } from '../src/pnm.js'

function syntheticRaster(width: number, height: number, seedShift = 0): Raster {
  const pixels = new Uint8Array(width * height * 3)
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = (i * 31 + seedShift * 7) % 256
  }
  return { width, height, channels: 3, pixels }
}

describe('stride-32 backbone', () => {
  it('maps a 256x256 image to an 8x8 grid', () => {
    const backbone = seededPyramid({ channels: 48 })
    const features = extractFeatures(backbone, syntheticRaster(256, 256))
    expect([features.height, features.width, features.channels]).toEqual([8, 8, 48])
    expect(features.values.length).toBe(8 * 8 * 48)
    expect([...features.values].every(Number.isFinite)).toBe(true)
  })

  it('handles non-square inputs with the same stride relation', () => {
    const backbone = seededPyramid({ channels: 16 })
    const features = extractFeatures(backbone, syntheticRaster(96, 64))
    expect([features.height, features.width]).toEqual([2, 3])
  })

  it('is deterministic: identical images give identical maps', () => {
    const a = extractFeatures(seededPyramid({ channels: 24 }), syntheticRaster(64, 64))
    const b = extractFeatures(seededPyramid({ channels: 24 }), syntheticRaster(64, 64))
    expect(Buffer.from(a.values.buffer).equals(Buffer.from(b.values.buffer))).toBe(true)
  })

  it('responds to image content', () => {
    const backbone = seededPyramid({ channels: 24 })
    const a = extractFeatures(backbone, syntheticRaster(64, 64, 0))
    const b = extractFeatures(backbone, syntheticRaster(64, 64, 1))
    expect(Buffer.from(a.values.buffer).equals(Buffer.from(b.values.buffer))).toBe(false)
  })

  it('rejects dimensions not divisible by 32', () => {
    const backbone = seededPyramid({})
    expect(() => extractFeatures(backbone, syntheticRaster(100, 64))).toThrow(/stride/)
  })

  it('accepts grayscale rasters by channel replication', () => {
    const pixels = new Uint8Array(64 * 64)
    pixels.fill(100)
    const features = extractFeatures(
      seededPyramid({ channels: 8 }),
      { width: 64, height: 64, channels: 1, pixels })
    expect([features.height, features.width, features.channels]).toEqual([2, 2, 8])
  })
})
