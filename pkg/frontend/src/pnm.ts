/**
 * Minimal binary PNM raster support: P5 (grayscale) and P6 (RGB), 8-bit.
 * The consumer side already emits P5 heatmaps; this is the input half, so
 * the exporter stays free of image-codec dependencies.
 */

import { readFile, writeFile } from 'fs/promises'

export interface Raster {
  width: number
  height: number
  channels: 1 | 3
  pixels: Uint8Array // row-major, interleaved channels
}

export function decodePnm(blob: Buffer): Raster {
  const header = blob.toString('latin1', 0, Math.min(blob.length, 64))
  const match = /^(P[56])\s+(\d+)\s+(\d+)\s+(\d+)\s/.exec(header)
  if (!match) throw new Error('not a binary PGM/PPM raster')
  const [, kind, w, h, maxval] = match
  if (maxval !== '255') throw new Error(`unsupported maxval ${maxval}`)
  const channels = kind === 'P5' ? 1 : 3
  const width = parseInt(w, 10)
  const height = parseInt(h, 10)
  const offset = match[0].length
  const expected = width * height * channels
  if (blob.length - offset !== expected) {
    throw new Error(`pixel payload of ${blob.length - offset} bytes, expected ${expected}`)
  }
  return { width, height, channels: channels as 1 | 3, pixels: new Uint8Array(blob.subarray(offset)) }
}

export function encodePnm(raster: Raster): Buffer {
  const kind = raster.channels === 1 ? 'P5' : 'P6'
  const header = Buffer.from(`${kind}\n${raster.width} ${raster.height}\n255\n`, 'ascii')
  return Buffer.concat([header, Buffer.from(raster.pixels)])
}

export async function readRaster(path: string): Promise<Raster> {
  return decodePnm(await readFile(path))
}

export async function writeRaster(path: string, raster: Raster): Promise<void> {
  await writeFile(path, encodePnm(raster))
}
