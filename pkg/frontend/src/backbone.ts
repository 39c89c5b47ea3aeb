/**
 * Stride-32 convolutional feature extractors.
 *
 * A backbone maps a [1, H, W, C] image batch to a [1, H/32, W/32, channels]
 * feature map -- the stride relation the downstream artifact validates. The
 * default is a five-level strided convolution pyramid with deterministic
 * seeded weights: it ships no pretrained knowledge, but it exercises the
 * whole export pipeline offline and produces stable, content-dependent maps.
 * Anything implementing `Backbone` (e.g. a real pretrained graph model) can
 * be swapped in.
 */

import * as tf from '@tensorflow/tfjs'

import { Raster } from './pnm.js'
import { mulberry32, normalArray } from './prng.js'

export const STRIDE = 32

export interface Backbone {
  name: string
  channels: number
  /** [1, H, W, C] in [0, 1] -> [1, H/32, W/32, channels] */
  run(image: tf.Tensor4D): tf.Tensor4D
}

export interface PyramidOptions {
  channels?: number
  seed?: number
  inputChannels?: number
}

/** Five stride-2 3x3 convolutions with relu between levels (total stride 32). */
export function seededPyramid(options: PyramidOptions = {}): Backbone {
  const channels = options.channels ?? 64
  const seed = options.seed ?? 2024
  const inputChannels = options.inputChannels ?? 3
  const widths = [8, 16, 32, 64, channels]
  const rng = mulberry32(seed)

  const kernels: tf.Tensor4D[] = []
  let inCh = inputChannels
  for (const outCh of widths) {
    const fanIn = 3 * 3 * inCh
    const values = normalArray(rng, 3 * 3 * inCh * outCh, Math.sqrt(2.0 / fanIn))
    kernels.push(tf.tensor4d(values, [3, 3, inCh, outCh]))
    inCh = outCh
  }

  return {
    name: `pyramid-v1-seed${seed}`,
    channels,
    run(image: tf.Tensor4D): tf.Tensor4D {
      return tf.tidy(() => {
        let x = image
        kernels.forEach((kernel, level) => {
          x = tf.conv2d(x, kernel, [2, 2], 'same')
          if (level < kernels.length - 1) x = tf.relu(x)
        })
        return x as tf.Tensor4D
      })
    },
  }
}

export function rasterToTensor(raster: Raster): tf.Tensor4D {
  const { width, height, channels, pixels } = raster
  const values = new Float32Array(pixels.length)
  for (let i = 0; i < pixels.length; i++) values[i] = pixels[i] / 255.0
  const mono = tf.tensor4d(values, [1, height, width, channels])
  if (channels === 3) return mono
  // grayscale rasters are replicated to the backbone's 3 input channels
  return tf.tidy(() => tf.concat([mono, mono, mono], 3) as tf.Tensor4D)
}

export interface FeatureMap {
  height: number
  width: number
  channels: number
  /** row-major (h, w, c) */
  values: Float32Array
}

export function extractFeatures(backbone: Backbone, raster: Raster): FeatureMap {
  if (raster.width % STRIDE || raster.height % STRIDE) {
    throw new Error(
      `image ${raster.width}x${raster.height} not divisible by stride ${STRIDE}`)
  }
  const input = rasterToTensor(raster)
  const output = backbone.run(input)
  const [, h, w, c] = output.shape
  const values = output.dataSync() as Float32Array
  input.dispose()
  output.dispose()
  return { height: h, width: w, channels: c, values: Float32Array.from(values) }
}
