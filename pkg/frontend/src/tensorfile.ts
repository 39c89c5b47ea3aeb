/**
 * Binary tensor container shared with the retrieval artifact.
 *
 * Layout (little-endian): magic "MHT1", dtype byte (0 = float32), rank byte,
 * rank x uint32 dims, then the row-major float32 payload. The reader here
 * validates exactly like the consumer does, so every exported file can be
 * checked for round-trip fidelity before it ships.
 */

import { readFile, writeFile } from 'fs/promises'

export const MAGIC = 'MHT1'
export const DTYPE_FLOAT32 = 0

export interface Tensor {
  dims: number[]
  data: Float32Array // row-major
}

export function encodeTensor(tensor: Tensor): Buffer {
  const count = tensor.dims.reduce((a, b) => a * b, 1)
  if (count !== tensor.data.length) {
    throw new Error(`dims ${tensor.dims} expect ${count} values, got ${tensor.data.length}`)
  }
  for (const value of tensor.data) {
    if (!Number.isFinite(value)) throw new Error('refusing to encode non-finite values')
  }
  for (const dim of tensor.dims) {
    if (!Number.isInteger(dim) || dim < 1 || dim >= 2 ** 32) {
      throw new Error(`dimension ${dim} not representable as uint32`)
    }
  }
  const header = Buffer.alloc(6 + 4 * tensor.dims.length)
  header.write(MAGIC, 0, 'ascii')
  header.writeUInt8(DTYPE_FLOAT32, 4)
  header.writeUInt8(tensor.dims.length, 5)
  tensor.dims.forEach((dim, i) => header.writeUInt32LE(dim, 6 + 4 * i))
  const payload = Buffer.alloc(4 * tensor.data.length)
  tensor.data.forEach((value, i) => payload.writeFloatLE(Math.fround(value), 4 * i))
  return Buffer.concat([header, payload])
}

export function decodeTensor(blob: Buffer): Tensor {
  if (blob.length < 6) throw new Error(`truncated header at byte ${blob.length}`)
  if (blob.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(blob.toString('ascii', 0, 4))} at byte 0`)
  }
  if (blob.readUInt8(4) !== DTYPE_FLOAT32) {
    throw new Error(`unknown dtype code ${blob.readUInt8(4)} at byte 4`)
  }
  const rank = blob.readUInt8(5)
  const dimsEnd = 6 + 4 * rank
  if (blob.length < dimsEnd) throw new Error(`truncated dims at byte ${blob.length}`)
  const dims: number[] = []
  for (let i = 0; i < rank; i++) dims.push(blob.readUInt32LE(6 + 4 * i))
  const count = dims.reduce((a, b) => a * b, 1)
  if (dims.some(d => d === 0)) throw new Error('zero dimension in header')
  if (blob.length - dimsEnd !== 4 * count) {
    throw new Error(`payload of ${blob.length - dimsEnd} bytes, header declares ${4 * count}`)
  }
  const data = new Float32Array(count)
  for (let i = 0; i < count; i++) data[i] = blob.readFloatLE(dimsEnd + 4 * i)
  return { dims, data }
}

export async function writeTensorFile(path: string, tensor: Tensor): Promise<void> {
  await writeFile(path, encodeTensor(tensor))
}

export async function readTensorFile(path: string): Promise<Tensor> {
  return decodeTensor(await readFile(path))
}
