import { describe, expect, it } from 'vitest'

import { decodeTensor, encodeTensor } from '../src/tensorfile.js'

describe('tensor container', () => {
  it('round-trips a rank-3 tensor bitwise', () => {
    const data = new Float32Array(24)
    for (let i = 0; i < data.length; i++) data[i] = Math.fround(Math.sin(i) * 3)
    const blob = encodeTensor({ dims: [2, 3, 4], data })
    const back = decodeTensor(blob)
    expect(back.dims).toEqual([2, 3, 4])
    expect(Buffer.from(back.data.buffer).equals(Buffer.from(data.buffer))).toBe(true)
  })

  it('writes the exact header bytes', () => {
    const blob = encodeTensor({ dims: [8, 8, 2], data: new Float32Array(128) })
    expect(blob.subarray(0, 4).toString('ascii')).toBe('MHT1')
    expect(blob.readUInt8(4)).toBe(0) // float32 code
    expect(blob.readUInt8(5)).toBe(3) // rank
    expect(blob.readUInt32LE(6)).toBe(8)
    expect(blob.readUInt32LE(10)).toBe(8)
    expect(blob.readUInt32LE(14)).toBe(2)
    expect(blob.length).toBe(6 + 12 + 128 * 4)
  })

  it('rejects corrupted blobs', () => {
    const clean = encodeTensor({ dims: [4], data: new Float32Array([1, 2, 3, 4]) })
    expect(() => decodeTensor(clean.subarray(0, 5) as Buffer)).toThrow(/truncated/)
    const badMagic = Buffer.from(clean)
    badMagic.write('NOPE', 0, 'ascii')
    expect(() => decodeTensor(badMagic)).toThrow(/bad magic/)
    const short = clean.subarray(0, clean.length - 2) as Buffer
    expect(() => decodeTensor(short)).toThrow(/payload/)
  })

  it('refuses non-finite values and bad dims', () => {
    expect(() => encodeTensor({ dims: [1], data: new Float32Array([NaN]) })).toThrow(/non-finite/)
    expect(() => encodeTensor({ dims: [2], data: new Float32Array(3) })).toThrow(/expect/)
  })
})
