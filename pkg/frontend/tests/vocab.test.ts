import { mkdtemp, writeFile } from 'fs/promises'
import { tmpdir } from 'os'
import * as path from 'path'

import { describe, expect, it } from 'vitest'

import { exportVocabEmbeddings } from '../src/export.js'
import { readTensorFile } from '../src/tensorfile.js'
import {
  UNKNOWN_TOKEN,
  buildVocabulary,
  embeddingTable,
  encodeCaption,
  tokenize,
} from '../src/vocab.js'

describe('tokenization and vocabulary', () => {
  it('lowercases and splits on whitespace', () => {
    expect(tokenize('A Dog  runs\tfast\n')).toEqual(['a', 'dog', 'runs', 'fast'])
  })

  it('one-word corpus gives the word plus the reserved unknown', () => {
    const vocab = buildVocabulary(['hello'])
    expect(vocab.words).toEqual(['<unk>', 'hello'])
    expect(vocab.index.get('hello')).toBe(1)
  })

  it('unknown token index 0 by convention', () => {
    const vocab = buildVocabulary(['a dog', 'a cat'])
    expect(UNKNOWN_TOKEN).toBe(0)
    expect(encodeCaption(vocab, 'a zebra')).toEqual([vocab.index.get('a'), 0])
  })

  it('frequency cutoff drops rare words', () => {
    const vocab = buildVocabulary(['dog dog dog cat'], 2)
    expect(vocab.words).toEqual(['<unk>', 'dog'])
  })

  it('orders by descending frequency, ties alphabetical', () => {
    const vocab = buildVocabulary(['b b a a c'])
    expect(vocab.words).toEqual(['<unk>', 'a', 'b', 'c'])
  })

  it('empty vocabulary is fatal', () => {
    expect(() => buildVocabulary(['rare'], 5)).toThrow(/empty vocabulary/)
  })

  it('embedding rows are deterministic per word', () => {
    const a = embeddingTable(buildVocabulary(['x y']), 8)
    const b = embeddingTable(buildVocabulary(['y x']), 8)
    expect(a.dims).toEqual([3, 8])
    // same words, same rows, regardless of corpus order
    expect(Buffer.from(a.data.buffer).equals(Buffer.from(b.data.buffer))).toBe(true)
  })

  it('uses pretrained vectors when provided', () => {
    const vocab = buildVocabulary(['dog'])
    const pretrained = new Map([['dog', Float32Array.from([1, 2, 3])]])
    const table = embeddingTable(vocab, 3, pretrained)
    expect([...table.data.slice(3, 6)]).toEqual([1, 2, 3])
  })
})

describe('vocabulary export', () => {
  it('writes a table the container reader accepts, plus the index map', async () => {
    const dir = await mkdtemp(path.join(tmpdir(), 'vocab-'))
    const captionFile = path.join(dir, 'captions.tsv')
    await writeFile(captionFile, 'img0\ta dog runs\nimg0\tthe dog sits\n')
    const result = await exportVocabEmbeddings(captionFile, dir, 12)
    const table = await readTensorFile(result.tablePath)
    expect(table.dims).toEqual([result.vocab.words.length, 12])
    expect(table.dims[0]).toBe(6) // <unk>, dog, a, runs, sits, the
  })
})
