/**
 * Vocabulary building and word-embedding export.
 *
 * Tokenization is lowercase whitespace splitting. Index 0 is the reserved
 * unknown token; real words are assigned indices in descending frequency
 * (ties alphabetical) after an optional minimum-count cutoff. The embedding
 * table has one row per index: row 0 for unknown, then the words. Vectors
 * come from a pretrained text file when given (one `word v1 .. vk` line per
 * word, GloVe-style), falling back to seeded random vectors per word.
 */

import { readFile, writeFile } from 'fs/promises'

import { mulberry32, normalArray } from './prng.js'
import { Tensor } from './tensorfile.js'

export const UNKNOWN_TOKEN = 0
export const UNKNOWN_WORD = '<unk>'

export function tokenize(text: string): string[] {
  return text.toLowerCase().split(/\s+/).filter(w => w.length > 0)
}

export interface Vocabulary {
  words: string[] // index -> word; words[0] is the unknown marker
  index: Map<string, number>
}

export function buildVocabulary(captions: string[], minCount = 1): Vocabulary {
  const counts = new Map<string, number>()
  for (const caption of captions) {
    for (const word of tokenize(caption)) {
      counts.set(word, (counts.get(word) ?? 0) + 1)
    }
  }
  const kept = [...counts.entries()]
    .filter(([, count]) => count >= minCount)
    .sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1))
    .map(([word]) => word)
  if (kept.length === 0) throw new Error('empty vocabulary after frequency cutoff')
  const words = [UNKNOWN_WORD, ...kept]
  const index = new Map(words.map((word, i) => [word, i]))
  return { words, index }
}

export function encodeCaption(vocab: Vocabulary, caption: string): number[] {
  return tokenize(caption).map(word => vocab.index.get(word) ?? UNKNOWN_TOKEN)
}

export async function loadPretrainedVectors(path: string): Promise<Map<string, Float32Array>> {
  const vectors = new Map<string, Float32Array>()
  const text = await readFile(path, 'utf-8')
  for (const line of text.split('\n')) {
    const cells = line.trim().split(/\s+/)
    if (cells.length < 2) continue
    vectors.set(cells[0], Float32Array.from(cells.slice(1).map(Number)))
  }
  return vectors
}

export function embeddingTable(
  vocab: Vocabulary,
  dim: number,
  pretrained?: Map<string, Float32Array>,
  seed = 7,
): Tensor {
  const rows = vocab.words.length
  const data = new Float32Array(rows * dim)
  for (let row = 0; row < rows; row++) {
    const word = vocab.words[row]
    const hit = row === UNKNOWN_TOKEN ? undefined : pretrained?.get(word)
    if (hit) {
      if (hit.length !== dim) {
        throw new Error(`pretrained vector for ${word} has ${hit.length} dims, expected ${dim}`)
      }
      data.set(hit, row * dim)
    } else {
      // per-word seed keeps rows stable under vocabulary growth
      data.set(normalArray(mulberry32(seed ^ hashWord(word)), dim, 0.1), row * dim)
    }
  }
  return { dims: [rows, dim], data }
}

function hashWord(word: string): number {
  let h = 2166136261
  for (let i = 0; i < word.length; i++) {
    h ^= word.charCodeAt(i)
    h = Math.imul(h, 16777619)
  }
  return h >>> 0
}

export async function writeVocabMap(path: string, vocab: Vocabulary): Promise<void> {
  const lines = vocab.words.map((word, i) => `${i}\t${word}`)
  await writeFile(path, lines.join('\n') + '\n')
}
