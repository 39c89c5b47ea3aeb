/**
 * Cross-component acceptance: everything this exporter writes must be
 * consumed, unmodified, by the Python retrieval artifact -- the container
 * files bitwise, and the concatenated manifest by its `eval` subcommand.
 * Requires the primary package to be installed (pip install -e .. from the
 * repository root).
 */

import { execFileSync } from 'child_process'
import { mkdir, mkdtemp, readFile, writeFile } from 'fs/promises'
import { tmpdir } from 'os'
import * as path from 'path'

import { beforeAll, describe, expect, it } from 'vitest'

import { seededPyramid } from '../src/backbone.js'
import { exportVisualFeatures, exportVocabEmbeddings } from '../src/export.js'
import { encodePnm, Raster } from '../src/pnm.js'

const CHANNELS = 16
const WORD_DIM = 12

function python(script: string): string {
  return execFileSync('python3', ['-c', script], { encoding: 'utf-8' })
}

function raster(width: number, height: number, shift: number): Raster {
  const pixels = new Uint8Array(width * height * 3)
  for (let i = 0; i < pixels.length; i++) pixels[i] = (i * 13 + shift * 41) % 256
  return { width, height, channels: 3, pixels }
}

interface Rig {
  root: string
  manifest: string
  checkpoint: string
  vocabRows: number
  firstFeature: string
  sampleValue: number
}

let rig: Rig

beforeAll(async () => {
  const root = await mkdtemp(path.join(tmpdir(), 'export-rig-'))
  const imageDir = path.join(root, 'images')
  await mkdir(imageDir, { recursive: true })

  const captionLines: string[] = []
  for (let i = 0; i < 4; i++) {
    const id = `real${i}`
    await writeFile(path.join(imageDir, `${id}.ppm`), encodePnm(raster(64, 64, i)))
    for (let c = 0; c < 5; c++) {
      captionLines.push(`${id}\tthe object number ${i} seen from angle ${c}`)
    }
  }
  const captionFile = path.join(root, 'captions.tsv')
  await writeFile(captionFile, captionLines.join('\n') + '\n')

  const vocabExport = await exportVocabEmbeddings(captionFile, root, WORD_DIM)
  const backbone = seededPyramid({ channels: CHANNELS })

  // two fragments with different split tags, concatenated into one manifest
  const trainDir = path.join(root, 'train_part')
  const testDir = path.join(root, 'test_part')
  const trainExport = await exportVisualFeatures({
    imageDir, captionFile, outDir: trainDir, backbone, split: 'train',
  }, vocabExport.vocab)
  const testExport = await exportVisualFeatures({
    imageDir, captionFile, outDir: testDir, backbone, split: 'test',
  }, vocabExport.vocab)

  const fragments = [
    (await readFile(trainExport.fragmentPath, 'utf-8'))
      .replace(/^(\S+)\t(\S+)\t/gm, '$1_train\ttrain_part/$2\t'),
    (await readFile(testExport.fragmentPath, 'utf-8'))
      .replace(/^(\S+)\t(\S+)\t/gm, '$1_test\ttest_part/$2\t'),
  ]
  const manifest = path.join(root, 'manifest.tsv')
  await writeFile(manifest, fragments.join(''))

  // a checkpoint whose config matches the exported shapes, built by the
  // primary artifact itself (and seeded with the exported embedding table)
  const checkpoint = path.join(root, 'ckpt')
  const vocabRows = vocabExport.vocab.words.length
  python(`
from vsembed.config import ModelConfig, TrainRunConfig
from vsembed.model import init_model
from vsembed.training import save_checkpoint
cfg = ModelConfig(channels=${CHANNELS}, vocab_size=${vocabRows}, word_dim=${WORD_DIM},
                  embedding_table=${JSON.stringify(vocabExport.tablePath)})
model = init_model(cfg, seed=1)
save_checkpoint(model, ${JSON.stringify(checkpoint)}, cfg, TrainRunConfig(seed=1))
`)

  const firstFeature = path.join(testDir, testExport.entries[0].featurePath)
  const sample = await readFile(firstFeature)
  rig = {
    root,
    manifest,
    checkpoint,
    vocabRows,
    firstFeature,
    // feature value at flat index 5 of the payload (header is 18 bytes for rank 3)
    sampleValue: sample.readFloatLE(18 + 5 * 4),
  }
}, 120_000)

describe('primary-artifact integration', () => {
  it('feature files round-trip through the primary reader bitwise', () => {
    const out = python(`
from vsembed.dataio import read_tensor, write_tensor
import tempfile, os, filecmp
src = ${JSON.stringify(rig.firstFeature)}
tensor = read_tensor(src)
print(tensor.shape)
back = os.path.join(tempfile.mkdtemp(), "back.mht")
write_tensor(back, tensor)
print(open(src, "rb").read() == open(back, "rb").read())
`)
    expect(out).toContain('(2, 2, ' + CHANNELS + ')')
    expect(out).toContain('True')
  })

  it('a sampled value matches the exporter in-memory array', () => {
    const out = python(`
from vsembed.dataio import read_tensor
print(repr(float(read_tensor(${JSON.stringify(rig.firstFeature)}).reshape(-1)[5])))
`)
    expect(parseFloat(out)).toBeCloseTo(rig.sampleValue, 6)
  })

  it('the exported embedding table loads into the primary model', () => {
    const out = python(`
from vsembed.dataio import read_tensor
table = read_tensor(${JSON.stringify(path.join(rig.root, 'word_embeddings.mht'))})
print(table.shape)
`)
    expect(out.trim()).toBe(`(${rig.vocabRows}, ${WORD_DIM})`)
  })

  it('the concatenated manifest is accepted by the primary eval subcommand', () => {
    const out = execFileSync('python3', [
      '-m', 'vsembed.cli', 'eval',
      '--checkpoint', rig.checkpoint,
      '--manifest', rig.manifest,
      '--split', 'test',
    ], { encoding: 'utf-8' })
    expect(out).toContain('sentence-retrieval')
    expect(out).toContain('image-retrieval')
    expect(out).toContain('average diversity loss')
  })

  it('a 256x256 image yields an 8x8 map through the full pipeline', async () => {
    const bigDir = path.join(rig.root, 'big')
    await mkdir(bigDir, { recursive: true })
    await writeFile(path.join(bigDir, 'big0.ppm'), encodePnm(raster(256, 256, 9)))
    const captions = path.join(rig.root, 'big_captions.tsv')
    await writeFile(captions, 'big0\ta large test image\n')
    const vocabExport = await exportVocabEmbeddings(captions, bigDir, WORD_DIM)
    const result = await exportVisualFeatures({
      imageDir: bigDir, captionFile: captions, outDir: bigDir,
      backbone: seededPyramid({ channels: CHANNELS }),
    }, vocabExport.vocab)
    const out = python(`
from vsembed.dataio import read_tensor
print(read_tensor(${JSON.stringify(path.join(bigDir, result.entries[0].featurePath))}).shape)
`)
    expect(out.trim()).toBe(`(8, 8, ${CHANNELS})`)
  }, 60_000)
})
