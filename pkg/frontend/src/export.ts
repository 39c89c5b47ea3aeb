/**
 * The export pipeline: pretrained-style backbone features and vocabulary
 * embeddings, serialized in the consumer's container and manifest formats.
 *
 * Caption files are TSV: `image_id <TAB> caption text`, several lines per
 * image. Images are binary PGM/PPM rasters whose dimensions must be
 * divisible by 32; unreadable or indivisible images are skipped with a log
 * line, while write failures abort the run.
 */

import { mkdir, readdir, readFile } from 'fs/promises'
import * as path from 'path'

import { Backbone, STRIDE, extractFeatures, seededPyramid } from './backbone.js'
import { ManifestEntry, Split, writeManifestFragment } from './manifest.js'
import { decodePnm } from './pnm.js'
import { Tensor, writeTensorFile } from './tensorfile.js'
import {
  Vocabulary,
  buildVocabulary,
  embeddingTable,
  encodeCaption,
  loadPretrainedVectors,
  writeVocabMap,
} from './vocab.js'

export interface ExportJob {
  imageDir: string
  captionFile: string
  outDir: string
  backbone?: Backbone
  channels?: number
  split?: Split
  log?: (line: string) => void
}

export interface CaptionSet {
  byImage: Map<string, string[]>
  all: string[]
}

export async function readCaptions(captionFile: string): Promise<CaptionSet> {
  const byImage = new Map<string, string[]>()
  const all: string[] = []
  const text = await readFile(captionFile, 'utf-8')
  text.split('\n').forEach((line, i) => {
    if (!line.trim()) return
    const tab = line.indexOf('\t')
    if (tab < 1) throw new Error(`caption line ${i + 1}: expected 'id<TAB>text'`)
    const id = line.slice(0, tab)
    const caption = line.slice(tab + 1).trim()
    if (!byImage.has(id)) byImage.set(id, [])
    byImage.get(id)!.push(caption)
    all.push(caption)
  })
  return { byImage, all }
}

export interface VocabExport {
  vocab: Vocabulary
  table: Tensor
  tablePath: string
  vocabMapPath: string
}

export async function exportVocabEmbeddings(
  captionFile: string,
  outDir: string,
  wordDim: number,
  pretrainedPath?: string,
  minCount = 1,
): Promise<VocabExport> {
  const captions = await readCaptions(captionFile)
  const vocab = buildVocabulary(captions.all, minCount)
  const pretrained = pretrainedPath ? await loadPretrainedVectors(pretrainedPath) : undefined
  const table = embeddingTable(vocab, wordDim, pretrained)
  await mkdir(outDir, { recursive: true })
  const tablePath = path.join(outDir, 'word_embeddings.mht')
  const vocabMapPath = path.join(outDir, 'vocab.tsv')
  await writeTensorFile(tablePath, table)
  await writeVocabMap(vocabMapPath, vocab)
  return { vocab, table, tablePath, vocabMapPath }
}

export interface VisualExport {
  entries: ManifestEntry[]
  fragmentPath: string
  skipped: string[]
}

export async function exportVisualFeatures(job: ExportJob, vocab: Vocabulary): Promise<VisualExport> {
  const log = job.log ?? (() => undefined)
  const backbone = job.backbone ?? seededPyramid({ channels: job.channels ?? 64 })
  const captions = await readCaptions(job.captionFile)

  await mkdir(path.join(job.outDir, 'features'), { recursive: true })
  const names = (await readdir(job.imageDir)).filter(n => /\.(pgm|ppm)$/i.test(n)).sort()

  const entries: ManifestEntry[] = []
  const skipped: string[] = []
  for (const name of names) {
    const itemId = name.replace(/\.(pgm|ppm)$/i, '')
    const texts = captions.byImage.get(itemId)
    if (!texts || texts.length === 0) {
      skipped.push(itemId)
      log(`skip ${itemId}: no captions`)
      continue
    }
    let featureMap
    try {
      const raster = decodePnm(await readFile(path.join(job.imageDir, name)))
      featureMap = extractFeatures(backbone, raster)
    } catch (err) {
      skipped.push(itemId)
      log(`skip ${itemId}: ${(err as Error).message}`)
      continue
    }
    const featureName = path.join('features', `${itemId}.mht`)
    // write errors are fatal: a half-written dataset is worse than no dataset
    await writeTensorFile(path.join(job.outDir, featureName), {
      dims: [featureMap.height, featureMap.width, featureMap.channels],
      data: featureMap.values,
    })
    entries.push({
      itemId,
      featurePath: featureName,
      captions: texts.map(t => encodeCaption(vocab, t)),
      split: job.split ?? 'test',
      imageDims: [featureMap.width * STRIDE, featureMap.height * STRIDE],
    })
    log(`${itemId}: ${featureMap.height}x${featureMap.width}x${featureMap.channels}`)
  }
  const fragmentPath = path.join(job.outDir, 'manifest.tsv')
  await writeManifestFragment(fragmentPath, entries)
  return { entries, fragmentPath, skipped }
}
