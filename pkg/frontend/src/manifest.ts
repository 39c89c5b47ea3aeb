/**
 * Manifest fragments in the consumer's TSV format:
 *   id <TAB> feature_path <TAB> caption,tokens ... <TAB> split [<TAB> WxH]
 * Fragments from separate export runs concatenate into one manifest.
 */

import { writeFile } from 'fs/promises'

export type Split = 'train' | 'val' | 'test'

export interface ManifestEntry {
  itemId: string
  featurePath: string
  captions: number[][]
  split: Split
  imageDims?: [number, number] // (W, H)
}

export function manifestLine(entry: ManifestEntry): string {
  if (entry.captions.length === 0) {
    throw new Error(`item ${entry.itemId} has no captions`)
  }
  const cells = [entry.itemId, entry.featurePath]
  for (const caption of entry.captions) cells.push(caption.join(','))
  cells.push(entry.split)
  if (entry.imageDims) cells.push(`${entry.imageDims[0]}x${entry.imageDims[1]}`)
  return cells.join('\t')
}

export async function writeManifestFragment(path: string, entries: ManifestEntry[]): Promise<void> {
  await writeFile(path, entries.map(manifestLine).join('\n') + '\n')
}
