/**
 * Command-line entry point, following the consumer CLI's conventions:
 * subcommands with --flags, exit code 0 on success, one category-tagged
 * error line otherwise.
 *
 *   node dist/cli.js export-vocab --captions FILE --out DIR [--word-dim K]
 *       [--pretrained VECTORS.txt] [--min-count N]
 *   node dist/cli.js export-features --images DIR --captions FILE --out DIR
 *       [--channels C] [--split train|val|test] [--seed N]
 */

import { seededPyramid } from './backbone.js'
import { exportVisualFeatures, exportVocabEmbeddings } from './export.js'

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>()
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i]
    if (!key.startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`expected '--flag value' pairs, got ${argv.slice(i).join(' ')}`)
    }
    flags.set(key.slice(2), argv[i + 1])
  }
  return flags
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name)
  if (value === undefined) throw new Error(`missing required flag --${name}`)
  return value
}

async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv
  if (command === 'export-vocab') {
    const flags = parseFlags(rest)
    const result = await exportVocabEmbeddings(
      required(flags, 'captions'),
      required(flags, 'out'),
      parseInt(flags.get('word-dim') ?? '64', 10),
      flags.get('pretrained'),
      parseInt(flags.get('min-count') ?? '1', 10),
    )
    console.log(`vocabulary of ${result.vocab.words.length} tokens (incl. <unk>)`)
    console.log(`wrote ${result.tablePath} and ${result.vocabMapPath}`)
    return 0
  }
  if (command === 'export-features') {
    const flags = parseFlags(rest)
    const out = required(flags, 'out')
    const captions = required(flags, 'captions')
    const vocabExport = await exportVocabEmbeddings(
      captions, out, parseInt(flags.get('word-dim') ?? '64', 10), flags.get('pretrained'))
    const channels = parseInt(flags.get('channels') ?? '64', 10)
    const seed = parseInt(flags.get('seed') ?? '2024', 10)
    const split = (flags.get('split') ?? 'test') as 'train' | 'val' | 'test'
    const result = await exportVisualFeatures({
      imageDir: required(flags, 'images'),
      captionFile: captions,
      outDir: out,
      backbone: seededPyramid({ channels, seed }),
      split,
      log: line => console.log(line),
    }, vocabExport.vocab)
    console.log(`exported ${result.entries.length} items to ${result.fragmentPath}`
      + (result.skipped.length ? `, skipped ${result.skipped.length}` : ''))
    return 0
  }
  console.error('usage: cli.js <export-features|export-vocab> --flags ...')
  return 2
}

main(process.argv.slice(2))
  .then(code => process.exit(code))
  .catch(err => {
    console.error(`error[export]: ${(err as Error).message}`)
    process.exit(1)
  })
