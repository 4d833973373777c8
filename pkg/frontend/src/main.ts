/** CLI: plots traces|scatter|tables --in <dir> --out <dir> [--jitter-seed N] */

import { existsSync, mkdirSync, readdirSync, writeFileSync } from 'fs'
import { join } from 'path'
import { renderTraces } from './traces.js'
import { DEFAULT_JITTER_SEED, renderScatter } from './scatter.js'
import { renderTables } from './tables.js'

interface Args {
  command: string
  inDir: string
  outDir: string
  jitterSeed: number
}

function parseArgs(argv: string[]): Args {
  const [command, ...rest] = argv
  if (!command || !['traces', 'scatter', 'tables'].includes(command)) {
    throw new Error('usage: plots traces|scatter|tables --in <dir> --out <dir> [--jitter-seed N]')
  }
  let inDir = ''
  let outDir = ''
  let jitterSeed = DEFAULT_JITTER_SEED
  for (let i = 0; i < rest.length; i++) {
    if (rest[i] === '--in') inDir = rest[++i]
    else if (rest[i] === '--out') outDir = rest[++i]
    else if (rest[i] === '--jitter-seed') jitterSeed = Number(rest[++i])
    else throw new Error(`unknown flag ${rest[i]}`)
  }
  if (!inDir || !outDir) throw new Error('both --in and --out are required')
  return { command, inDir, outDir, jitterSeed }
}

function cmdTraces(inDir: string, outDir: string): string[] {
  const oracle = join(inDir, 'oracle.json')
  const written: string[] = []
  for (const file of readdirSync(inDir).sort()) {
    const match = file.match(/^trace_(.+)\.csv$/)
    if (!match) continue
    const svg = renderTraces(join(inDir, file), oracle, match[1])
    const out = join(outDir, `trace_${match[1]}.svg`)
    writeFileSync(out, svg)
    written.push(out)
  }
  if (written.length === 0) throw new Error(`no trace_*.csv files under ${inDir}`)
  return written
}

export function main(argv: string[]): number {
  const args = parseArgs(argv)
  mkdirSync(args.outDir, { recursive: true })
  const written: string[] = []
  if (args.command === 'traces') {
    written.push(...cmdTraces(args.inDir, args.outDir))
  } else if (args.command === 'scatter') {
    const svg = renderScatter(join(args.inDir, 'scatter.csv'), args.jitterSeed)
    const out = join(args.outDir, 'scatter.svg')
    writeFileSync(out, svg)
    written.push(out)
  } else {
    const markdown = renderTables(
      join(args.inDir, 'doorkey_causal'),
      join(args.inDir, 'doorkey_crossentropy'),
    )
    const out = join(args.outDir, 'tables.md')
    writeFileSync(out, markdown)
    written.push(out)
  }
  for (const path of written) console.log(path)
  return 0
}

const isDirectRun =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split('/').pop() ?? '!')
if (isDirectRun) {
  try {
    process.exit(main(process.argv.slice(2)))
  } catch (error) {
    console.error((error as Error).message)
    process.exit(1)
  }
}
