/** Markdown result tables aggregated over per-seed evaluation reports.
 *
 * The first table carries the six headline quantities per method, the
 * second the raw reward of each policy arm. Cells show mean plus/minus the
 * standard error over seeds (0 for a single seed).
 */

import { readFileSync, readdirSync, existsSync, statSync } from 'fs'
import { join } from 'path'

interface Estimate {
  value: number | null
  se: number | null
  count: number
}

interface EvalReport {
  e_y_z1: Estimate
  e_y_z0: Estimate
  delta_y: Estimate
  p_z_a: Estimate
  p_z_b: Estimate
  nie: Estimate
  e_y_pi_a: Estimate
  e_y_pi_b: Estimate
}

const TABLE1_COLUMNS = [
  ['e_y_z1', 'E[Y\\|Z=1]'],
  ['e_y_z0', 'E[Y\\|Z=0]'],
  ['delta_y', 'Delta_Y'],
  ['p_z_a', 'E_pi_a[Z]'],
  ['p_z_b', 'E_pi_b[Z]'],
  ['nie', 'NIE'],
] as const

const TABLE2_COLUMNS = [
  ['e_y_pi_a', 'E[Y\\|Pi=a]'],
  ['e_y_pi_b', 'E[Y\\|Pi=b]'],
] as const

export function loadReports(dir: string): EvalReport[] {
  if (!existsSync(dir)) throw new Error(`report directory not found: ${dir}`)
  const reports: EvalReport[] = []
  const entries = readdirSync(dir).sort()
  for (const entry of entries) {
    const seedDir = join(dir, entry)
    const reportPath = join(seedDir, 'eval_report.json')
    if (statSync(seedDir).isDirectory() && existsSync(reportPath)) {
      reports.push(JSON.parse(readFileSync(reportPath, 'utf8')) as EvalReport)
    }
  }
  if (existsSync(join(dir, 'eval_report.json'))) {
    reports.push(JSON.parse(readFileSync(join(dir, 'eval_report.json'), 'utf8')) as EvalReport)
  }
  if (reports.length === 0) throw new Error(`no eval_report.json found under ${dir}`)
  return reports
}

function meanAndSe(values: number[]): { mean: number; se: number } {
  const n = values.length
  const mean = values.reduce((a, b) => a + b, 0) / n
  if (n === 1) return { mean, se: 0 }
  const variance = values.reduce((a, b) => a + (b - mean) ** 2, 0) / (n - 1)
  return { mean, se: Math.sqrt(variance / n) }
}

function cell(reports: EvalReport[], field: keyof EvalReport): string {
  const values = reports
    .map(report => report[field].value)
    .filter((v): v is number => v !== null)
  if (values.length === 0) return 'n/a'
  const { mean, se } = meanAndSe(values)
  return `${mean.toFixed(3)} ± ${se.toFixed(3)}`
}

export function renderTables(causalDir: string, crossEntropyDir: string): string {
  const methods: Array<[string, EvalReport[]]> = [
    ['Causal Learner', loadReports(causalDir)],
    ['Cross-entropy', loadReports(crossEntropyDir)],
  ]
  const lines: string[] = []
  lines.push('## Held-out evaluation')
  lines.push('')
  lines.push(`| Method | ${TABLE1_COLUMNS.map(([, label]) => label).join(' | ')} |`)
  lines.push(`|---|${TABLE1_COLUMNS.map(() => '---').join('|')}|`)
  for (const [name, reports] of methods) {
    lines.push(`| ${name} | ${TABLE1_COLUMNS.map(([field]) => cell(reports, field)).join(' | ')} |`)
  }
  lines.push('')
  lines.push('## Reward by policy arm')
  lines.push('')
  lines.push(`| Method | ${TABLE2_COLUMNS.map(([, label]) => label).join(' | ')} |`)
  lines.push(`|---|${TABLE2_COLUMNS.map(() => '---').join('|')}|`)
  for (const [name, reports] of methods) {
    lines.push(`| ${name} | ${TABLE2_COLUMNS.map(([field]) => cell(reports, field)).join(' | ')} |`)
  }
  lines.push('')
  return lines.join('\n')
}
