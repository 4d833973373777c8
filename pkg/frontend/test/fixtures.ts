import { mkdtempSync, writeFileSync, mkdirSync } from 'fs'
import { tmpdir } from 'os'
import { join } from 'path'

export function tempDir(): string {
  return mkdtempSync(join(tmpdir(), 'plots-'))
}

export function writeTraceFixture(dir: string, states = 4): { trace: string; oracle: string } {
  const header = ['iteration', ...Array.from({ length: states }, (_, i) => `state_${i}`)].join(',')
  const rows = Array.from({ length: 20 }, (_, it) => {
    const values = Array.from({ length: states }, (_, s) => (0.1 * s + it / 40).toFixed(4))
    return [String(it * 10), ...values].join(',')
  })
  const trace = join(dir, 'trace_v1.csv')
  writeFileSync(trace, [header, ...rows].join('\n') + '\n')
  const oracle = join(dir, 'oracle.json')
  const series = Array.from({ length: states }, (_, s) => 0.1 * s + 0.5)
  writeFileSync(
    oracle,
    JSON.stringify({
      n_states: states,
      gamma: 1.0,
      phi: series,
      v: series,
      v_inf: series,
      v1: series,
      v0: series,
      v1_defined: Array(states).fill(true),
      v0_defined: Array(states).fill(true),
    }),
  )
  return { trace, oracle }
}

export function writeScatterFixture(dir: string, rows = 50): string {
  const lines = ['episode_seed,p_z,door_opened,reward']
  for (let i = 0; i < rows; i++) {
    const pz = (i / rows).toFixed(3)
    const door = i % 2
    const reward = door === 1 && i % 3 === 0 ? 1 : 0
    lines.push(`${1000000 + i},${pz},${door},${reward}.0`)
  }
  const path = join(dir, 'scatter.csv')
  writeFileSync(path, lines.join('\n') + '\n')
  return path
}

export function writeReportFixture(dir: string, method: string, seeds: number[], base = 0.4): string {
  const methodDir = join(dir, method)
  for (const seed of seeds) {
    const seedDir = join(methodDir, `seed_${seed}`)
    mkdirSync(seedDir, { recursive: true })
    const est = (v: number) => ({ value: v, se: 0.01, count: 100 })
    const e1 = base + seed * 0.01
    const e0 = 0.05
    const pa = 0.5
    const pb = 0.75
    const report = {
      e_y_z1: est(e1),
      e_y_z0: est(e0),
      delta_y: est(e1 - e0),
      p_z_a: est(pa),
      p_z_b: est(pb),
      nie: est((e1 - e0) * (pb - pa)),
      e_y_pi_a: est(0.24),
      e_y_pi_b: est(0.3),
      episodes: [],
    }
    writeFileSync(join(seedDir, 'eval_report.json'), JSON.stringify(report))
  }
  return methodDir
}
