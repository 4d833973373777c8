/** Two-panel scatter of the per-episode event posterior against the
 * door-opened flag and against the reward, with seeded jitter on the
 * binary axis for readability. */

import { readFileSync, existsSync } from 'fs'
import { parseCsv, numericColumn } from './csv.js'
import { HEIGHT, MARGIN, circle, document, frame, text } from './svg.js'
import { mulberry32 } from './prng.js'

export const JITTER_AMPLITUDE = 0.05
export const DEFAULT_JITTER_SEED = 20240

const PANEL_WIDTH = 720

export function renderScatter(scatterCsvPath: string, jitterSeed = DEFAULT_JITTER_SEED): string {
  if (!existsSync(scatterCsvPath)) throw new Error(`scatter file not found: ${scatterCsvPath}`)
  const table = parseCsv(readFileSync(scatterCsvPath, 'utf8'))
  for (const col of ['p_z', 'door_opened', 'reward']) {
    if (!table.header.includes(col)) {
      throw new Error(`scatter CSV is missing required column '${col}'`)
    }
  }
  const pz = numericColumn(table, 'p_z')
  const door = numericColumn(table, 'door_opened')
  const reward = numericColumn(table, 'reward')
  const rand = mulberry32(jitterSeed)

  const width = 2 * PANEL_WIDTH
  const panels: string[] = []
  const layouts = [
    { values: door, label: 'door opened', offset: 0 },
    { values: reward, label: 'reward', offset: PANEL_WIDTH },
  ]
  for (const { values, label, offset } of layouts) {
    const box = {
      x0: offset + MARGIN.left,
      x1: offset + PANEL_WIDTH - MARGIN.right,
      y0: HEIGHT - MARGIN.bottom,
      y1: MARGIN.top,
    }
    const f = frame([0, 1], [-0.2, 1.2], 'P(Z=1)', label, box)
    panels.push(...f.parts)
    for (let i = 0; i < pz.length; i++) {
      const jitter = (rand() - 0.5) * 2 * JITTER_AMPLITUDE
      panels.push(circle(f.x(pz[i]), f.y(values[i] + jitter), values[i] > 0.5 ? '#d62728' : '#1f77b4'))
    }
    panels.push(text(offset + PANEL_WIDTH / 2, 20, `${label} vs event posterior`))
  }
  return document(panels, width, HEIGHT)
}
