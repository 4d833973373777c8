/** Training-trace figures: one solid line per state with a dashed horizontal
 * line at each state's analytic value. */

import { readFileSync, existsSync } from 'fs'
import { parseCsv, numericColumn } from './csv.js'
import { PALETTE, document, frame, polyline } from './svg.js'

export interface OracleData {
  v: number[]
  v_inf: number[]
  v1: number[]
  v0: number[]
  phi: number[]
  v1_defined?: boolean[]
  v0_defined?: boolean[]
  n_states: number
}

export function loadOracle(path: string): OracleData {
  if (!existsSync(path)) throw new Error(`oracle file not found: ${path}`)
  const data = JSON.parse(readFileSync(path, 'utf8')) as OracleData
  for (const key of ['v', 'v_inf', 'v1', 'v0', 'n_states'] as const) {
    if (!(key in data)) throw new Error(`oracle file ${path} is missing '${key}'`)
  }
  return data
}

/** Which oracle series backs each trace file name. */
const ORACLE_KEY: Record<string, keyof OracleData> = {
  v: 'v',
  v_inf: 'v_inf',
  v1: 'v1',
  v0: 'v0',
  phi: 'phi',
}

function definedMask(oracle: OracleData, tableName: string): boolean[] {
  if (tableName === 'v1' && oracle.v1_defined) return oracle.v1_defined
  if (tableName === 'v0' && oracle.v0_defined) return oracle.v0_defined
  return new Array(oracle.n_states).fill(true)
}

export function renderTraces(traceCsvPath: string, oraclePath: string, tableName: string): string {
  if (!existsSync(traceCsvPath)) throw new Error(`trace file not found: ${traceCsvPath}`)
  const table = parseCsv(readFileSync(traceCsvPath, 'utf8'))
  if (table.header[0] !== 'iteration') {
    throw new Error(`trace CSV ${traceCsvPath} must start with an 'iteration' column`)
  }
  const stateColumns = table.header.slice(1)
  const oracle = loadOracle(oraclePath)
  if (stateColumns.length !== oracle.n_states) {
    throw new Error(
      `trace CSV declares ${stateColumns.length} states but the oracle has ${oracle.n_states}`,
    )
  }
  const oracleKey = ORACLE_KEY[tableName]
  if (!oracleKey) throw new Error(`no oracle series for table '${tableName}'`)
  const oracleValues = oracle[oracleKey] as number[]
  const mask = definedMask(oracle, tableName)

  const iterations = numericColumn(table, 'iteration')
  const series = stateColumns.map(name => numericColumn(table, name))

  const allValues = series.flat().concat(oracleValues.filter((_, i) => mask[i]))
  const yLo = Math.min(0, ...allValues)
  const yHi = Math.max(1, ...allValues)
  const f = frame(
    [iterations[0], iterations[iterations.length - 1]],
    [yLo, yHi],
    'iteration',
    tableName,
  )
  const parts = [...f.parts]
  series.forEach((values, s) => {
    const color = PALETTE[s % PALETTE.length]
    parts.push(polyline(iterations.map(f.x), values.map(f.y), color))
    if (mask[s]) {
      const oy = f.y(oracleValues[s])
      parts.push(polyline([f.x(f.x.domain[0]), f.x(f.x.domain[1])], [oy, oy], color, true))
    }
  })
  return document(parts)
}
