/** Minimal CSV reading for the harness's plain numeric files (no quoting). */

export interface Table {
  header: string[]
  rows: string[][]
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter(line => line.length > 0)
  if (lines.length === 0) throw new Error('empty CSV')
  const header = lines[0].split(',')
  const rows = lines.slice(1).map(line => line.split(','))
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new Error(`CSV row has ${row.length} fields, header declares ${header.length}`)
    }
  }
  return { header, rows }
}

export function numericColumn(table: Table, name: string): number[] {
  const idx = table.header.indexOf(name)
  if (idx < 0) throw new Error(`CSV is missing required column '${name}'`)
  return table.rows.map(row => {
    const value = Number(row[idx])
    if (Number.isNaN(value)) throw new Error(`non-numeric value '${row[idx]}' in column '${name}'`)
    return value
  })
}
