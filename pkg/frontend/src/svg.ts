/** Hand-rolled SVG assembly: fixed-precision coordinates keep output byte-stable. */

export const WIDTH = 720
export const HEIGHT = 480
export const MARGIN = { top: 32, right: 24, bottom: 48, left: 64 }

export const PALETTE = [
  '#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd',
  '#8c564b', '#e377c2', '#7f7f7f', '#bcbd22', '#17becf',
]

export interface Scale {
  (value: number): number
  domain: [number, number]
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain
  const [r0, r1] = range
  const span = d1 - d0 || 1
  const fn = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale
  fn.domain = domain
  return fn
}

export function fmt(value: number): string {
  return value.toFixed(2)
}

export function polyline(xs: number[], ys: number[], color: string, dashed = false): string {
  const points = xs.map((x, i) => `${fmt(x)},${fmt(ys[i])}`).join(' ')
  const dash = dashed ? ' stroke-dasharray="6,4"' : ''
  return `<polyline fill="none" stroke="${color}" stroke-width="1.5"${dash} points="${points}"/>`
}

export function circle(x: number, y: number, color: string, r = 2.5): string {
  return `<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${color}" fill-opacity="0.45"/>`
}

export function text(x: number, y: number, content: string, anchor = 'middle', size = 12): string {
  return `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" font-size="${size}" font-family="sans-serif">${content}</text>`
}

export function axisTicks(domain: [number, number], count = 5): number[] {
  const [lo, hi] = domain
  const step = (hi - lo) / (count - 1 || 1)
  return Array.from({ length: count }, (_, i) => lo + i * step)
}

export function tickLabel(value: number): string {
  if (Math.abs(value) >= 1000) return String(Math.round(value))
  return Number(value.toPrecision(3)).toString()
}

export interface Frame {
  x: Scale
  y: Scale
  parts: string[]
}

/** Axis frame of one plot panel with tick marks and labels. */
export function frame(
  xDomain: [number, number],
  yDomain: [number, number],
  xLabel: string,
  yLabel: string,
  box = { x0: MARGIN.left, x1: WIDTH - MARGIN.right, y0: HEIGHT - MARGIN.bottom, y1: MARGIN.top },
): Frame {
  const x = linearScale(xDomain, [box.x0, box.x1])
  const y = linearScale(yDomain, [box.y0, box.y1])
  const parts: string[] = []
  parts.push(`<rect x="${box.x0}" y="${box.y1}" width="${box.x1 - box.x0}" height="${box.y0 - box.y1}" fill="none" stroke="#333"/>`)
  for (const t of axisTicks(xDomain)) {
    const px = x(t)
    parts.push(`<line x1="${fmt(px)}" y1="${box.y0}" x2="${fmt(px)}" y2="${box.y0 + 5}" stroke="#333"/>`)
    parts.push(text(px, box.y0 + 20, tickLabel(t)))
  }
  for (const t of axisTicks(yDomain)) {
    const py = y(t)
    parts.push(`<line x1="${box.x0 - 5}" y1="${fmt(py)}" x2="${box.x0}" y2="${fmt(py)}" stroke="#333"/>`)
    parts.push(text(box.x0 - 10, py + 4, tickLabel(t), 'end'))
  }
  parts.push(text((box.x0 + box.x1) / 2, box.y0 + 38, xLabel))
  parts.push(
    `<text x="18" y="${fmt((box.y0 + box.y1) / 2)}" text-anchor="middle" font-size="12" font-family="sans-serif" transform="rotate(-90 18 ${fmt((box.y0 + box.y1) / 2)})">${yLabel}</text>`,
  )
  return { x, y, parts }
}

export function document(parts: string[], width = WIDTH, height = HEIGHT): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    '<rect width="100%" height="100%" fill="white"/>',
    ...parts,
    '</svg>',
    '',
  ].join('\n')
}
