import { describe, expect, it } from 'vitest'
import { join } from 'path'
import { writeFileSync } from 'fs'
import { renderTraces } from '../src/traces.js'
import { tempDir, writeTraceFixture } from './fixtures.js'

describe('renderTraces', () => {
  it('produces an SVG with one solid and one dashed series per state', () => {
    const dir = tempDir()
    const { trace, oracle } = writeTraceFixture(dir, 4)
    const svg = renderTraces(trace, oracle, 'v1')
    expect(svg).toContain('<svg')
    const solid = (svg.match(/<polyline(?![^>]*stroke-dasharray)/g) ?? []).length
    const dashed = (svg.match(/stroke-dasharray/g) ?? []).length
    expect(solid).toBe(4)
    expect(dashed).toBe(4)
    expect(svg).toContain('iteration')
  })

  it('is byte-deterministic', () => {
    const dir = tempDir()
    const { trace, oracle } = writeTraceFixture(dir, 3)
    expect(renderTraces(trace, oracle, 'v1')).toBe(renderTraces(trace, oracle, 'v1'))
  })

  it('fails with the oracle path in the message when the file is missing', () => {
    const dir = tempDir()
    const { trace } = writeTraceFixture(dir, 2)
    const missing = join(dir, 'nope.json')
    expect(() => renderTraces(trace, missing, 'v1')).toThrow(/nope\.json/)
  })

  it('rejects a state-count mismatch between trace and oracle', () => {
    const dir = tempDir()
    const { trace, oracle } = writeTraceFixture(dir, 3)
    const other = tempDir()
    const fixture = writeTraceFixture(other, 5)
    expect(() => renderTraces(fixture.trace, oracle, 'v1')).toThrow(/5 states.*3/)
  })

  it('rejects malformed CSV', () => {
    const dir = tempDir()
    const { oracle } = writeTraceFixture(dir, 2)
    const bad = join(dir, 'trace_bad.csv')
    writeFileSync(bad, 'iteration,state_0,state_1\n1,2\n')
    expect(() => renderTraces(bad, oracle, 'v1')).toThrow(/fields/)
  })
})
