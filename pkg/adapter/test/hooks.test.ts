import assert from 'node:assert/strict'
import * as fs from 'node:fs'
import * as os from 'node:os'
import * as path from 'node:path'
import { test } from 'node:test'

import { blurVolume, gaussianKernel1d } from '../src/blur'
import { HfBoxSpec, echoHook, hfBoxHook } from '../src/hooks'
import { decodePredictRequest } from '../src/wire'

const FIXTURES = path.resolve(__dirname, '..', '..', '..', 'protocol', 'fixtures')

test('echo hook reproduces the golden response', () => {
  const req = JSON.parse(
    fs.readFileSync(path.join(FIXTURES, 'echo_request.json'), 'utf-8'))
  const expected = JSON.parse(
    fs.readFileSync(path.join(FIXTURES, 'echo_response.json'), 'utf-8'))
  const rows = echoHook(2)(decodePredictRequest(req))
  assert.equal(rows.length, expected.confidences.length)
  for (let i = 0; i < rows.length; i++) {
    for (let j = 0; j < rows[i].length; j++) {
      assert.ok(Math.abs(rows[i][j] - expected.confidences[i][j]) < 1e-7)
    }
  }
})

test('gaussian kernel is normalized with ceil(truncation*sigma) radius', () => {
  const k = gaussianKernel1d(2.0, 2.0)
  assert.equal(k.length, 9)
  const sum = [...k].reduce((a, b) => a + b, 0)
  assert.ok(Math.abs(sum - 1) < 1e-12)
})

test('blur of a constant volume is constant', () => {
  const data = new Float32Array(2 * 4 * 4 * 3).fill(0.7)
  const out = blurVolume(data, 2, 4, 4, 3, { sigma_space: 1.5, sigma_time: 1.0, truncation: 2.0 })
  for (const v of out) {
    assert.ok(Math.abs(v - 0.7) < 1e-6)
  }
})

function writeRvx(file: string, t: number, h: number, w: number, c: number,
                  values: Float32Array): void {
  const buf = Buffer.alloc(24 + values.length * 4)
  buf.write('RVX1', 0, 'ascii')
  buf.writeUInt32LE(t, 4)
  buf.writeUInt32LE(h, 8)
  buf.writeUInt32LE(w, 12)
  buf.writeUInt32LE(c, 16)
  buf.writeUInt32LE(1, 20)
  for (let i = 0; i < values.length; i++) {
    buf.writeFloatLE(values[i], 24 + i * 4)
  }
  fs.writeFileSync(file, buf)
}

test('hf-box hook: reference gives confidence 1, constant gives 0', () => {
  const t = 4, h = 12, w = 12, c = 3
  const count = t * h * w * c
  const values = new Float32Array(count)
  let state = 1234567
  for (let i = 0; i < count; i++) {
    // deterministic LCG noise in [0, 1)
    state = (state * 1103515245 + 12345) & 0x7fffffff
    values[i] = state / 0x80000000
  }
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'adapter-test-'))
  const refPath = path.join(dir, 'ref.rvx')
  writeRvx(refPath, t, h, w, c, values)
  const spec: HfBoxSpec = {
    kind: 'hf_box', box: [0, 4, 2, 10, 2, 10], gain: 1.0,
    class_count: 2, target_class: 0,
    blur: { sigma_space: 1.5, sigma_time: 0.5, truncation: 2.0 },
    reference: 'ref.rvx',
  }
  const hook = hfBoxHook(spec, refPath)

  const refRows = hook({ shape: [1, t, h, w, c], data: values })
  assert.equal(refRows[0][0], 1)
  assert.ok(Math.abs(refRows[0][0] + refRows[0][1] - 1) < 1e-12)

  const flat = new Float32Array(count).fill(0.5)
  const flatRows = hook({ shape: [1, t, h, w, c], data: flat })
  assert.equal(flatRows[0][0], 0)
})
