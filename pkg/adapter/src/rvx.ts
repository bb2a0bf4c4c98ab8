/**
 * Reader for the RVX tensor format: magic "RVX1", five uint32-LE header
 * fields (t, h, w, c, dtype code 1 = float32), then the payload in
 * (t, h, w, c) row-major order.
 */

import * as fs from 'node:fs'

export interface RvxTensor {
  t: number
  h: number
  w: number
  c: number
  data: Float32Array
}

export class RvxFormatError extends Error {}

export function readRvx(path: string): RvxTensor {
  const raw = fs.readFileSync(path)
  if (raw.length < 24) {
    throw new RvxFormatError(`${path}: shorter than the RVX header`)
  }
  if (raw.toString('ascii', 0, 4) !== 'RVX1') {
    throw new RvxFormatError(`${path}: bad magic`)
  }
  const t = raw.readUInt32LE(4)
  const h = raw.readUInt32LE(8)
  const w = raw.readUInt32LE(12)
  const c = raw.readUInt32LE(16)
  const code = raw.readUInt32LE(20)
  if (code !== 1) {
    throw new RvxFormatError(`${path}: expected float32 tensor (dtype 1), got ${code}`)
  }
  const count = t * h * w * c
  if (raw.length !== 24 + count * 4) {
    throw new RvxFormatError(
      `${path}: payload holds ${raw.length - 24} bytes, header implies ${count * 4}`)
  }
  const data = new Float32Array(count)
  for (let i = 0; i < count; i++) {
    data[i] = raw.readFloatLE(24 + i * 4)
  }
  return { t, h, w, c, data }
}
