/**
 * Wire protocol encoding/decoding (see ../protocol/protocol.md).
 *
 * Request:  {"shape":[n,t,h,w,c], "dtype":"f32le", "data":"<base64>"}
 * Response: {"confidences":[[...], ...], "normalized": bool}
 */

export interface PredictRequest {
  shape: number[]
  dtype: string
  data: string
}

export interface PredictResponse {
  confidences: number[][]
  normalized: boolean
}

export interface InfoResponse {
  class_count: number
  max_batch: number
  normalized: boolean
}

/** A decoded batch: flat little-endian float32 values plus its 5-D shape. */
export interface Batch {
  shape: [number, number, number, number, number]
  data: Float32Array
}

/** Raised for malformed requests; the server maps it to HTTP 400. */
export class WireError extends Error {}

const BASE64_RE = /^[A-Za-z0-9+/]*={0,2}$/

export function decodePredictRequest(body: unknown): Batch {
  if (typeof body !== 'object' || body === null) {
    throw new WireError('request body must be a JSON object')
  }
  const req = body as Partial<PredictRequest>
  if (!Array.isArray(req.shape) || req.shape.length !== 5) {
    throw new WireError(`shape must hold five integers, got ${JSON.stringify(req.shape)}`)
  }
  const shape = req.shape.map(v => Number(v))
  if (shape.some(v => !Number.isInteger(v) || v < 1)) {
    throw new WireError(`shape entries must be positive integers, got ${JSON.stringify(shape)}`)
  }
  if (req.dtype !== 'f32le') {
    throw new WireError(`unsupported dtype ${JSON.stringify(req.dtype)}`)
  }
  if (typeof req.data !== 'string' || !BASE64_RE.test(req.data) || req.data.length % 4 !== 0) {
    throw new WireError('data is not valid base64')
  }
  const raw = Buffer.from(req.data, 'base64')
  const count = shape.reduce((a, b) => a * b, 1)
  if (raw.length !== count * 4) {
    throw new WireError(`payload holds ${raw.length} bytes, shape implies ${count * 4}`)
  }
  // node Buffers are little-endian views on x86; read explicitly to be safe
  const data = new Float32Array(count)
  for (let i = 0; i < count; i++) {
    data[i] = raw.readFloatLE(i * 4)
  }
  return { shape: shape as Batch['shape'], data }
}

export function encodePredictRequest(batch: Batch): PredictRequest {
  const buf = Buffer.alloc(batch.data.length * 4)
  for (let i = 0; i < batch.data.length; i++) {
    buf.writeFloatLE(batch.data[i], i * 4)
  }
  return { shape: [...batch.shape], dtype: 'f32le', data: buf.toString('base64') }
}

/** View of one video inside a batch (no copy). */
export function videoSlice(batch: Batch, index: number): Float32Array {
  const [, t, h, w, c] = batch.shape
  const size = t * h * w * c
  return batch.data.subarray(index * size, (index + 1) * size)
}
