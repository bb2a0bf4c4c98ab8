/**
 * HTTP server implementing the model wire protocol (protocol/protocol.md):
 * GET /info, POST /predict, 400 {"error"} for malformed requests, 500 when
 * the hook itself fails.  Batches larger than max_batch are split before
 * the hook sees them and the rows concatenated in order.
 */

import * as http from 'node:http'

import { Batch, WireError, decodePredictRequest } from './wire'
import { PredictHook } from './hooks'

export interface AdapterConfig {
  hook: PredictHook
  classCount: number
  maxBatch: number
  normalized: boolean
}

function subBatch(batch: Batch, start: number, count: number): Batch {
  const [, t, h, w, c] = batch.shape
  const size = t * h * w * c
  return {
    shape: [count, t, h, w, c],
    data: batch.data.subarray(start * size, (start + count) * size),
  }
}

export function runHookBatched(config: AdapterConfig, batch: Batch): number[][] {
  const n = batch.shape[0]
  const rows: number[][] = []
  for (let start = 0; start < n; start += config.maxBatch) {
    const count = Math.min(config.maxBatch, n - start)
    const part = config.hook(subBatch(batch, start, count))
    if (part.length !== count) {
      throw new Error(`hook returned ${part.length} rows for ${count} inputs`)
    }
    rows.push(...part)
  }
  return rows
}

function sendJson(res: http.ServerResponse, code: number, payload: unknown): void {
  const body = JSON.stringify(payload)
  res.writeHead(code, {
    'Content-Type': 'application/json',
    'Content-Length': Buffer.byteLength(body),
  })
  res.end(body)
}

function readBody(req: http.IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = []
    req.on('data', chunk => chunks.push(chunk))
    req.on('end', () => resolve(Buffer.concat(chunks).toString('utf-8')))
    req.on('error', reject)
  })
}

export function createAdapterServer(config: AdapterConfig): http.Server {
  return http.createServer(async (req, res) => {
    try {
      if (req.method === 'GET' && req.url === '/info') {
        sendJson(res, 200, {
          class_count: config.classCount,
          max_batch: config.maxBatch,
          normalized: config.normalized,
        })
        return
      }
      if (req.method === 'POST' && req.url === '/predict') {
        const raw = await readBody(req)
        let parsed: unknown
        try {
          parsed = JSON.parse(raw)
        } catch {
          sendJson(res, 400, { error: 'request body is not valid JSON' })
          return
        }
        let batch: Batch
        try {
          batch = decodePredictRequest(parsed)
        } catch (err) {
          if (err instanceof WireError) {
            sendJson(res, 400, { error: err.message })
            return
          }
          throw err
        }
        let rows: number[][]
        try {
          rows = runHookBatched(config, batch)
        } catch (err) {
          sendJson(res, 500, { error: `prediction hook failed: ${(err as Error).message}` })
          return
        }
        sendJson(res, 200, { confidences: rows, normalized: config.normalized })
        return
      }
      sendJson(res, 400, { error: `unknown route ${req.method} ${req.url}` })
    } catch (err) {
      sendJson(res, 500, { error: (err as Error).message })
    }
  })
}

export function startAdapter(config: AdapterConfig, port: number, host = '127.0.0.1'):
    Promise<http.Server> {
  const server = createAdapterServer(config)
  return new Promise((resolve, reject) => {
    server.once('error', reject)
    server.listen(port, host, () => resolve(server))
  })
}
