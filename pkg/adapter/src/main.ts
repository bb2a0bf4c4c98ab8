/**
 * CLI entry point.
 *
 *   node dist/src/main.js --hook echo --classes 2 --port 8008
 *   node dist/src/main.js --hook hf-box --config scene/predictor.json --port 8008
 *
 * The hf-box config is the predictor spec JSON produced by `revex synth`;
 * its reference path resolves relative to the JSON file.
 */

import * as fs from 'node:fs'
import * as path from 'node:path'

import { PredictHook, HfBoxSpec, echoHook, hfBoxHook } from './hooks'
import { startAdapter } from './server'

interface Args {
  hook: string
  config?: string
  port: number
  classes: number
  maxBatch: number
}

function parseArgs(argv: string[]): Args {
  const args: Args = { hook: 'echo', port: 8008, classes: 2, maxBatch: 8 }
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i]
    const value = argv[i + 1]
    if (value === undefined) {
      throw new Error(`missing value for ${key}`)
    }
    switch (key) {
      case '--hook': args.hook = value; break
      case '--config': args.config = value; break
      case '--port': args.port = Number(value); break
      case '--classes': args.classes = Number(value); break
      case '--max-batch': args.maxBatch = Number(value); break
      default: throw new Error(`unknown flag ${key}`)
    }
  }
  return args
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2))
  let hook: PredictHook
  let classCount = args.classes
  if (args.hook === 'echo') {
    hook = echoHook(classCount)
  } else if (args.hook === 'hf-box') {
    if (!args.config) {
      throw new Error('--hook hf-box needs --config <predictor.json>')
    }
    const spec = JSON.parse(fs.readFileSync(args.config, 'utf-8')) as HfBoxSpec
    if (spec.kind !== 'hf_box') {
      throw new Error(`config kind is ${spec.kind}, expected hf_box`)
    }
    const refPath = path.resolve(path.dirname(args.config), spec.reference)
    hook = hfBoxHook(spec, refPath)
    classCount = spec.class_count
  } else {
    throw new Error(`unknown hook ${args.hook} (expected echo | hf-box)`)
  }
  await startAdapter(
    { hook, classCount, maxBatch: args.maxBatch, normalized: true }, args.port)
  console.log(`adapter listening on http://127.0.0.1:${args.port} ` +
              `(hook=${args.hook}, classes=${classCount}, max_batch=${args.maxBatch})`)
}

main().catch(err => {
  console.error(`error: ${(err as Error).message}`)
  process.exit(1)
})
