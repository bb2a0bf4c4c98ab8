/**
 * Reference prediction hooks.
 *
 * A hook takes a decoded batch and returns one confidence row per video.
 * `echoHook` mirrors the toolkit's analytic echo predictor (target class
 * confidence = mean voxel value); `hfBoxHook` reimplements the planted-box
 * predictor so cross-implementation round trips are testable.
 */

import { Batch, videoSlice } from './wire'
import { BlurParams, blurVolume } from './blur'
import { readRvx } from './rvx'

export type PredictHook = (batch: Batch) => number[][]

function spread(conf: number, classCount: number, targetClass: number): number[] {
  if (classCount === 1) {
    return [conf]
  }
  const rest = (1 - conf) / (classCount - 1)
  const row = new Array<number>(classCount).fill(rest)
  row[targetClass] = conf
  return row
}

export function echoHook(classCount = 2, targetClass = 0): PredictHook {
  return (batch: Batch) => {
    const rows: number[][] = []
    for (let i = 0; i < batch.shape[0]; i++) {
      const video = videoSlice(batch, i)
      let sum = 0
      for (let j = 0; j < video.length; j++) {
        sum += video[j]
      }
      rows.push(spread(sum / video.length, classCount, targetClass))
    }
    return rows
  }
}

export interface HfBoxSpec {
  kind: 'hf_box'
  box: [number, number, number, number, number, number]
  gain: number
  class_count: number
  target_class: number
  blur: BlurParams
  reference: string
}

function boxEnergy(
  data: Float32Array, t: number, h: number, w: number, c: number,
  box: HfBoxSpec['box'], blur: BlurParams,
): number {
  const blurred = blurVolume(data, t, h, w, c, blur)
  const [t0, t1, y0, y1, x0, x1] = box
  let sum = 0
  let count = 0
  for (let it = t0; it < t1; it++) {
    for (let iy = y0; iy < y1; iy++) {
      for (let ix = x0; ix < x1; ix++) {
        const base = ((it * h + iy) * w + ix) * c
        for (let ch = 0; ch < c; ch++) {
          sum += Math.abs(data[base + ch] - blurred[base + ch])
          count++
        }
      }
    }
  }
  return sum / count
}

/** Build the planted-box hook from a predictor spec JSON (paths resolved
 * by the caller; `referencePath` points at the RVX reference video). */
export function hfBoxHook(spec: HfBoxSpec, referencePath: string): PredictHook {
  const ref = readRvx(referencePath)
  const refEnergy = boxEnergy(ref.data, ref.t, ref.h, ref.w, ref.c, spec.box, spec.blur)
  if (!(refEnergy > 0)) {
    throw new Error('reference video has no detail inside the box')
  }
  return (batch: Batch) => {
    const [, t, h, w, c] = batch.shape
    if (t !== ref.t || h !== ref.h || w !== ref.w || c !== ref.c) {
      throw new Error(
        `input dims (${t},${h},${w},${c}) do not match the reference ` +
        `(${ref.t},${ref.h},${ref.w},${ref.c})`)
    }
    const rows: number[][] = []
    for (let i = 0; i < batch.shape[0]; i++) {
      const video = videoSlice(batch, i)
      const energy = boxEnergy(video, t, h, w, c, spec.box, spec.blur)
      const conf = Math.min(Math.max(spec.gain * energy / refEnergy, 0), 1)
      rows.push(spread(conf, spec.class_count, spec.target_class))
    }
    return rows
  }
}
