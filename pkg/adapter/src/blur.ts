/**
 * Separable 3D Gaussian blur over a (t, h, w, c) float32 volume with
 * edge-replicate padding.
 *
 * Matches the toolkit's reference arithmetic: float64 kernel taps, float64
 * accumulation in ascending tap order, and a round to float32 after each
 * axis pass, so high-frequency energies agree across implementations to
 * float32 precision.
 */

export function gaussianKernel1d(sigma: number, truncation: number): Float64Array {
  const radius = Math.ceil(truncation * sigma)
  const kernel = new Float64Array(2 * radius + 1)
  let sum = 0
  for (let i = -radius; i <= radius; i++) {
    const v = Math.exp(-0.5 * (i / sigma) ** 2)
    kernel[i + radius] = v
    sum += v
  }
  for (let i = 0; i < kernel.length; i++) {
    kernel[i] /= sum
  }
  return kernel
}

function correlateAxis(
  data: Float32Array, pre: number, n: number, post: number, kernel: Float64Array,
): Float32Array {
  const radius = (kernel.length - 1) / 2
  const out = new Float32Array(data.length)
  const clipped = new Int32Array(n + 2 * radius)
  for (let i = 0; i < clipped.length; i++) {
    clipped[i] = Math.min(Math.max(i - radius, 0), n - 1)
  }
  for (let a = 0; a < pre; a++) {
    const base = a * n * post
    for (let i = 0; i < n; i++) {
      for (let b = 0; b < post; b++) {
        let acc = 0
        for (let j = 0; j < kernel.length; j++) {
          acc += kernel[j] * data[base + clipped[i + j] * post + b]
        }
        out[base + i * post + b] = Math.fround(acc)
      }
    }
  }
  return out
}

export interface BlurParams {
  sigma_space: number
  sigma_time: number
  truncation: number
}

export function blurVolume(
  data: Float32Array, t: number, h: number, w: number, c: number, params: BlurParams,
): Float32Array {
  let out = data
  if (params.sigma_time > 0) {
    const kt = gaussianKernel1d(params.sigma_time, params.truncation)
    out = correlateAxis(out, 1, t, h * w * c, kt)
  }
  const ks = gaussianKernel1d(params.sigma_space, params.truncation)
  out = correlateAxis(out, t, h, w * c, ks)
  out = correlateAxis(out, t * h, w, c, ks)
  return out
}
