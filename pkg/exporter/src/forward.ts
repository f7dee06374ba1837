/** Reference forward passes, independent of any graph runtime.
 *
 * These are the source-framework numerics the exported graphs must
 * reproduce: accumulation in float64, activations rounded back to float32
 * per layer, mirroring the graph's float32 tensor boundaries.
 */

export interface Chw {
  c: number;
  h: number;
  w: number;
  data: Float32Array;
}

export function conv2d(x: Chw, weight: Float32Array, bias: Float32Array,
                       cout: number, kh: number, kw: number,
                       stride: number, pad: number): Chw {
  const { c: cin, h, w } = x;
  const oh = Math.floor((h + 2 * pad - kh) / stride) + 1;
  const ow = Math.floor((w + 2 * pad - kw) / stride) + 1;
  const out = new Float32Array(cout * oh * ow);
  const xd = x.data;
  for (let oc = 0; oc < cout; oc++) {
    const wBase = oc * cin * kh * kw;
    for (let oy = 0; oy < oh; oy++) {
      for (let ox = 0; ox < ow; ox++) {
        let acc = 0;
        for (let ic = 0; ic < cin; ic++) {
          for (let ky = 0; ky < kh; ky++) {
            const iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) continue;
            const xRow = (ic * h + iy) * w;
            const wRow = wBase + (ic * kh + ky) * kw;
            for (let kx = 0; kx < kw; kx++) {
              const ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= w) continue;
              acc += xd[xRow + ix] * weight[wRow + kx];
            }
          }
        }
        out[(oc * oh + oy) * ow + ox] = Math.fround(acc + bias[oc]);
      }
    }
  }
  return { c: cout, h: oh, w: ow, data: out };
}

export function swishInPlace(x: Float32Array): Float32Array {
  for (let i = 0; i < x.length; i++) {
    const v = x[i];
    x[i] = Math.fround(v / (1 + Math.exp(-v)));
  }
  return x;
}

/** vec (1 x rows) times weight (rows x cols), float64 accumulation. */
export function vecMatMul(vec: Float32Array | Float64Array, weight: Float32Array,
                          rows: number, cols: number): Float32Array {
  const out = new Float32Array(cols);
  for (let j = 0; j < cols; j++) {
    let acc = 0;
    for (let i = 0; i < rows; i++) {
      acc += vec[i] * weight[i * cols + j];
    }
    out[j] = Math.fround(acc);
  }
  return out;
}

export interface BackboneWeights {
  convs: Array<{ w: Float32Array; b: Float32Array; cin: number; cout: number }>;
}

/** Runs the five stride-2 swish stages; returns the stem and final maps. */
export function backboneForward(weights: BackboneWeights, input: Chw):
    { stem: Chw; block16: Chw } {
  let x = input;
  let stem: Chw | null = null;
  weights.convs.forEach((conv, i) => {
    x = conv2d(x, conv.w, conv.b, conv.cout, 3, 3, 2, 1);
    swishInPlace(x.data);
    if (i === 0) stem = { ...x, data: x.data.slice() };
  });
  return { stem: stem!, block16: x };
}

export interface ImageEncoderWeights {
  convW: Float32Array;
  convB: Float32Array;
  fcW: Float32Array; // (32*7*7) x 512
}

export function imageEncoderForward(weights: ImageEncoderWeights, input: Chw): Float32Array {
  const conv = conv2d(input, weights.convW, weights.convB, 32, 32, 32, 32, 0);
  swishInPlace(conv.data);
  return vecMatMul(conv.data, weights.fcW, conv.data.length, 512);
}

export interface TextEncoderWeights {
  tokEmb: Float32Array; // vocab x d
  posEmb: Float32Array; // context x d
  mixW: Float32Array;   // d x d
  outW: Float32Array;   // d x 512
  d: number;
  context: number;
}

export function textEncoderForward(weights: TextEncoderWeights, ids: number[]): Float32Array {
  const { d, context } = weights;
  const h = new Float32Array(context * d);
  for (let t = 0; t < context; t++) {
    const tokBase = ids[t] * d;
    for (let j = 0; j < d; j++) {
      h[t * d + j] = Math.fround(weights.tokEmb[tokBase + j] + weights.posEmb[t * d + j]);
    }
  }
  const mixed = new Float32Array(context * d);
  for (let t = 0; t < context; t++) {
    const row = vecMatMul(h.subarray(t * d, (t + 1) * d), weights.mixW, d, d);
    swishInPlace(row);
    mixed.set(row, t * d);
  }
  const pooled = new Float64Array(d);
  for (let t = 0; t < context; t++) {
    for (let j = 0; j < d; j++) pooled[j] += mixed[t * d + j];
  }
  for (let j = 0; j < d; j++) pooled[j] = Math.fround(pooled[j] / context);
  let eot = 0;
  for (let t = 1; t < context; t++) {
    if (ids[t] > ids[eot]) eot = t;
  }
  const flat = new Float32Array(d);
  for (let j = 0; j < d; j++) {
    flat[j] = Math.fround(mixed[eot * d + j] + pooled[j]);
  }
  return vecMatMul(flat, weights.outW, d, 512);
}
