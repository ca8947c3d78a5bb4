import { gaussian, mulberry32 } from "./rng.js";
import { centerCrop, resizeBilinear, type RgbImage } from "./decode.js";

/**
 * A small convolutional feature backbone with weights drawn from a seeded
 * PRNG. Random convolutional features are not learned, but they are a fixed,
 * reproducible embedding: the same seed always yields the same network, so
 * feature files produced on different machines or runs are comparable.
 * Everything that determines the output is pinned in describeBackbone().
 */

export const DEFAULT_SEED = 0x46534631;
export const FEATURE_DIM = 128;

const RESIZE_SHORT = 72;
const CROP = 64;
const NORM_MEAN = 0.5;
const NORM_STD = 0.5;

interface ConvLayer {
  kernel: number;
  stride: number;
  cin: number;
  cout: number;
  weights: Float32Array;
}

const LAYER_SHAPES = [
  { kernel: 3, stride: 2, cin: 3, cout: 8 },
  { kernel: 3, stride: 2, cin: 8, cout: 16 },
  { kernel: 3, stride: 2, cin: 16, cout: 32 },
  { kernel: 1, stride: 1, cin: 32, cout: FEATURE_DIM },
];

export class Backbone {
  readonly seed: number;
  private layers: ConvLayer[];

  constructor(seed: number = DEFAULT_SEED) {
    this.seed = seed >>> 0;
    const next = gaussian(mulberry32(this.seed));
    // Layers are materialized in a fixed order from one PRNG stream, so the
    // full weight set is a pure function of the seed.
    this.layers = LAYER_SHAPES.map((shape) => {
      const n = shape.kernel * shape.kernel * shape.cin * shape.cout;
      const std = Math.sqrt(2 / (shape.kernel * shape.kernel * shape.cin));
      const weights = new Float32Array(n);
      for (let i = 0; i < n; i++) {
        weights[i] = next() * std;
      }
      return { ...shape, weights };
    });
  }

  /** Feature vector for one decoded image. Length FEATURE_DIM. */
  embed(img: RgbImage): Float32Array {
    let x = preprocess(img);
    let size = CROP;
    let channels = 3;
    for (const layer of this.layers) {
      const outSize = Math.floor((size - layer.kernel) / layer.stride) + 1;
      x = convRelu(x, size, channels, layer, outSize);
      size = outSize;
      channels = layer.cout;
    }
    // Global average pool over the remaining spatial grid.
    const out = new Float32Array(channels);
    const cells = size * size;
    for (let p = 0; p < cells; p++) {
      const base = p * channels;
      for (let c = 0; c < channels; c++) {
        out[c] += x[base + c];
      }
    }
    for (let c = 0; c < channels; c++) {
      out[c] /= cells;
    }
    return out;
  }
}

/** Resize shorter side, center-crop, and shift pixels to roughly [-1, 1]. */
function preprocess(img: RgbImage): Float32Array {
  const scale = RESIZE_SHORT / Math.min(img.width, img.height);
  const w = Math.max(CROP, Math.round(img.width * scale));
  const h = Math.max(CROP, Math.round(img.height * scale));
  const cropped = centerCrop(resizeBilinear(img, w, h), CROP);
  const data = cropped.data;
  for (let i = 0; i < data.length; i++) {
    data[i] = (data[i] - NORM_MEAN) / NORM_STD;
  }
  return data;
}

/** Valid (no padding) convolution in HWC layout followed by ReLU. */
function convRelu(
  input: Float32Array,
  size: number,
  cin: number,
  layer: ConvLayer,
  outSize: number,
): Float32Array {
  const { kernel, stride, cout, weights } = layer;
  const out = new Float32Array(outSize * outSize * cout);
  for (let oy = 0; oy < outSize; oy++) {
    for (let ox = 0; ox < outSize; ox++) {
      const oBase = (oy * outSize + ox) * cout;
      for (let ky = 0; ky < kernel; ky++) {
        const iy = oy * stride + ky;
        for (let kx = 0; kx < kernel; kx++) {
          const ix = ox * stride + kx;
          const iBase = (iy * size + ix) * cin;
          const wBase = (ky * kernel + kx) * cin * cout;
          for (let c = 0; c < cin; c++) {
            const v = input[iBase + c];
            if (v === 0) continue;
            const wRow = wBase + c * cout;
            for (let o = 0; o < cout; o++) {
              out[oBase + o] += v * weights[wRow + o];
            }
          }
        }
      }
      for (let o = 0; o < cout; o++) {
        if (out[oBase + o] < 0) out[oBase + o] = 0;
      }
    }
  }
  return out;
}

/** Everything that pins the embedding, for the extraction manifest. */
export function describeBackbone(seed: number = DEFAULT_SEED) {
  return {
    id: "seeded-cnn-v1",
    seed: seed >>> 0,
    feature_dim: FEATURE_DIM,
    preprocessing: {
      resize_short_side: RESIZE_SHORT,
      center_crop: CROP,
      pixel_scale: "1/255",
      mean: NORM_MEAN,
      std: NORM_STD,
    },
    layers: LAYER_SHAPES.map((s) => ({
      kernel: s.kernel,
      stride: s.stride,
      in_channels: s.cin,
      out_channels: s.cout,
    })),
    init: "he-normal, mulberry32 + box-muller, single stream",
    pooling: "global average",
  };
}
