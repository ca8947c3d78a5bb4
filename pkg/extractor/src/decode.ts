import { PNG } from "pngjs";
import jpeg from "jpeg-js";

/** Decoded image: RGB float32 pixels in [0, 1], HWC layout. */
export interface RgbImage {
  width: number;
  height: number;
  /** length = width * height * 3 */
  data: Float32Array;
}

const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47]);
const JPEG_MAGIC = Buffer.from([0xff, 0xd8]);

/**
 * Decode a PNG or JPEG buffer to RGB floats. The container is sniffed from
 * the leading bytes, not the filename, so mislabeled files still decode.
 * Throws on anything that is not a well-formed PNG or JPEG.
 */
export function decodeImage(buf: Buffer): RgbImage {
  let width: number;
  let height: number;
  let rgba: Uint8Array;
  if (buf.subarray(0, 4).equals(PNG_MAGIC)) {
    const png = PNG.sync.read(buf);
    width = png.width;
    height = png.height;
    rgba = png.data;
  } else if (buf.subarray(0, 2).equals(JPEG_MAGIC)) {
    const img = jpeg.decode(buf, { useTArray: true, maxMemoryUsageInMB: 512 });
    width = img.width;
    height = img.height;
    rgba = img.data;
  } else {
    throw new Error("unrecognized image container");
  }
  if (width <= 0 || height <= 0) {
    throw new Error("decoded image has no pixels");
  }
  const out = new Float32Array(width * height * 3);
  for (let p = 0, q = 0; p < out.length; p += 3, q += 4) {
    out[p] = rgba[q] / 255;
    out[p + 1] = rgba[q + 1] / 255;
    out[p + 2] = rgba[q + 2] / 255;
  }
  return { width, height, data: out };
}

/**
 * Bilinear resize to an exact target size. Sample positions use the
 * align-corners=false convention: output pixel centers map to
 * (i + 0.5) * scale - 0.5 in input coordinates, clamped at the borders.
 */
export function resizeBilinear(img: RgbImage, outW: number, outH: number): RgbImage {
  const { width: w, height: h, data } = img;
  if (w === outW && h === outH) {
    return { width: outW, height: outH, data: data.slice() };
  }
  const out = new Float32Array(outW * outH * 3);
  const sx = w / outW;
  const sy = h / outH;
  for (let oy = 0; oy < outH; oy++) {
    const fy = Math.min(Math.max((oy + 0.5) * sy - 0.5, 0), h - 1);
    const y0 = Math.floor(fy);
    const y1 = Math.min(y0 + 1, h - 1);
    const wy = fy - y0;
    for (let ox = 0; ox < outW; ox++) {
      const fx = Math.min(Math.max((ox + 0.5) * sx - 0.5, 0), w - 1);
      const x0 = Math.floor(fx);
      const x1 = Math.min(x0 + 1, w - 1);
      const wx = fx - x0;
      const o = (oy * outW + ox) * 3;
      const i00 = (y0 * w + x0) * 3;
      const i01 = (y0 * w + x1) * 3;
      const i10 = (y1 * w + x0) * 3;
      const i11 = (y1 * w + x1) * 3;
      for (let c = 0; c < 3; c++) {
        const top = data[i00 + c] * (1 - wx) + data[i01 + c] * wx;
        const bot = data[i10 + c] * (1 - wx) + data[i11 + c] * wx;
        out[o + c] = top * (1 - wy) + bot * wy;
      }
    }
  }
  return { width: outW, height: outH, data: out };
}

/** Crop the centered win x win square. The image must be at least that big. */
export function centerCrop(img: RgbImage, win: number): RgbImage {
  const { width: w, height: h, data } = img;
  if (w < win || h < win) {
    throw new Error(`image ${w}x${h} smaller than crop window ${win}`);
  }
  const x0 = Math.floor((w - win) / 2);
  const y0 = Math.floor((h - win) / 2);
  const out = new Float32Array(win * win * 3);
  for (let y = 0; y < win; y++) {
    const src = ((y0 + y) * w + x0) * 3;
    out.set(data.subarray(src, src + win * 3), y * win * 3);
  }
  return { width: win, height: win, data: out };
}
