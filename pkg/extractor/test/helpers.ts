import { PNG } from "pngjs";
import jpeg from "jpeg-js";

/** Synthetic RGBA image encoded as PNG. pixel(x, y) returns [r, g, b]. */
export function makePng(
  width: number,
  height: number,
  pixel: (x: number, y: number) => [number, number, number],
): Buffer {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const [r, g, b] = pixel(x, y);
      const i = (y * width + x) * 4;
      png.data[i] = r;
      png.data[i + 1] = g;
      png.data[i + 2] = b;
      png.data[i + 3] = 255;
    }
  }
  return PNG.sync.write(png);
}

/** Same, encoded as JPEG at the given quality. */
export function makeJpeg(
  width: number,
  height: number,
  pixel: (x: number, y: number) => [number, number, number],
  quality = 90,
): Buffer {
  const data = Buffer.alloc(width * height * 4);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const [r, g, b] = pixel(x, y);
      const i = (y * width + x) * 4;
      data[i] = r;
      data[i + 1] = g;
      data[i + 2] = b;
      data[i + 3] = 255;
    }
  }
  return jpeg.encode({ data, width, height }, quality).data;
}

/** Smooth deterministic test pattern parameterized by a phase. */
export function gradient(phase: number): (x: number, y: number) => [number, number, number] {
  return (x, y) => [
    (x * 3 + phase * 40) % 256,
    (y * 5 + phase * 80) % 256,
    (x + y + phase * 20) % 256,
  ];
}
