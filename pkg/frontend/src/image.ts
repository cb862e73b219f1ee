import * as fs from "node:fs";
import { PNG } from "pngjs";

/**
 * RGB image as a contiguous row-major float array in [0, 1], matching the
 * native pixel convention (8-bit PNG values divided by 255 on load,
 * rounded back on save).
 */
export interface ArrayImage {
  readonly height: number;
  readonly width: number;
  /** length = height * width * 3, layout [r, g, b, r, g, b, ...] */
  readonly data: Float64Array;
}

export function makeImage(height: number, width: number, fill = 0): ArrayImage {
  if (height <= 0 || width <= 0) {
    throw new RangeError(`image dimensions ${height}x${width}`);
  }
  const data = new Float64Array(height * width * 3).fill(fill);
  return { height, width, data };
}

export function readPng(path: string): ArrayImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  const data = new Float64Array(png.height * png.width * 3);
  for (let i = 0; i < png.height * png.width; i++) {
    data[i * 3] = png.data[i * 4] / 255;
    data[i * 3 + 1] = png.data[i * 4 + 1] / 255;
    data[i * 3 + 2] = png.data[i * 4 + 2] / 255;
  }
  return { height: png.height, width: png.width, data };
}

export function writePng(image: ArrayImage, path: string): void {
  const png = new PNG({ height: image.height, width: image.width });
  for (let i = 0; i < image.height * image.width; i++) {
    for (let c = 0; c < 3; c++) {
      const v = Math.min(1, Math.max(0, image.data[i * 3 + c]));
      png.data[i * 4 + c] = Math.round(v * 255);
    }
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png));
}

/** Mean absolute difference, the usual closeness metric in tests. */
export function meanAbsDiff(a: ArrayImage, b: ArrayImage): number {
  if (a.height !== b.height || a.width !== b.width) {
    throw new RangeError(`shape ${a.height}x${a.width} vs ${b.height}x${b.width}`);
  }
  let total = 0;
  for (let i = 0; i < a.data.length; i++) total += Math.abs(a.data[i] - b.data[i]);
  return total / a.data.length;
}
