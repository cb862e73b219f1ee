import { ArrayImage, makeImage } from "../src/image.js";

/** Deterministic 32-bit PRNG for fixtures. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomImage(seed: number, height = 32, width = 32): ArrayImage {
  const rand = mulberry32(seed);
  const img = makeImage(height, width);
  for (let i = 0; i < img.data.length; i++) img.data[i] = rand();
  return img;
}

const H_STAIN = [0.650, 0.704, 0.286];
const E_STAIN = [0.072, 0.990, 0.105];

function unit(v: number[]): number[] {
  const n = Math.hypot(...v);
  return v.map((x) => x / n);
}

/** Synthetic two-stain tile: random positive mixtures of H and E absorbance. */
export function tissueImage(seed: number, height = 48, width = 48): ArrayImage {
  const rand = mulberry32(seed);
  const h = unit(H_STAIN);
  const e = unit(E_STAIN);
  const img = makeImage(height, width);
  for (let i = 0; i < height * width; i++) {
    const ch = 0.05 + 1.15 * rand();
    const ce = 0.05 + 1.15 * rand();
    for (let c = 0; c < 3; c++) {
      const od = ch * h[c] + ce * e[c];
      img.data[i * 3 + c] = Math.min(1, Math.max(0, Math.pow(10, -od) - 1 / 255));
    }
  }
  return img;
}
