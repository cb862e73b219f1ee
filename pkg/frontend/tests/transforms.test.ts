import { describe, expect, it } from "vitest";

import { makeImage, meanAbsDiff } from "../src/image.js";
import { lowpass, stainAugment, stainNormalize, stylize } from "../src/transforms.js";
import { identityNetwork } from "../src/weights.js";
import { randomImage, tissueImage } from "./helpers.js";

// two PNG quantization steps (staging + output) bound reconstruction error
const QUANT = 2 / 255;

describe("stylize", () => {
  it("reproduces the content image through the identity network", () => {
    // style = content, so statistic alignment at full strength is the identity
    const content = randomImage(10, 32, 32);
    const out = stylize(content, content, {
      weights: identityNetwork(),
      contentSize: 32,
      styleSize: 32,
      seed: 1,
    });
    expect(out.height).toBe(32);
    expect(out.width).toBe(32);
    expect(meanAbsDiff(out, content)).toBeLessThanOrEqual(QUANT);
  });

  it("alpha 0 ignores the style image entirely", () => {
    const content = randomImage(12, 24, 24);
    const opts = { weights: identityNetwork(), contentSize: 24, styleSize: 16, alpha: 0 };
    const a = stylize(content, randomImage(13, 16, 16), opts);
    const b = stylize(content, randomImage(14, 16, 16), opts);
    expect(Array.from(a.data)).toEqual(Array.from(b.data));
  });
});

describe("stainAugment", () => {
  it("zero sigma is the identity up to quantization", () => {
    const img = tissueImage(20);
    const out = stainAugment(img, { sigmaScale: 0, sigmaShift: 0 });
    expect(meanAbsDiff(out, img)).toBeLessThanOrEqual(1e-4 + QUANT);
  });

  it("is deterministic under a fixed seed", () => {
    const img = tissueImage(21);
    const a = stainAugment(img, { seed: 7 });
    const b = stainAugment(img, { seed: 7 });
    expect(Array.from(a.data)).toEqual(Array.from(b.data));
    const c = stainAugment(img, { seed: 8 });
    expect(meanAbsDiff(a, c)).toBeGreaterThan(0);
  });
});

describe("stainNormalize", () => {
  it("normalizes a two-stain tile", () => {
    const result = stainNormalize(tissueImage(22, 64, 64));
    expect(result.ok).toBe(true);
    if (result.ok) {
      expect(result.image.height).toBe(64);
      expect(result.image.width).toBe(64);
    }
  });

  it("surfaces the skip reason for tissue-free tiles", () => {
    const result = stainNormalize(makeImage(32, 32, 1.0));
    expect(result.ok).toBe(false);
    if (!result.ok) expect(result.reason).toBe("InsufficientTissue");
  });
});

describe("lowpass", () => {
  it("is the identity at full spectral coverage", () => {
    const img = randomImage(30, 32, 32);
    const out = lowpass(img, Math.sqrt(2) * 16 + 1);
    expect(meanAbsDiff(out, img)).toBeLessThanOrEqual(QUANT);
  });

  it("leaves constant images untouched at any radius", () => {
    const img = makeImage(16, 16, 0.37);
    for (const r of [1, 4.5, 10]) {
      expect(meanAbsDiff(lowpass(img, r), img)).toBeLessThanOrEqual(1 / 255);
    }
  });

  it("rejects non-positive radii", () => {
    expect(() => lowpass(randomImage(31, 8, 8), 0)).toThrow(RangeError);
  });
});
