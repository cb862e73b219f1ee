import * as fs from "node:fs";
import * as path from "node:path";

import { runCli, withTempDir } from "./cli.js";
import { ArrayImage, readPng, writePng } from "./image.js";
import { defaultRow, readManifest, writeManifest } from "./manifest.js";
import { Network, writeWeights } from "./weights.js";

/**
 * Array-in/array-out wrappers around the batch CLI. Each call stages the
 * image as a PNG tile with a one-row manifest, invokes the subcommand, and
 * reads the produced tile back. Semantics (and determinism under a fixed
 * seed) are exactly the CLI's.
 */

function stageTile(dir: string, name: string, image: ArrayImage): string {
  const tilePath = path.join(dir, "tiles", `${name}.png`);
  fs.mkdirSync(path.dirname(tilePath), { recursive: true });
  writePng(image, tilePath);
  const manifestPath = path.join(dir, "manifest.csv");
  writeManifest([defaultRow(tilePath)], manifestPath);
  return manifestPath;
}

function readSingleOutput(outDir: string): ArrayImage {
  const rows = readManifest(path.join(outDir, "manifest.csv"));
  if (rows.length !== 1) throw new Error(`expected 1 output tile, got ${rows.length}`);
  return readPng(rows[0].tilePath);
}

export interface StylizeOptions {
  weights: Network | string;
  alpha?: number;
  contentSize?: number;
  styleSize?: number;
  seed?: number;
}

export function stylize(content: ArrayImage, style: ArrayImage, options: StylizeOptions): ArrayImage {
  return withTempDir((dir) => {
    const contentManifest = stageTile(path.join(dir, "content"), "content", content);
    const styleManifest = stageTile(path.join(dir, "style"), "style", style);
    let weightsPath: string;
    if (typeof options.weights === "string") {
      weightsPath = options.weights;
    } else {
      weightsPath = path.join(dir, "net.bin");
      writeWeights(options.weights, weightsPath);
    }
    const out = path.join(dir, "out");
    const args = ["stylize", "--manifest", contentManifest,
      "--style-manifest", styleManifest, "--weights", weightsPath, "--out", out];
    if (options.alpha !== undefined) args.push("--alpha", String(options.alpha));
    if (options.contentSize !== undefined) args.push("--content-size", String(options.contentSize));
    if (options.styleSize !== undefined) args.push("--style-size", String(options.styleSize));
    if (options.seed !== undefined) args.push("--seed", String(options.seed));
    runCli(args);
    return readSingleOutput(out);
  });
}

export interface NormalizeOptions {
  /** Stain profile JSON; omitted = the CLI's packaged reference. */
  referencePath?: string;
  odThreshold?: number;
}

export type NormalizeResult =
  | { ok: true; image: ArrayImage }
  | { ok: false; reason: string };

/** Macenko normalization; unprocessable tiles surface their skip reason. */
export function stainNormalize(image: ArrayImage, options: NormalizeOptions = {}): NormalizeResult {
  return withTempDir((dir) => {
    const manifest = stageTile(path.join(dir, "in"), "tile", image);
    const out = path.join(dir, "out");
    const args = ["stain", "normalize", "--manifest", manifest, "--out", out];
    if (options.referencePath) args.push("--reference", options.referencePath);
    if (options.odThreshold !== undefined) args.push("--od-threshold", String(options.odThreshold));
    runCli(args);
    const skipped = fs.readFileSync(path.join(out, "skipped.csv"), "utf8")
      .trim().split("\n").slice(1);
    if (skipped.length > 0) {
      return { ok: false, reason: skipped[0].split(",")[1] };
    }
    return { ok: true, image: readSingleOutput(out) };
  });
}

export interface AugmentOptions {
  sigmaScale?: number;
  sigmaShift?: number;
  seed?: number;
}

/** Per-stain concentration jitter (random scale and shift per channel). */
export function stainAugment(image: ArrayImage, options: AugmentOptions = {}): ArrayImage {
  return withTempDir((dir) => {
    const manifest = stageTile(path.join(dir, "in"), "tile", image);
    const out = path.join(dir, "out");
    const args = ["stain", "augment", "--manifest", manifest, "--out", out];
    if (options.sigmaScale !== undefined) args.push("--sigma-scale", String(options.sigmaScale));
    if (options.sigmaShift !== undefined) args.push("--sigma-shift", String(options.sigmaShift));
    if (options.seed !== undefined) args.push("--seed", String(options.seed));
    runCli(args);
    return readSingleOutput(out);
  });
}

/** Keep spatial frequencies within `radius` of the centered spectrum's DC. */
export function lowpass(image: ArrayImage, radius: number): ArrayImage {
  if (!(radius > 0)) throw new RangeError(`radius ${radius}`);
  return withTempDir((dir) => {
    const manifest = stageTile(path.join(dir, "in"), "tile", image);
    const out = path.join(dir, "out");
    runCli(["lowpass", "--manifest", manifest, "--out", out, "--radii", String(radius)]);
    const radiusDirs = fs.readdirSync(out).filter((d) => d.startsWith("r"));
    if (radiusDirs.length !== 1) throw new Error(`expected 1 radius dir, got ${radiusDirs}`);
    return readSingleOutput(path.join(out, radiusDirs[0]));
  });
}
