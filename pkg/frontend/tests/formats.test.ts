import * as fs from "node:fs";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

import { withTempDir, runCli } from "../src/cli.js";
import { readPng, writePng } from "../src/image.js";
import { defaultRow, readManifest, writeManifest } from "../src/manifest.js";
import { readProfile } from "../src/profile.js";
import { readScoreTable, scoreTable, writeScoreTable } from "../src/scores.js";
import { identityNetwork, readWeights, writeWeights } from "../src/weights.js";
import { randomImage, tissueImage } from "./helpers.js";

describe("png codec", () => {
  it("round trips 8-bit quantized pixels exactly", () => {
    withTempDir((dir) => {
      const img = randomImage(1, 20, 15);
      // quantize first so the round trip is exact rather than within 1/255
      for (let i = 0; i < img.data.length; i++) {
        img.data[i] = Math.round(img.data[i] * 255) / 255;
      }
      const p = path.join(dir, "t.png");
      writePng(img, p);
      const back = readPng(p);
      expect(back.height).toBe(20);
      expect(back.width).toBe(15);
      expect(Array.from(back.data)).toEqual(Array.from(img.data));
    });
  });
});

describe("manifest csv", () => {
  it("round trips rows with relative paths", () => {
    withTempDir((dir) => {
      const tilePath = path.join(dir, "tiles", "abc.png");
      fs.mkdirSync(path.dirname(tilePath), { recursive: true });
      writePng(randomImage(2, 8, 8), tilePath);
      const manifestPath = path.join(dir, "manifest.csv");
      writeManifest([defaultRow(tilePath)], manifestPath);
      const rows = readManifest(manifestPath);
      expect(rows).toHaveLength(1);
      expect(rows[0].tileId).toBe("abc");
      expect(rows[0].tilePath).toBe(tilePath);
      expect(rows[0].label).toBe(0);
    });
  });
});

describe("score table csv", () => {
  it("round trips scores and labels", () => {
    withTempDir((dir) => {
      const rows = scoreTable([0.25, 0.5, 0.75], [0, 1, 1]);
      const p = path.join(dir, "scores.csv");
      writeScoreTable(rows, p);
      expect(readScoreTable(p)).toEqual(rows);
    });
  });
});

describe("weight container", () => {
  it("round trips the identity network", () => {
    withTempDir((dir) => {
      const p = path.join(dir, "net.bin");
      writeWeights(identityNetwork(), p);
      const back = readWeights(p);
      expect(back.encoder).toHaveLength(1);
      expect(back.decoder).toHaveLength(1);
      const conv = back.encoder[0];
      expect(conv.kind).toBe("conv");
      if (conv.kind === "conv") {
        expect(conv.dims).toEqual([3, 3, 1, 1]);
        expect(Array.from(conv.weight)).toEqual([1, 0, 0, 0, 1, 0, 0, 0, 1]);
      }
      expect(fs.existsSync(p + ".json")).toBe(true);
    });
  });
});

describe("stain profile json", () => {
  it("parses a profile estimated by the CLI", () => {
    withTempDir((dir) => {
      const tilePath = path.join(dir, "tissue.png");
      writePng(tissueImage(3, 50, 50), tilePath);
      const profilePath = path.join(dir, "profile.json");
      runCli(["estimate-reference", "--tile", tilePath, "--out", profilePath]);
      const profile = readProfile(profilePath);
      expect(profile.stainMatrix).toHaveLength(3);
      for (let col = 0; col < 2; col++) {
        const norm = Math.hypot(...profile.stainMatrix.map((row) => row[col]));
        expect(norm).toBeCloseTo(1, 6);
      }
      expect(profile.maxConc[0]).toBeGreaterThan(0);
    });
  });
});
