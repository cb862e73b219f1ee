import * as fs from "node:fs";

/** Two-stain basis: (3, 2) unit-norm columns (hematoxylin, eosin) plus
 * robust per-stain concentration scales, stored as JSON. */
export interface StainProfile {
  /** 3 rows (R, G, B optical density) by 2 columns. */
  stainMatrix: number[][];
  maxConc: [number, number];
}

export function readProfile(path: string): StainProfile {
  const raw = JSON.parse(fs.readFileSync(path, "utf8"));
  const m: number[][] = raw.stain_matrix;
  if (!Array.isArray(m) || m.length !== 3 || m.some((r) => r.length !== 2)) {
    throw new Error(`${path}: stain_matrix must be 3x2`);
  }
  return { stainMatrix: m, maxConc: [raw.max_conc[0], raw.max_conc[1]] };
}

export function writeProfile(profile: StainProfile, path: string): void {
  fs.writeFileSync(path, JSON.stringify({
    stain_matrix: profile.stainMatrix,
    max_conc: profile.maxConc,
  }, null, 2));
}
