import * as fs from "node:fs";
import * as path from "node:path";
import Papa from "papaparse";

export const MANIFEST_COLUMNS = [
  "tile_path",
  "patient_id",
  "slide_id",
  "domain_id",
  "label",
  "split",
] as const;

export interface ManifestRow {
  /** Resolved absolute path to the PNG tile. */
  tilePath: string;
  /** Path stem of tilePath; the CLI's stable identifier. */
  tileId: string;
  patientId: string;
  slideId: string;
  domainId: string;
  label: 0 | 1;
  split: string;
  extra: Record<string, string>;
}

function stem(p: string): string {
  return path.basename(p).replace(/\.[^.]+$/, "");
}

/** Parse a manifest CSV; relative tile paths resolve against its directory. */
export function readManifest(manifestPath: string): ManifestRow[] {
  const base = path.dirname(manifestPath);
  const parsed = Papa.parse<Record<string, string>>(
    fs.readFileSync(manifestPath, "utf8").trim(),
    { header: true, skipEmptyLines: true },
  );
  if (parsed.errors.length > 0) {
    throw new Error(`${manifestPath}: ${parsed.errors[0].message}`);
  }
  const fields = parsed.meta.fields ?? [];
  for (const col of MANIFEST_COLUMNS) {
    if (!fields.includes(col)) throw new Error(`${manifestPath}: missing column ${col}`);
  }
  const extraCols = fields.filter((f) => !(MANIFEST_COLUMNS as readonly string[]).includes(f));
  return parsed.data.map((row) => {
    const raw = row.tile_path;
    if (row.label !== "0" && row.label !== "1") {
      throw new Error(`${manifestPath}: label ${row.label} not in {0,1}`);
    }
    return {
      tilePath: path.isAbsolute(raw) ? raw : path.join(base, raw),
      tileId: stem(raw),
      patientId: row.patient_id,
      slideId: row.slide_id,
      domainId: row.domain_id,
      label: Number(row.label) as 0 | 1,
      split: row.split,
      extra: Object.fromEntries(extraCols.map((c) => [c, row[c]])),
    };
  });
}

/** Write rows as a manifest CSV with paths relative to the CSV's directory. */
export function writeManifest(rows: ManifestRow[], manifestPath: string): void {
  const base = path.dirname(manifestPath);
  fs.mkdirSync(base, { recursive: true });
  const lines = [MANIFEST_COLUMNS.join(",")];
  for (const row of rows) {
    const rel = path.relative(base, row.tilePath).split(path.sep).join("/");
    lines.push(
      [rel, row.patientId, row.slideId, row.domainId, String(row.label), row.split].join(","),
    );
  }
  fs.writeFileSync(manifestPath, lines.join("\n") + "\n");
}

/** Convenience metadata for single-tile round trips through the CLI. */
export function defaultRow(tilePath: string): ManifestRow {
  return {
    tilePath,
    tileId: stem(tilePath),
    patientId: "p0",
    slideId: "s0",
    domainId: "d0",
    label: 0,
    split: "train",
    extra: {},
  };
}
