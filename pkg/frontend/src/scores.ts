import * as fs from "node:fs";
import * as path from "node:path";
import Papa from "papaparse";

export interface ScoreRow {
  tileId: string;
  patientId: string;
  score: number;
  label: 0 | 1;
}

/** Build a score table from parallel arrays, one synthetic id per row. */
export function scoreTable(scores: number[], labels: (0 | 1)[], patientIds?: string[]): ScoreRow[] {
  if (scores.length !== labels.length) {
    throw new RangeError(`${scores.length} scores vs ${labels.length} labels`);
  }
  return scores.map((score, i) => ({
    tileId: `t${i}`,
    patientId: patientIds?.[i] ?? `p${i}`,
    score,
    label: labels[i],
  }));
}

export function writeScoreTable(rows: ScoreRow[], csvPath: string): void {
  fs.mkdirSync(path.dirname(csvPath), { recursive: true });
  const lines = ["tile_id,patient_id,score,label"];
  for (const r of rows) {
    lines.push(`${r.tileId},${r.patientId},${r.score},${r.label}`);
  }
  fs.writeFileSync(csvPath, lines.join("\n") + "\n");
}

export function readScoreTable(csvPath: string): ScoreRow[] {
  const parsed = Papa.parse<Record<string, string>>(
    fs.readFileSync(csvPath, "utf8").trim(),
    { header: true, skipEmptyLines: true },
  );
  if (parsed.errors.length > 0) {
    throw new Error(`${csvPath}: ${parsed.errors[0].message}`);
  }
  return parsed.data.map((row) => ({
    tileId: row.tile_id,
    patientId: row.patient_id,
    score: Number(row.score),
    label: Number(row.label) as 0 | 1,
  }));
}
