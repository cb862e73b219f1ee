import * as path from "node:path";

import { runCli, withTempDir } from "./cli.js";
import { ScoreRow, writeScoreTable } from "./scores.js";

export interface TestEntry {
  versus: string;
  method: string;
  statistic: number;
  p_value: number;
  auroc_b: number;
  p_adjusted?: number;
  reject?: boolean;
}

export interface EvalReport {
  n: number;
  auroc: number;
  ci: { lo: number; hi: number; level: number; resamples: number; method: string };
  tests: TestEntry[];
  bh?: { q: number; adjusted: number[]; reject: boolean[] };
  [key: string]: unknown;
}

export interface EvalOptions {
  aggregate?: "none" | "patient";
  bootstrap?: number;
  level?: number;
  test?: "delong" | "permutation" | "paired-t";
  permutationN?: number;
  bhQ?: number;
  seed?: number;
}

/** Evaluate score tables through the CLI and parse its JSON report. */
export function evalScores(table: ScoreRow[], others: ScoreRow[][] = [],
                           options: EvalOptions = {}): EvalReport {
  return withTempDir((dir) => {
    const mainCsv = path.join(dir, "scores_a.csv");
    writeScoreTable(table, mainCsv);
    const otherCsvs = others.map((rows, i) => {
      const p = path.join(dir, `scores_b${i}.csv`);
      writeScoreTable(rows, p);
      return p;
    });
    const args = ["eval", mainCsv, ...otherCsvs];
    if (options.aggregate) args.push("--aggregate", options.aggregate);
    if (options.bootstrap !== undefined) args.push("--bootstrap", String(options.bootstrap));
    if (options.level !== undefined) args.push("--level", String(options.level));
    if (options.test) args.push("--test", options.test);
    if (options.permutationN !== undefined) args.push("--permutation-n", String(options.permutationN));
    if (options.bhQ !== undefined) args.push("--bh-q", String(options.bhQ));
    if (options.seed !== undefined) args.push("--seed", String(options.seed));
    return JSON.parse(runCli(args)) as EvalReport;
  });
}

/** AUROC of one score table (ties half-counted), computed natively. */
export function auroc(table: ScoreRow[]): number {
  return evalScores(table, [], { bootstrap: 1 }).auroc;
}

/** Percentile-bootstrap AUROC interval. */
export function bootstrapCi(table: ScoreRow[], resamples = 2000, level = 0.95,
                            seed = 0): { lo: number; hi: number } {
  const report = evalScores(table, [], { bootstrap: resamples, level, seed });
  return { lo: report.ci.lo, hi: report.ci.hi };
}

/** Paired DeLong comparison of two correlated AUROCs. */
export function delongTest(tableA: ScoreRow[], tableB: ScoreRow[]):
    { statistic: number; pValue: number } {
  const report = evalScores(tableA, [tableB], { test: "delong", bootstrap: 1 });
  const entry = report.tests[0];
  return { statistic: entry.statistic, pValue: entry.p_value };
}

/**
 * Benjamini-Hochberg step-up adjustment. Computed host-side (the CLI only
 * adjusts p-values it derives itself); verified against the native
 * implementation in the equivalence tests.
 */
export function bhAdjust(pvals: number[], q = 0.1): { adjusted: number[]; reject: boolean[] } {
  if (pvals.some((p) => p < 0 || p > 1 || !Number.isFinite(p))) {
    throw new RangeError(`p-values outside [0, 1]: ${pvals}`);
  }
  if (!(q > 0 && q < 1)) throw new RangeError(`q ${q}`);
  const m = pvals.length;
  if (m === 0) return { adjusted: [], reject: [] };
  const order = pvals.map((_, i) => i).sort((a, b) => pvals[a] - pvals[b] || a - b);
  const adjSorted = order.map((i, rank) => (pvals[i] * m) / (rank + 1));
  for (let k = m - 2; k >= 0; k--) {
    adjSorted[k] = Math.min(adjSorted[k], adjSorted[k + 1]);
  }
  const adjusted = new Array<number>(m);
  const reject = new Array<boolean>(m);
  order.forEach((i, rank) => {
    adjusted[i] = Math.min(1, adjSorted[rank]);
    reject[i] = adjusted[i] <= q;
  });
  return { adjusted, reject };
}

export type GradOracle = (x: number[]) => [number, number[]];

/**
 * Right-Riemann path-integral attribution from baseline to input. Host-side:
 * the gradient callback cannot cross the CLI process boundary.
 */
export function integratedGradients(oracle: GradOracle, input: number[],
                                    baseline: number[], steps = 50): number[] {
  if (input.length !== baseline.length) {
    throw new RangeError(`input ${input.length} vs baseline ${baseline.length}`);
  }
  if (steps < 1) throw new RangeError(`steps ${steps}`);
  const diff = input.map((v, i) => v - baseline[i]);
  const total = new Array<number>(input.length).fill(0);
  for (let k = 1; k <= steps; k++) {
    const point = baseline.map((v, i) => v + (k / steps) * diff[i]);
    const [, grad] = oracle(point);
    for (let i = 0; i < total.length; i++) total[i] += grad[i];
  }
  return total.map((g, i) => (g / steps) * diff[i]);
}
