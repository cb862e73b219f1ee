import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

/** Path to the native CLI; override with the STRAPKIT_BIN env var. */
export function cliBinary(): string {
  return process.env.STRAPKIT_BIN ?? "strapkit";
}

export class CliError extends Error {
  constructor(args: string[], public readonly stderr: string) {
    super(`strapkit ${args.join(" ")} failed:\n${stderr}`);
  }
}

/** Run a CLI subcommand synchronously, returning stdout. */
export function runCli(args: string[]): string {
  try {
    return execFileSync(cliBinary(), args, { encoding: "utf8" });
  } catch (err) {
    const e = err as { stderr?: string; message: string };
    throw new CliError(args, e.stderr ?? e.message);
  }
}

/** Create a scratch directory, run fn, and always clean up. */
export function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "strapkit-"));
  try {
    return fn(dir);
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}
