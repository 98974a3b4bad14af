import { spawnSync } from "node:child_process";

import { fromCliFailure } from "./errors.js";

/** Argv of the core CLI; DEOBS_CLI overrides, e.g. "python3 -m deobs". */
export function defaultCliCommand(): string[] {
  const env = process.env.DEOBS_CLI;
  if (env && env.trim()) {
    return env.trim().split(/\s+/);
  }
  return ["python3", "-m", "deobs"];
}

/** Run one CLI invocation synchronously and return its stdout. */
export function runCli(command: string[], args: string[]): string {
  const [exe, ...prefix] = command;
  const result = spawnSync(exe, [...prefix, ...args], {
    encoding: "utf8",
    maxBuffer: 1 << 28,
  });
  if (result.error) {
    throw result.error;
  }
  if (result.status !== 0) {
    throw fromCliFailure(result.status ?? -1, result.stderr ?? "");
  }
  return result.stdout ?? "";
}
