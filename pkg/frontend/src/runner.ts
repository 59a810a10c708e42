/** Spawns the core command-line toolkit and maps its exit codes onto typed
 * bridge errors (1: validation, 2: numerical failure). The binary defaults
 * to `python3 -m vdecor` and can be overridden with VDECOR_BIN. */

import { spawnSync } from "node:child_process";

import { BridgeError } from "./errors.js";

export function cliCommand(): string[] {
  const override = process.env.VDECOR_BIN;
  if (override && override.trim()) return override.trim().split(/\s+/);
  return ["python3", "-m", "vdecor"];
}

export function runCli(args: string[]): string {
  const [bin, ...pre] = cliCommand();
  const proc = spawnSync(bin, [...pre, ...args], { encoding: "utf8" });
  if (proc.error) {
    throw new BridgeError("io", `failed to launch ${bin}: ${proc.error.message}`);
  }
  if (proc.status === 0) return proc.stdout;
  const message = (proc.stderr || proc.stdout || "").trim() || `exit code ${proc.status}`;
  if (proc.status === 1) throw new BridgeError("validation", message);
  if (proc.status === 2) throw new BridgeError("numerical", message);
  throw new BridgeError("internal", message);
}
