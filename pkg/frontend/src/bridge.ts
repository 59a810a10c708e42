/** Array-in/array-out access to the spatial decorrelation toolkit.
 *
 * Everything delegates to the core package through its public command-line
 * and file interfaces; no math is reimplemented on this side. Handles are
 * immutable after creation and carry explicit release semantics (dispose
 * removes their scratch directory). Caller arrays are never mutated.
 */

import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { readPredictionsCsv, readTransformedCsv, writeQueryCsv, writeTrainingCsv } from "./csv.js";
import type { TransformedData } from "./csv.js";
import { BridgeError, validationError } from "./errors.js";
import { runCli } from "./runner.js";

export interface KernelParams {
  family: "exponential" | "matern";
  range: number;
  nugget?: number;
  smoothness?: number;
}

export interface Factors {
  version: number;
  cap: number;
  model: Record<string, unknown>;
  order: number[];
  sets: number[][];
  weights: number[][];
  variances: number[];
}

export interface PipelineOptions {
  coords: number[][];
  kernel: KernelParams;
  cap?: number;
  /** training responses; required for backtransform */
  response?: number[];
  /** raw training features (no intercept column) */
  features?: number[][];
}

function kernelArgs(kernel: KernelParams, cap: number): string[] {
  const args = ["--kernel", kernel.family, "--range", String(kernel.range),
                "--nugget", String(kernel.nugget ?? 0), "--C", String(cap)];
  if (kernel.family === "matern") {
    if (kernel.smoothness === undefined) {
      throw validationError("matern kernel needs a smoothness value");
    }
    args.push("--smoothness", String(kernel.smoothness));
  }
  return args;
}

function checkMatrix(name: string, rows: number[][], n?: number): void {
  if (n !== undefined && rows.length !== n) {
    throw validationError(`${name} has ${rows.length} rows, expected ${n}`);
  }
  const width = rows.length ? rows[0].length : 0;
  for (const [i, row] of rows.entries()) {
    if (row.length !== width) throw validationError(`${name} row ${i} has ragged width`);
    if (row.some((v) => typeof v !== "number" || !Number.isFinite(v))) {
      throw validationError(`${name} row ${i} contains a non-finite value`);
    }
  }
}

export class BoundPipeline {
  readonly coords: number[][];
  readonly kernel: KernelParams;
  readonly cap: number;
  readonly factors: Factors;
  readonly response?: number[];
  readonly features?: number[][];
  private readonly dir: string;
  private disposed = false;

  /** @internal use computeFactors() */
  constructor(opts: PipelineOptions, dir: string, factors: Factors) {
    this.coords = opts.coords;
    this.kernel = opts.kernel;
    this.cap = opts.cap ?? 30;
    this.response = opts.response;
    this.features = opts.features;
    this.dir = dir;
    this.factors = factors;
  }

  scratch(name: string): string {
    if (this.disposed) throw new BridgeError("validation", "pipeline handle was disposed");
    return join(this.dir, name);
  }

  get trainingCsv(): string {
    return this.scratch("train.csv");
  }

  dispose(): void {
    if (!this.disposed) {
      rmSync(this.dir, { recursive: true, force: true });
      this.disposed = true;
    }
  }
}

/** Compute decorrelation factors for a coordinate array. */
export function computeFactors(opts: PipelineOptions): BoundPipeline {
  if (!opts.coords.length) throw validationError("empty coordinate array");
  checkMatrix("coords", opts.coords);
  const n = opts.coords.length;
  const y = opts.response ?? new Array<number>(n).fill(0);
  const X = opts.features ?? [];
  if (opts.response) checkMatrix("response", [opts.response], undefined);
  if (opts.features) checkMatrix("features", opts.features, n);
  const dir = mkdtempSync(join(tmpdir(), "vdecor-bridge-"));
  try {
    const train = join(dir, "train.csv");
    writeTrainingCsv(train, opts.coords, X, y);
    const factorsPath = join(dir, "factors.json");
    runCli([
      "transform", "--train", train, ...kernelArgs(opts.kernel, opts.cap ?? 30),
      "--out", join(dir, "transformed.csv"), "--factors-out", factorsPath,
    ]);
    const factors = JSON.parse(readFileSync(factorsPath, "utf8")) as Factors;
    return new BoundPipeline(opts, dir, factors);
  } catch (err) {
    rmSync(dir, { recursive: true, force: true });
    throw err;
  }
}

/** Decorrelate a response vector and feature matrix with a handle's kernel.
 * Returns rows in max-min order along with the ordering itself. */
export function transform(handle: BoundPipeline, y: number[], X: number[][]): TransformedData {
  const n = handle.coords.length;
  if (y.length !== n) throw validationError(`response length ${y.length} != ${n}`);
  if (X.length) checkMatrix("features", X, n);
  const train = handle.scratch("transform-input.csv");
  writeTrainingCsv(train, handle.coords, X, y);
  const out = handle.scratch("transform-output.csv");
  runCli([
    "transform", "--train", train, ...kernelArgs(handle.kernel, handle.cap), "--out", out,
  ]);
  return readTransformedCsv(out);
}

/** Re-correlate decorrelated predictions at query locations (needs the
 * handle to carry training responses). */
export function backtransform(
  handle: BoundPipeline,
  queries: number[][],
  ytStar: number[],
): number[] {
  if (!handle.response) {
    throw validationError("handle has no training responses; pass response to computeFactors");
  }
  checkMatrix("queries", queries);
  if (queries.length !== ytStar.length) {
    throw validationError(`got ${queries.length} queries but ${ytStar.length} predictions`);
  }
  const qPath = handle.scratch("backtransform-queries.csv");
  writeQueryCsv(qPath, queries, [], { yt: ytStar });
  const out = handle.scratch("backtransform-output.csv");
  runCli([
    "backtransform", "--train", handle.trainingCsv,
    ...kernelArgs(handle.kernel, handle.cap), "--queries", qPath, "--out", out,
  ]);
  return readPredictionsCsv(out);
}

export interface TuneOptions {
  learner?: "lm" | "knn" | "trees";
  nuggets?: number[];
  ranges?: number[];
  learnerGrid?: Record<string, number[]>;
  folds?: number;
  seed?: number;
}

export interface TuneResult {
  best: Record<string, unknown>;
  cells: Record<string, unknown>[];
  folds: number;
  seed: number;
}

/** Cross-validated kernel/learner grid search over the handle's training
 * data (requires response; features come from the handle when present). */
export function tune(handle: BoundPipeline, opts: TuneOptions = {}): TuneResult {
  if (!handle.response) {
    throw validationError("handle has no training responses; pass response to computeFactors");
  }
  const out = handle.scratch("cv.json");
  const args = [
    "tune", "--train", handle.trainingCsv, "--learner", opts.learner ?? "lm",
    "--folds", String(opts.folds ?? 5), "--seed", String(opts.seed ?? 0),
    "--kernel", handle.kernel.family, "--C", String(handle.cap), "--out", out,
  ];
  if (handle.kernel.family === "matern") {
    args.push("--smoothness", String(handle.kernel.smoothness));
  }
  if (opts.nuggets) args.push("--nuggets", opts.nuggets.join(","));
  if (opts.ranges) args.push("--ranges", opts.ranges.join(","));
  if (opts.learnerGrid) args.push("--learner-grid", JSON.stringify(opts.learnerGrid));
  runCli(args);
  return JSON.parse(readFileSync(out, "utf8")) as TuneResult;
}
