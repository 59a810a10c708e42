import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, describe, expect, it } from "vitest";

import {
  BoundPipeline,
  BridgeError,
  backtransform,
  computeFactors,
  transform,
  tune,
} from "../src/index.js";
import { readTrainingCsv, readTransformedCsv, readPredictionsCsv, writeQueryCsv } from "../src/csv.js";
import type { Factors } from "../src/bridge.js";
import { runCli } from "../src/runner.js";

const TOL = 1e-12;
const KERNEL = { family: "exponential" as const, range: 0.236, nugget: 0.25 };
const CAP = 10;

const scratch = mkdtempSync(join(tmpdir(), "vdecor-parity-"));
const handles: BoundPipeline[] = [];

afterAll(() => {
  for (const h of handles) h.dispose();
  rmSync(scratch, { recursive: true, force: true });
});

function maxAbsDiff(a: number[], b: number[]): number {
  expect(a.length).toBe(b.length);
  let worst = 0;
  for (let i = 0; i < a.length; i++) worst = Math.max(worst, Math.abs(a[i] - b[i]));
  return worst;
}

function simulate(seed: number): string {
  const dir = join(scratch, `ds-${seed}`);
  runCli(["simulate", "--scenario", "2", "--n", "120", "--seed", String(seed), "--out", dir]);
  return join(dir, "train.csv");
}

describe("bridge parity with the primary toolkit on 10 seeded datasets", () => {
  for (let seed = 0; seed < 10; seed++) {
    it(`dataset seed ${seed}`, () => {
      const trainCsv = simulate(seed);
      const { coords, features, response } = readTrainingCsv(trainCsv);

      const handle = computeFactors({
        coords, kernel: KERNEL, cap: CAP, response, features,
      });
      handles.push(handle);

      // primary outputs straight from the CLI on the original files
      const tOut = join(scratch, `primary-t-${seed}.csv`);
      const fOut = join(scratch, `primary-f-${seed}.json`);
      runCli([
        "transform", "--train", trainCsv, "--kernel", KERNEL.family,
        "--range", String(KERNEL.range), "--nugget", String(KERNEL.nugget),
        "--C", String(CAP), "--out", tOut, "--factors-out", fOut,
      ]);
      const primaryFactors = JSON.parse(readFileSync(fOut, "utf8")) as Factors;
      const primaryT = readTransformedCsv(tOut);

      // factors parity
      expect(handle.factors.order).toEqual(primaryFactors.order);
      expect(handle.factors.sets).toEqual(primaryFactors.sets);
      expect(maxAbsDiff(handle.factors.variances, primaryFactors.variances)).toBeLessThanOrEqual(TOL);
      for (let i = 0; i < handle.factors.weights.length; i++) {
        expect(maxAbsDiff(handle.factors.weights[i], primaryFactors.weights[i])).toBeLessThanOrEqual(TOL);
      }

      // forward-transform parity
      const bridged = transform(handle, response, features);
      expect(bridged.order).toEqual(primaryT.order);
      expect(maxAbsDiff(bridged.ytilde, primaryT.ytilde)).toBeLessThanOrEqual(TOL);
      for (let i = 0; i < bridged.xtilde.length; i++) {
        expect(maxAbsDiff(bridged.xtilde[i], primaryT.xtilde[i])).toBeLessThanOrEqual(TOL);
      }

      // back-transform parity at perturbed training locations
      const queries = coords.slice(0, 8).map((row) => row.map((v) => v + 0.013));
      const ytStar = queries.map((_, i) => Math.sin(seed + i));
      const viaBridge = backtransform(handle, queries, ytStar);

      const qPath = join(scratch, `primary-q-${seed}.csv`);
      writeQueryCsv(qPath, queries, [], { yt: ytStar });
      const pOut = join(scratch, `primary-p-${seed}.csv`);
      runCli([
        "backtransform", "--train", trainCsv, "--kernel", KERNEL.family,
        "--range", String(KERNEL.range), "--nugget", String(KERNEL.nugget),
        "--C", String(CAP), "--queries", qPath, "--out", pOut,
      ]);
      expect(maxAbsDiff(viaBridge, readPredictionsCsv(pOut))).toBeLessThanOrEqual(TOL);
    });
  }
});

describe("bridge semantics", () => {
  it("does not mutate caller arrays", () => {
    const trainCsv = simulate(77);
    const { coords, features, response } = readTrainingCsv(trainCsv);
    const coordsCopy = coords.map((r) => [...r]);
    const yCopy = [...response];
    const handle = computeFactors({ coords, kernel: KERNEL, cap: 5, response, features });
    handles.push(handle);
    transform(handle, response, features);
    expect(coords).toEqual(coordsCopy);
    expect(response).toEqual(yCopy);
  });

  it("nugget 1 produces unit variances through the bridge", () => {
    const coords = [[0.1, 0.2], [0.4, 0.9], [0.8, 0.3], [0.2, 0.7]];
    const handle = computeFactors({
      coords, kernel: { family: "exponential", range: 0.3, nugget: 1.0 },
    });
    handles.push(handle);
    expect(handle.factors.variances.every((v) => v === 1.0)).toBe(true);
  });

  it("rejects empty and malformed input with validation errors", () => {
    expect(() => computeFactors({ coords: [], kernel: KERNEL })).toThrowError(BridgeError);
    try {
      computeFactors({ coords: [[0.1, NaN]], kernel: KERNEL });
      expect.unreachable();
    } catch (err) {
      expect((err as BridgeError).code).toBe("validation");
    }
    try {
      computeFactors({ coords: [[0, 0]], kernel: { family: "matern", range: 0.3 } });
      expect.unreachable();
    } catch (err) {
      expect((err as BridgeError).code).toBe("validation");
    }
  });

  it("maps core validation failures onto exit-code errors", () => {
    try {
      runCli(["simulate", "--scenario", "9", "--n", "10", "--out", join(scratch, "nope")]);
      expect.unreachable();
    } catch (err) {
      expect((err as BridgeError).code).toBe("validation");
      expect((err as BridgeError).message).toContain("scenario");
    }
  });

  it("backtransform without stored responses is rejected", () => {
    const handle = computeFactors({ coords: [[0, 0], [1, 1]], kernel: KERNEL });
    handles.push(handle);
    try {
      backtransform(handle, [[0.5, 0.5]], [0.0]);
      expect.unreachable();
    } catch (err) {
      expect((err as BridgeError).code).toBe("validation");
    }
  });

  it("disposed handles refuse further work", () => {
    const handle = computeFactors({ coords: [[0, 0], [1, 1]], kernel: KERNEL });
    handle.dispose();
    expect(() => transform(handle, [0, 0], [])).toThrowError(BridgeError);
    handle.dispose(); // idempotent
  });

  it("tunes through the core grid search", () => {
    const trainCsv = simulate(88);
    const { coords, features, response } = readTrainingCsv(trainCsv);
    const handle = computeFactors({ coords, kernel: KERNEL, cap: CAP, response, features });
    handles.push(handle);
    const result = tune(handle, { learner: "lm", nuggets: [0.25, 1.0], ranges: [0.236], folds: 3 });
    expect(result.cells).toHaveLength(2);
    expect(result.folds).toBe(3);
    expect(result.best).toHaveProperty("mean_rmse");
  });
});
