/** Readers/writers for the core toolkit's delimited schemas.
 *
 * JavaScript's default number-to-string conversion is the shortest
 * round-trip form, so values written here parse back to bit-identical
 * doubles on the Python side and vice versa.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { validationError } from "./errors.js";

export function writeTrainingCsv(
  path: string,
  coords: number[][],
  features: number[][],
  response: number[],
): void {
  const n = coords.length;
  if (n === 0) throw validationError("empty coordinate array");
  const d = coords[0].length;
  const p = features.length ? features[0].length : 0;
  if (features.length !== 0 && features.length !== n) {
    throw validationError(`feature rows ${features.length} != ${n}`);
  }
  if (response.length !== n) throw validationError(`response length ${response.length} != ${n}`);
  const header = [
    ...Array.from({ length: d }, (_, j) => `loc_${j + 1}`),
    ...Array.from({ length: p }, (_, j) => `x_${j + 1}`),
    "y",
  ];
  const lines = [header.join(",")];
  for (let i = 0; i < n; i++) {
    const row = [...coords[i], ...(p ? features[i] : []), response[i]];
    if (row.some((v) => typeof v !== "number" || !Number.isFinite(v))) {
      throw validationError(`non-finite value in row ${i}`);
    }
    lines.push(row.map(String).join(","));
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

export function writeQueryCsv(
  path: string,
  coords: number[][],
  features: number[][],
  extras?: Record<string, number[]>,
): void {
  const n = coords.length;
  const d = n ? coords[0].length : 2;
  const p = features.length ? features[0].length : 0;
  const header = [
    ...Array.from({ length: d }, (_, j) => `loc_${j + 1}`),
    ...Array.from({ length: p }, (_, j) => `x_${j + 1}`),
    ...Object.keys(extras ?? {}),
  ];
  const lines = [header.join(",")];
  for (let i = 0; i < n; i++) {
    const row = [...coords[i], ...(p ? features[i] : [])];
    for (const key of Object.keys(extras ?? {})) row.push((extras as Record<string, number[]>)[key][i]);
    lines.push(row.map(String).join(","));
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

export interface TransformedData {
  /** original row index of each transformed row (max-min order) */
  order: number[];
  ytilde: number[];
  /** transformed design including the transformed intercept column */
  xtilde: number[][];
}

export function readTransformedCsv(path: string): TransformedData {
  const lines = readFileSync(path, "utf8").trim().split("\n");
  const header = lines[0].split(",");
  if (header[0] !== "row" || header[header.length - 1] !== "yt") {
    throw validationError(`${path}: not a transformed-data file`);
  }
  const order: number[] = [];
  const ytilde: number[] = [];
  const xtilde: number[][] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(",").map(Number);
    order.push(cells[0]);
    ytilde.push(cells[cells.length - 1]);
    xtilde.push(cells.slice(1, cells.length - 1));
  }
  return { order, ytilde, xtilde };
}

export interface TrainingData {
  coords: number[][];
  features: number[][];
  response: number[];
}

export function readTrainingCsv(path: string): TrainingData {
  const lines = readFileSync(path, "utf8").trim().split("\n");
  const header = lines[0].split(",");
  let d = 0;
  while (d < header.length && header[d] === `loc_${d + 1}`) d++;
  let p = 0;
  while (d + p < header.length && header[d + p] === `x_${p + 1}`) p++;
  if (d === 0 || header[d + p] !== "y") {
    throw validationError(`${path}: not a training file (header ${header.slice(0, 4).join(",")}...)`);
  }
  const coords: number[][] = [];
  const features: number[][] = [];
  const response: number[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(",").map(Number);
    coords.push(cells.slice(0, d));
    features.push(cells.slice(d, d + p));
    response.push(cells[d + p]);
  }
  return { coords, features, response };
}

export function readPredictionsCsv(path: string): number[] {
  const lines = readFileSync(path, "utf8").trim().split("\n");
  const header = lines[0].split(",");
  const col = header.indexOf("y_star");
  if (col < 0) throw validationError(`${path}: missing y_star column`);
  return lines.slice(1).map((line) => Number(line.split(",")[col]));
}
