/**
 * Types and loader for the experiment report JSON written by the Python
 * `stableshap run` command. This is the only interface between the figure
 * renderers and the estimation library.
 */

import { readFileSync } from "fs";

export const SUPPORTED_SCHEMA_VERSION = 1;

export interface CovRecord {
  var_model: number[][]; // repetitions x features
  var_approx: number[][];
  cov: number[][];
}

export interface PointResult {
  index: number;
  x: number[];
  f_x: number;
  v_empty_ref: number;
  exact_approx: number[];
  /** checkpoints x repetitions x features */
  raw_model: number[][][];
  raw_approx: number[][][];
  cv: number[][][];
  alpha: number[][][];
  rho2: number[][][];
  cov_estimates: Record<string, CovRecord>;
  var_reduc: number[][]; // checkpoints x features
  var_reduc_defined: boolean[][];
  rank_changes_raw: number[];
  rank_changes_cv: number[];
  efficiency_raw: number[][];
  efficiency_cv: number[][];
  top5_median_var_reduc: (number | null)[];
}

export interface Report {
  schema_version: number;
  config: Record<string, unknown>;
  metadata: Record<string, unknown>;
  checkpoints: number[];
  feature_names: string[];
  points: PointResult[];
  errors: { index: number; error: string }[];
  aggregates: Record<string, number | null>;
}

export class SchemaMismatchError extends Error {
  constructor(found: unknown) {
    super(
      `report schema version ${String(found)} is not supported; ` +
        `this renderer understands version ${SUPPORTED_SCHEMA_VERSION}`
    );
    this.name = "SchemaMismatchError";
  }
}

export class NoDataError extends Error {
  constructor(detail: string) {
    super(`no data: ${detail}`);
    this.name = "NoDataError";
  }
}

export function parseReport(text: string): Report {
  const payload = JSON.parse(text) as Report;
  if (payload.schema_version !== SUPPORTED_SCHEMA_VERSION) {
    throw new SchemaMismatchError(payload.schema_version);
  }
  for (const key of ["checkpoints", "feature_names", "points"] as const) {
    if (!Array.isArray(payload[key])) {
      throw new Error(`malformed report: missing array field '${key}'`);
    }
  }
  return payload;
}

export function loadReport(path: string): Report {
  return parseReport(readFileSync(path, "utf-8"));
}

/** Index of the leading feature of a point: largest |mean raw estimate| at
 * the final checkpoint. */
export function topFeature(point: PointResult): number {
  const last = point.raw_model[point.raw_model.length - 1];
  const d = last[0].length;
  const means = new Array<number>(d).fill(0);
  for (const rep of last) {
    for (let j = 0; j < d; j++) means[j] += rep[j] / last.length;
  }
  let best = 0;
  for (let j = 1; j < d; j++) {
    if (Math.abs(means[j]) > Math.abs(means[best])) best = j;
  }
  return best;
}

/** Mean |raw estimate| per feature across points and repetitions at the
 * final checkpoint; used to order features the way the study plots do. */
export function featureMagnitudes(report: Report): number[] {
  const d = report.feature_names.length;
  const mags = new Array<number>(d).fill(0);
  let count = 0;
  for (const point of report.points) {
    const last = point.raw_model[point.raw_model.length - 1];
    const means = new Array<number>(d).fill(0);
    for (const rep of last) {
      for (let j = 0; j < d; j++) means[j] += rep[j] / last.length;
    }
    for (let j = 0; j < d; j++) mags[j] += Math.abs(means[j]);
    count += 1;
  }
  return mags.map((m) => m / Math.max(count, 1));
}
