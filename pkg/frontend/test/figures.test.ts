import { mkdtempSync, readFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { main as cliMain } from "../src/cli";
import { anticipatedVsObservedData, renderAnticipatedVsObserved } from "../src/figures/anticipatedVsObserved";
import { estimatorAgreementData, renderEstimatorAgreement } from "../src/figures/estimatorAgreement";
import { rankChangesData, renderRankChanges } from "../src/figures/rankChanges";
import { renderVarianceCurve, varianceCurveData } from "../src/figures/varianceCurve";
import { renderVarReducBars, varReducBarsData } from "../src/figures/varReducBars";
import { FIGURE_KINDS, render } from "../src/index";
import { NoDataError, parseReport, Report, SchemaMismatchError, topFeature } from "../src/report";

const FIXTURE = join(__dirname, "..", "fixtures", "sample_report.json");

function fixture(): Report {
  return parseReport(readFileSync(FIXTURE, "utf-8"));
}

/** Reference percentile, written out independently of src/stats.ts:
 * linear interpolation between order statistics. */
function refPercentile(values: number[], q: number): number {
  const s = [...values].sort((a, b) => a - b);
  const pos = (q / 100) * (s.length - 1);
  const lo = Math.floor(pos);
  const hi = Math.ceil(pos);
  return lo === hi ? s[lo] : s[lo] + (pos - lo) * (s[hi] - s[lo]);
}

describe("rendering from the checked-in sample report", () => {
  it.each(FIGURE_KINDS)("renders %s without error", (kind) => {
    const { svg } = render(fixture(), kind);
    expect(svg.startsWith("<svg")).toBe(true);
    expect(svg).toContain("</svg>");
    expect(svg.length).toBeGreaterThan(1000);
  });

  it("is a pure function of the report", () => {
    const a = render(fixture(), "variance-curve").svg;
    const b = render(fixture(), "variance-curve").svg;
    expect(a).toBe(b);
  });
});

describe("variance curve bands", () => {
  it("matches an independent percentile recomputation to 1e-9", () => {
    const report = fixture();
    const data = varianceCurveData(report);
    report.checkpoints.forEach((_, c) => {
      const rawCells: number[] = [];
      const cvCells: number[] = [];
      for (const point of report.points) {
        const j = topFeature(point);
        for (const source of ["raw_model", "cv"] as const) {
          const reps = point[source][c];
          const column = reps.map((rep) => rep[j]);
          const m = column.reduce((x, y) => x + y, 0) / column.length;
          const sq = column.map((v) => (v - m) * (v - m));
          (source === "raw_model" ? rawCells : cvCells).push(...sq);
        }
      }
      expect(Math.abs(data.raw.q25[c] - refPercentile(rawCells, 25))).toBeLessThan(1e-9);
      expect(Math.abs(data.raw.median[c] - refPercentile(rawCells, 50))).toBeLessThan(1e-9);
      expect(Math.abs(data.raw.q75[c] - refPercentile(rawCells, 75))).toBeLessThan(1e-9);
      expect(Math.abs(data.corrected.q25[c] - refPercentile(cvCells, 25))).toBeLessThan(1e-9);
      expect(Math.abs(data.corrected.q75[c] - refPercentile(cvCells, 75))).toBeLessThan(1e-9);
    });
  });

  it("shows the corrected band below the raw one here", () => {
    const data = varianceCurveData(fixture());
    const last = data.checkpoints.length - 1;
    expect(data.corrected.median[last]).toBeLessThan(data.raw.median[last]);
  });
});

describe("variance reduction bars", () => {
  it("matches an independent quartile recomputation to 1e-9", () => {
    const report = fixture();
    const data = varReducBarsData(report);
    data.order.forEach((j, i) => {
      const values: number[] = [];
      for (const point of report.points) {
        const last = point.var_reduc.length - 1;
        if (point.var_reduc_defined[last][j]) values.push(point.var_reduc[last][j]);
      }
      expect(Math.abs(data.q25[i] - refPercentile(values, 25))).toBeLessThan(1e-9);
      expect(Math.abs(data.median[i] - refPercentile(values, 50))).toBeLessThan(1e-9);
      expect(Math.abs(data.q75[i] - refPercentile(values, 75))).toBeLessThan(1e-9);
    });
  });

  it("orders features by estimate magnitude", () => {
    const data = varReducBarsData(fixture());
    expect(new Set(data.order).size).toBe(data.order.length);
    expect(data.labels.length).toBe(data.order.length);
  });
});

describe("rank changes", () => {
  it("carries the report values through unchanged", () => {
    const report = fixture();
    const data = rankChangesData(report);
    report.points.forEach((point, i) => {
      expect(data.raw[i]).toBe(point.rank_changes_raw[point.rank_changes_raw.length - 1]);
      expect(data.corrected[i]).toBe(point.rank_changes_cv[point.rank_changes_cv.length - 1]);
    });
  });
});

describe("anticipated vs observed", () => {
  it("matches an independent quartile recomputation to 1e-9", () => {
    const report = fixture();
    const data = anticipatedVsObservedData(report);
    data.order.forEach((j, i) => {
      const anticipated: number[] = [];
      for (const point of report.points) {
        const last = point.rho2.length - 1;
        const perRep = point.rho2[last].map((rep) => rep[j]);
        anticipated.push(perRep.reduce((x, y) => x + y, 0) / perRep.length);
      }
      expect(Math.abs(data.anticipatedQ25[i] - refPercentile(anticipated, 25))).toBeLessThan(1e-9);
      expect(Math.abs(data.anticipatedMedian[i] - refPercentile(anticipated, 50))).toBeLessThan(1e-9);
      expect(Math.abs(data.anticipatedQ75[i] - refPercentile(anticipated, 75))).toBeLessThan(1e-9);
    });
  });
});

describe("estimator agreement", () => {
  it("collects one cell per (point, repetition, feature)", () => {
    const report = fixture();
    const data = estimatorAgreementData(report);
    const first = report.points[0];
    const reps = first.cov_estimates[data.xMethod].var_model.length;
    const d = report.feature_names.length;
    expect(data.varX.length).toBe(report.points.length * reps * d);
    expect(data.varY.length).toBe(data.varX.length);
    expect(data.covX.length).toBe(data.varX.length);
  });

  it("requires two recorded methods", () => {
    const report = fixture();
    for (const point of report.points) {
      point.cov_estimates = { ks_least_squares: point.cov_estimates["ks_least_squares"] };
    }
    expect(() => estimatorAgreementData(report)).toThrow(NoDataError);
  });
});

describe("error handling", () => {
  it("rejects unknown schema versions with a versioned message", () => {
    const payload = JSON.parse(readFileSync(FIXTURE, "utf-8"));
    payload.schema_version = 99;
    expect(() => parseReport(JSON.stringify(payload))).toThrow(SchemaMismatchError);
    expect(() => parseReport(JSON.stringify(payload))).toThrow(/version 99.*version 1/s);
  });

  it("raises an explicit no-data error on an empty report", () => {
    const report = fixture();
    report.points = [];
    expect(() => renderVarianceCurve(report)).toThrow(NoDataError);
    expect(() => renderVarReducBars(report)).toThrow(NoDataError);
    expect(() => renderRankChanges(report)).toThrow(NoDataError);
    expect(() => renderAnticipatedVsObserved(report)).toThrow(NoDataError);
    expect(() => renderEstimatorAgreement(report)).toThrow(NoDataError);
  });
});

describe("command line", () => {
  it("writes the requested figure and succeeds", () => {
    const dir = mkdtempSync(join(tmpdir(), "figs-"));
    const out = join(dir, "fig.svg");
    const code = cliMain(["--report", FIXTURE, "--kind", "var-reduc-bars", "--out", out]);
    expect(code).toBe(0);
    expect(readFileSync(out, "utf-8").startsWith("<svg")).toBe(true);
  });

  it("rejects unknown kinds", () => {
    const code = cliMain(["--report", FIXTURE, "--kind", "pie", "--out", "x.svg"]);
    expect(code).toBe(2);
  });
});
