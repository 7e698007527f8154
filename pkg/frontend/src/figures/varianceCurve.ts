/**
 * Variance-vs-coalition-count curves with interquartile bands: raw versus
 * corrected estimates of each point's leading feature, pooled over query
 * points. The per-(point, repetition) statistic at a checkpoint is the
 * squared deviation from that point's across-repetition mean.
 */

import { NoDataError, Report, topFeature } from "../report";
import { percentile } from "../stats";
import * as svg from "../svg";

export interface BandSeries {
  median: number[];
  q25: number[];
  q75: number[];
}

export interface VarianceCurveData {
  checkpoints: number[];
  raw: BandSeries;
  corrected: BandSeries;
}

function squaredDeviations(estimates: number[][], feature: number): number[] {
  const column = estimates.map((rep) => rep[feature]);
  const m = column.reduce((a, b) => a + b, 0) / column.length;
  return column.map((v) => (v - m) * (v - m));
}

export function varianceCurveData(report: Report): VarianceCurveData {
  if (report.points.length === 0) throw new NoDataError("report contains no query points");
  const nCheckpoints = report.checkpoints.length;
  const raw: BandSeries = { median: [], q25: [], q75: [] };
  const corrected: BandSeries = { median: [], q25: [], q75: [] };
  for (let c = 0; c < nCheckpoints; c++) {
    const rawCells: number[] = [];
    const cvCells: number[] = [];
    for (const point of report.points) {
      const j = topFeature(point);
      rawCells.push(...squaredDeviations(point.raw_model[c], j));
      cvCells.push(...squaredDeviations(point.cv[c], j));
    }
    raw.median.push(percentile(rawCells, 50));
    raw.q25.push(percentile(rawCells, 25));
    raw.q75.push(percentile(rawCells, 75));
    corrected.median.push(percentile(cvCells, 50));
    corrected.q25.push(percentile(cvCells, 25));
    corrected.q75.push(percentile(cvCells, 75));
  }
  return { checkpoints: report.checkpoints, raw, corrected };
}

export function renderVarianceCurve(report: Report): { svg: string; data: VarianceCurveData } {
  const data = varianceCurveData(report);
  const frame: svg.Frame = {
    width: 640,
    height: 420,
    margin: svg.DEFAULT_MARGIN,
    title: "Estimator variability vs coalition budget",
    xLabel: "coalitions per estimate",
    yLabel: "squared deviation of leading-feature estimate",
  };
  const allY = [
    ...data.raw.q25, ...data.raw.q75, ...data.raw.median,
    ...data.corrected.q25, ...data.corrected.q75, ...data.corrected.median,
  ];
  const xScale = svg.linearScale(svg.extent(data.checkpoints, 0.02), [
    frame.margin.left,
    frame.width - frame.margin.right,
  ]);
  const yScale = svg.linearScale(svg.extent([0, ...allY], 0.02), [
    frame.height - frame.margin.bottom,
    frame.margin.top,
  ]);
  const xs = data.checkpoints.map(xScale);
  const body = [
    svg.axes(frame, xScale, yScale),
    `<path d="${svg.bandPath(xs, data.raw.q25.map(yScale), data.raw.q75.map(yScale))}" ` +
      `fill="#d62728" opacity="0.18"/>`,
    `<path d="${svg.bandPath(xs, data.corrected.q25.map(yScale), data.corrected.q75.map(yScale))}" ` +
      `fill="#1f77b4" opacity="0.18"/>`,
    `<path d="${svg.polylinePath(xs, data.raw.median.map(yScale))}" stroke="#d62728" ` +
      `fill="none" stroke-width="2"/>`,
    `<path d="${svg.polylinePath(xs, data.corrected.median.map(yScale))}" stroke="#1f77b4" ` +
      `fill="none" stroke-width="2"/>`,
    svg.legend(frame, [
      { label: "raw estimate", color: "#d62728" },
      { label: "with control variate", color: "#1f77b4" },
    ]),
  ].join("\n");
  return { svg: svg.document(frame, body), data };
}
