/**
 * Rank-stability comparison: average pairwise rank changes across
 * repetitions, per query point, with and without the correction.
 */

import { NoDataError, Report } from "../report";
import * as svg from "../svg";

export interface RankChangesData {
  points: number[];
  raw: number[];
  corrected: number[];
}

export function rankChangesData(report: Report): RankChangesData {
  if (report.points.length === 0) throw new NoDataError("report contains no query points");
  const points: number[] = [];
  const raw: number[] = [];
  const corrected: number[] = [];
  for (const point of report.points) {
    points.push(point.index);
    raw.push(point.rank_changes_raw[point.rank_changes_raw.length - 1]);
    corrected.push(point.rank_changes_cv[point.rank_changes_cv.length - 1]);
  }
  return { points, raw, corrected };
}

export function renderRankChanges(report: Report): { svg: string; data: RankChangesData } {
  const data = rankChangesData(report);
  const frame: svg.Frame = {
    width: 640,
    height: 420,
    margin: svg.DEFAULT_MARGIN,
    title: "Rank changes across repetitions, per query point",
    xLabel: "query point",
    yLabel: "average pairwise rank changes",
  };
  const n = data.points.length;
  const x0 = frame.margin.left;
  const x1 = frame.width - frame.margin.right;
  const slot = (x1 - x0) / n;
  const xScale = svg.linearScale([0, n], [x0, x1]);
  const yScale = svg.linearScale(
    svg.extent([0, ...data.raw, ...data.corrected], 0.02),
    [frame.height - frame.margin.bottom, frame.margin.top]
  );
  const zero = yScale(0);
  const parts: string[] = [svg.axes(frame, xScale, yScale)];
  for (let i = 0; i < n; i++) {
    const cx = x0 + slot * (i + 0.5);
    const w = slot * 0.3;
    const yRaw = yScale(data.raw[i]);
    const yCv = yScale(data.corrected[i]);
    parts.push(
      `<rect x="${svg.fmt(cx - w - 1)}" y="${svg.fmt(yRaw)}" width="${svg.fmt(w)}" ` +
        `height="${svg.fmt(zero - yRaw)}" fill="#d62728" opacity="0.8"/>`
    );
    parts.push(
      `<rect x="${svg.fmt(cx + 1)}" y="${svg.fmt(yCv)}" width="${svg.fmt(w)}" ` +
        `height="${svg.fmt(zero - yCv)}" fill="#1f77b4" opacity="0.8"/>`
    );
    parts.push(
      `<text x="${svg.fmt(cx)}" y="${frame.height - frame.margin.bottom + 16}" ` +
        `font-size="10" text-anchor="middle">${data.points[i]}</text>`
    );
  }
  parts.push(
    svg.legend(frame, [
      { label: "raw estimate", color: "#d62728" },
      { label: "with control variate", color: "#1f77b4" },
    ])
  );
  return { svg: svg.document(frame, parts.join("\n")), data };
}
