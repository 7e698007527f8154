/**
 * Per-feature variance-reduction bars with quartile whiskers across query
 * points, features ordered by the magnitude of their Shapley estimates.
 */

import { featureMagnitudes, NoDataError, Report } from "../report";
import { quartiles } from "../stats";
import * as svg from "../svg";

export interface VarReducBarsData {
  order: number[];
  labels: string[];
  q25: number[];
  median: number[];
  q75: number[];
}

export function varReducBarsData(report: Report): VarReducBarsData {
  if (report.points.length === 0) throw new NoDataError("report contains no query points");
  const d = report.feature_names.length;
  const magnitudes = featureMagnitudes(report);
  const order = [...Array(d).keys()].sort((a, b) => magnitudes[b] - magnitudes[a]);
  const q25: number[] = [];
  const median: number[] = [];
  const q75: number[] = [];
  for (const j of order) {
    const values: number[] = [];
    for (const point of report.points) {
      const last = point.var_reduc.length - 1;
      if (point.var_reduc_defined[last][j]) values.push(point.var_reduc[last][j]);
    }
    if (values.length === 0) throw new NoDataError(`no defined reductions for feature ${j}`);
    const q = quartiles(values);
    q25.push(q.q25);
    median.push(q.q50);
    q75.push(q.q75);
  }
  return { order, labels: order.map((j) => report.feature_names[j]), q25, median, q75 };
}

export function renderVarReducBars(report: Report): { svg: string; data: VarReducBarsData } {
  const data = varReducBarsData(report);
  const frame: svg.Frame = {
    width: 640,
    height: 420,
    margin: { ...svg.DEFAULT_MARGIN, bottom: 64 },
    title: "Variance reduction by feature (quartiles across query points)",
    xLabel: "features, by descending |Shapley estimate|",
    yLabel: "variance reduction",
  };
  const n = data.order.length;
  const x0 = frame.margin.left;
  const x1 = frame.width - frame.margin.right;
  const slot = (x1 - x0) / n;
  const yScale = svg.linearScale(
    svg.extent([0, 1, ...data.q25, ...data.q75], 0.02),
    [frame.height - frame.margin.bottom, frame.margin.top]
  );
  const xScale = svg.linearScale([0, n], [x0, x1]);
  const zero = yScale(0);
  const parts: string[] = [svg.axes(frame, xScale, yScale)];
  data.order.forEach((_, i) => {
    const cx = x0 + slot * (i + 0.5);
    const top = yScale(data.median[i]);
    const barWidth = slot * 0.55;
    parts.push(
      `<rect x="${svg.fmt(cx - barWidth / 2)}" y="${svg.fmt(Math.min(top, zero))}" ` +
        `width="${svg.fmt(barWidth)}" height="${svg.fmt(Math.abs(zero - top))}" ` +
        `fill="#1f77b4" opacity="0.8"/>`
    );
    parts.push(
      `<line x1="${svg.fmt(cx)}" y1="${svg.fmt(yScale(data.q25[i]))}" ` +
        `x2="${svg.fmt(cx)}" y2="${svg.fmt(yScale(data.q75[i]))}" stroke="#333" stroke-width="1.5"/>`
    );
    parts.push(
      `<text x="${svg.fmt(cx)}" y="${frame.height - frame.margin.bottom + 16}" ` +
        `font-size="10" text-anchor="end" transform="rotate(-45 ${svg.fmt(cx)} ` +
        `${frame.height - frame.margin.bottom + 16})">${svg.escapeText(data.labels[i])}</text>`
    );
  });
  return { svg: svg.document(frame, parts.join("\n")), data };
}
