/**
 * Anticipated versus observed variance reduction, per feature. The
 * anticipated value is the squared estimated stream correlation averaged over
 * repetitions; quartile whiskers summarize its spread across query points.
 */

import { featureMagnitudes, NoDataError, Report } from "../report";
import { mean, percentile, quartiles } from "../stats";
import * as svg from "../svg";

export interface AnticipatedVsObservedData {
  order: number[];
  labels: string[];
  anticipatedQ25: number[];
  anticipatedMedian: number[];
  anticipatedQ75: number[];
  observedMedian: number[];
}

export function anticipatedVsObservedData(report: Report): AnticipatedVsObservedData {
  if (report.points.length === 0) throw new NoDataError("report contains no query points");
  const d = report.feature_names.length;
  const magnitudes = featureMagnitudes(report);
  const order = [...Array(d).keys()].sort((a, b) => magnitudes[b] - magnitudes[a]);
  const out: AnticipatedVsObservedData = {
    order,
    labels: order.map((j) => report.feature_names[j]),
    anticipatedQ25: [],
    anticipatedMedian: [],
    anticipatedQ75: [],
    observedMedian: [],
  };
  for (const j of order) {
    const anticipated: number[] = [];
    const observed: number[] = [];
    for (const point of report.points) {
      const last = point.rho2.length - 1;
      anticipated.push(mean(point.rho2[last].map((rep) => rep[j])));
      if (point.var_reduc_defined[last][j]) observed.push(point.var_reduc[last][j]);
    }
    const q = quartiles(anticipated);
    out.anticipatedQ25.push(q.q25);
    out.anticipatedMedian.push(q.q50);
    out.anticipatedQ75.push(q.q75);
    out.observedMedian.push(observed.length ? percentile(observed, 50) : NaN);
  }
  return out;
}

export function renderAnticipatedVsObserved(
  report: Report
): { svg: string; data: AnticipatedVsObservedData } {
  const data = anticipatedVsObservedData(report);
  const frame: svg.Frame = {
    width: 640,
    height: 420,
    margin: { ...svg.DEFAULT_MARGIN, bottom: 64 },
    title: "Anticipated vs observed variance reduction",
    xLabel: "features, by descending |Shapley estimate|",
    yLabel: "variance reduction",
  };
  const n = data.order.length;
  const x0 = frame.margin.left;
  const x1 = frame.width - frame.margin.right;
  const slot = (x1 - x0) / n;
  const finiteObs = data.observedMedian.filter((v) => Number.isFinite(v));
  const yScale = svg.linearScale(
    svg.extent([0, 1, ...data.anticipatedQ25, ...data.anticipatedQ75, ...finiteObs], 0.02),
    [frame.height - frame.margin.bottom, frame.margin.top]
  );
  const xScale = svg.linearScale([0, n], [x0, x1]);
  const parts: string[] = [svg.axes(frame, xScale, yScale)];
  for (let i = 0; i < n; i++) {
    const cx = x0 + slot * (i + 0.5);
    parts.push(
      `<line x1="${svg.fmt(cx)}" y1="${svg.fmt(yScale(data.anticipatedQ25[i]))}" ` +
        `x2="${svg.fmt(cx)}" y2="${svg.fmt(yScale(data.anticipatedQ75[i]))}" ` +
        `stroke="#1f77b4" stroke-width="2"/>`
    );
    parts.push(
      `<circle cx="${svg.fmt(cx)}" cy="${svg.fmt(yScale(data.anticipatedMedian[i]))}" ` +
        `r="4" fill="#1f77b4"/>`
    );
    if (Number.isFinite(data.observedMedian[i])) {
      parts.push(
        `<rect x="${svg.fmt(cx - 4)}" y="${svg.fmt(yScale(data.observedMedian[i]) - 4)}" ` +
          `width="8" height="8" fill="none" stroke="#d62728" stroke-width="2"/>`
      );
    }
    parts.push(
      `<text x="${svg.fmt(cx)}" y="${frame.height - frame.margin.bottom + 16}" ` +
        `font-size="10" text-anchor="end" transform="rotate(-45 ${svg.fmt(cx)} ` +
        `${frame.height - frame.margin.bottom + 16})">${svg.escapeText(data.labels[i])}</text>`
    );
  }
  parts.push(
    svg.legend(frame, [
      { label: "anticipated (rho^2)", color: "#1f77b4" },
      { label: "observed (median)", color: "#d62728" },
    ])
  );
  return { svg: svg.document(frame, parts.join("\n")), data };
}
