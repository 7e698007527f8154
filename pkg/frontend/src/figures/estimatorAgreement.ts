/**
 * Agreement scatter between two uncertainty estimators (typically the
 * least-squares propagation on x and the bootstrap on y): one marker per
 * (query point, repetition, feature) cell, against the identity line.
 */

import { NoDataError, Report } from "../report";
import * as svg from "../svg";

export interface EstimatorAgreementData {
  xMethod: string;
  yMethod: string;
  /** variance cells, then covariance cells */
  varX: number[];
  varY: number[];
  covX: number[];
  covY: number[];
}

export function estimatorAgreementData(report: Report): EstimatorAgreementData {
  if (report.points.length === 0) throw new NoDataError("report contains no query points");
  const methods = Object.keys(report.points[0].cov_estimates).sort();
  if (methods.length < 2) {
    throw new NoDataError(
      "estimator agreement needs a run with two variance methods " +
        `(found: ${methods.join(", ") || "none"})`
    );
  }
  const preferred = ["ks_least_squares", "ks_bootstrap"];
  const [xMethod, yMethod] = preferred.every((m) => methods.includes(m))
    ? preferred
    : methods.slice(0, 2);
  const out: EstimatorAgreementData = { xMethod, yMethod, varX: [], varY: [], covX: [], covY: [] };
  for (const point of report.points) {
    const a = point.cov_estimates[xMethod];
    const b = point.cov_estimates[yMethod];
    for (let r = 0; r < a.var_model.length; r++) {
      out.varX.push(...a.var_model[r]);
      out.varY.push(...b.var_model[r]);
      out.covX.push(...a.cov[r]);
      out.covY.push(...b.cov[r]);
    }
  }
  return out;
}

export function renderEstimatorAgreement(
  report: Report
): { svg: string; data: EstimatorAgreementData } {
  const data = estimatorAgreementData(report);
  const frame: svg.Frame = {
    width: 520,
    height: 480,
    margin: svg.DEFAULT_MARGIN,
    title: "Uncertainty estimates: two methods, cell by cell",
    xLabel: data.xMethod,
    yLabel: data.yMethod,
  };
  const all = [...data.varX, ...data.varY, ...data.covX, ...data.covY];
  const domain = svg.extent(all, 0.05);
  const xScale = svg.linearScale(domain, [frame.margin.left, frame.width - frame.margin.right]);
  const yScale = svg.linearScale(domain, [frame.height - frame.margin.bottom, frame.margin.top]);
  const parts: string[] = [svg.axes(frame, xScale, yScale)];
  parts.push(
    `<line x1="${svg.fmt(xScale(domain[0]))}" y1="${svg.fmt(yScale(domain[0]))}" ` +
      `x2="${svg.fmt(xScale(domain[1]))}" y2="${svg.fmt(yScale(domain[1]))}" ` +
      `stroke="#999" stroke-dasharray="4 3"/>`
  );
  for (let i = 0; i < data.varX.length; i++) {
    parts.push(
      `<circle cx="${svg.fmt(xScale(data.varX[i]))}" cy="${svg.fmt(yScale(data.varY[i]))}" ` +
        `r="2.5" fill="#1f77b4" opacity="0.55"/>`
    );
  }
  for (let i = 0; i < data.covX.length; i++) {
    parts.push(
      `<circle cx="${svg.fmt(xScale(data.covX[i]))}" cy="${svg.fmt(yScale(data.covY[i]))}" ` +
        `r="2.5" fill="#d62728" opacity="0.55"/>`
    );
  }
  parts.push(
    svg.legend(frame, [
      { label: "variances", color: "#1f77b4" },
      { label: "covariances", color: "#d62728" },
    ])
  );
  return { svg: svg.document(frame, parts.join("\n")), data };
}
