export * from "./report";
export * from "./stats";
export { renderVarianceCurve, varianceCurveData } from "./figures/varianceCurve";
export { renderVarReducBars, varReducBarsData } from "./figures/varReducBars";
export { renderRankChanges, rankChangesData } from "./figures/rankChanges";
export {
  renderAnticipatedVsObserved,
  anticipatedVsObservedData,
} from "./figures/anticipatedVsObserved";
export {
  renderEstimatorAgreement,
  estimatorAgreementData,
} from "./figures/estimatorAgreement";

import { Report } from "./report";
import { renderAnticipatedVsObserved } from "./figures/anticipatedVsObserved";
import { renderEstimatorAgreement } from "./figures/estimatorAgreement";
import { renderRankChanges } from "./figures/rankChanges";
import { renderVarianceCurve } from "./figures/varianceCurve";
import { renderVarReducBars } from "./figures/varReducBars";

export type FigureKind =
  | "variance-curve"
  | "var-reduc-bars"
  | "rank-changes"
  | "anticipated-vs-observed"
  | "estimator-agreement";

export const FIGURE_KINDS: FigureKind[] = [
  "variance-curve",
  "var-reduc-bars",
  "rank-changes",
  "anticipated-vs-observed",
  "estimator-agreement",
];

export function render(report: Report, kind: FigureKind): { svg: string; data: unknown } {
  switch (kind) {
    case "variance-curve":
      return renderVarianceCurve(report);
    case "var-reduc-bars":
      return renderVarReducBars(report);
    case "rank-changes":
      return renderRankChanges(report);
    case "anticipated-vs-observed":
      return renderAnticipatedVsObserved(report);
    case "estimator-agreement":
      return renderEstimatorAgreement(report);
    default:
      throw new Error(`unknown figure kind '${kind as string}'`);
  }
}
