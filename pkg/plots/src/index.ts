export {
  EmptyInputError,
  MissingColumnError,
  NOT_REACHED,
  REQUIRED_COLUMNS,
  loadResults,
  parseResults,
} from "./frame";
export type { ResultRow } from "./frame";
export { accuracyCurves, renderAccuracySvg } from "./accuracy";
export type { Curve } from "./accuracy";
export { ratioGroups, renderRatioBarsSvg } from "./ratios";
export type { BarGroup } from "./ratios";
export { GossipBaselineMissingError, renderSummaryCsv, summarizeReductions } from "./table1";
export type { SummaryRow } from "./table1";
