import { REQUIRED_COLUMNS } from "../src/frame";

export interface RowSpec {
  runId: string;
  strategy: string;
  connectionRate?: number;
  classesPerClient?: number;
  round: number;
  simTimeS: number;
  roundLatencyS?: number;
  numSelected?: number;
  testAccuracy?: number | null;
  timeToHalfAccS?: number | "not reached" | null;
}

/** Build a results CSV document from terse row specs. */
export function csvOf(rows: RowSpec[]): string {
  const lines = [REQUIRED_COLUMNS.join(",")];
  for (const row of rows) {
    lines.push(
      [
        row.runId,
        row.strategy,
        row.connectionRate ?? 1.0,
        row.classesPerClient ?? 2,
        row.round,
        row.simTimeS,
        row.roundLatencyS ?? 1.0,
        row.numSelected ?? 10,
        row.testAccuracy === null ? "" : (row.testAccuracy ?? 0.1),
        row.timeToHalfAccS === undefined || row.timeToHalfAccS === null ? "" : row.timeToHalfAccS,
      ].join(","),
    );
  }
  return lines.join("\n") + "\n";
}

/** A minimal complete run: `evals` evaluated rounds, final row carries time-to-half. */
export function runRows(
  runId: string,
  strategy: string,
  options: {
    connectionRate?: number;
    classesPerClient?: number;
    accuracies?: number[];
    timeToHalfAccS?: number | "not reached";
  } = {},
): RowSpec[] {
  const accuracies = options.accuracies ?? [0.1, 0.3, 0.6];
  return accuracies.map((accuracy, index) => ({
    runId,
    strategy,
    connectionRate: options.connectionRate,
    classesPerClient: options.classesPerClient,
    round: index,
    simTimeS: (index + 1) * 10,
    testAccuracy: accuracy,
    timeToHalfAccS: index === accuracies.length - 1 ? (options.timeToHalfAccS ?? "not reached") : null,
  }));
}
