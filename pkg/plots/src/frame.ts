/**
 * Tabular mirror of the simulator's results CSV.
 *
 * One row per (run, round). Within a run, only the final round's row carries
 * the time_to_half_acc_s cell: a number formatted in seconds, or the literal
 * sentinel "not reached" when the run ended below the 0.5 accuracy mark.
 * Every other row leaves the cell empty. test_accuracy is empty on rounds
 * the harness did not evaluate.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

export const NOT_REACHED = "not reached";

export const REQUIRED_COLUMNS = [
  "run_id",
  "strategy",
  "connection_rate",
  "classes_per_client",
  "round",
  "sim_time_s",
  "round_latency_s",
  "num_selected",
  "test_accuracy",
  "time_to_half_acc_s",
] as const;

export class MissingColumnError extends Error {
  constructor(column: string, source: string) {
    super(`missing required column "${column}" in ${source}`);
    this.name = "MissingColumnError";
  }
}

export class EmptyInputError extends Error {
  constructor(source: string) {
    super(`no data rows in ${source}`);
    this.name = "EmptyInputError";
  }
}

export interface ResultRow {
  runId: string;
  strategy: string;
  connectionRate: number;
  classesPerClient: number;
  round: number;
  simTimeS: number;
  roundLatencyS: number;
  numSelected: number;
  /** null when the harness skipped evaluation that round. */
  testAccuracy: number | null;
  /** Seconds, NOT_REACHED, or null on non-final rows. */
  timeToHalfAccS: number | typeof NOT_REACHED | null;
}

function parseNumber(cell: string, column: string, line: number): number {
  const value = Number(cell);
  if (cell === "" || Number.isNaN(value)) {
    throw new Error(`row ${line}: column "${column}" is not numeric: "${cell}"`);
  }
  return value;
}

function parseTimeToHalf(cell: string): number | typeof NOT_REACHED | null {
  if (cell === "") return null;
  if (cell === NOT_REACHED) return NOT_REACHED;
  const value = Number(cell);
  if (Number.isNaN(value)) {
    throw new Error(`time_to_half_acc_s is neither numeric nor "${NOT_REACHED}": "${cell}"`);
  }
  return value;
}

/** Parse one CSV document into rows sorted by (run_id, round). */
export function parseResults(csvText: string, source = "<input>"): ResultRow[] {
  const parsed = Papa.parse<Record<string, string>>(csvText, {
    header: true,
    skipEmptyLines: true,
  });
  const fields = parsed.meta.fields ?? [];
  for (const column of REQUIRED_COLUMNS) {
    if (!fields.includes(column)) {
      throw new MissingColumnError(column, source);
    }
  }
  if (parsed.data.length === 0) {
    throw new EmptyInputError(source);
  }
  const rows = parsed.data.map((record, index) => {
    const line = index + 2; // header is line 1
    const cell = (column: string): string => record[column] ?? "";
    return {
      runId: cell("run_id"),
      strategy: cell("strategy"),
      connectionRate: parseNumber(cell("connection_rate"), "connection_rate", line),
      classesPerClient: parseNumber(cell("classes_per_client"), "classes_per_client", line),
      round: parseNumber(cell("round"), "round", line),
      simTimeS: parseNumber(cell("sim_time_s"), "sim_time_s", line),
      roundLatencyS: parseNumber(cell("round_latency_s"), "round_latency_s", line),
      numSelected: parseNumber(cell("num_selected"), "num_selected", line),
      testAccuracy: cell("test_accuracy") === "" ? null : parseNumber(cell("test_accuracy"), "test_accuracy", line),
      timeToHalfAccS: parseTimeToHalf(cell("time_to_half_acc_s")),
    };
  });
  rows.sort((a, b) => (a.runId < b.runId ? -1 : a.runId > b.runId ? 1 : a.round - b.round));
  return rows;
}

/** Read and concatenate one or more results CSVs. */
export function loadResults(paths: string[]): ResultRow[] {
  if (paths.length === 0) {
    throw new EmptyInputError("(no input files)");
  }
  const rows = paths.flatMap((path) => parseResults(readFileSync(path, "utf8"), path));
  rows.sort((a, b) => (a.runId < b.runId ? -1 : a.runId > b.runId ? 1 : a.round - b.round));
  return rows;
}
