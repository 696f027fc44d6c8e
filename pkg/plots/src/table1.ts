/**
 * Reduction-rate summary: per run, the time to reach 0.5 test accuracy and
 * that time's reduction relative to the gossip baseline (gossip time divided
 * by the strategy's time). The baseline is the gossip run at the highest
 * connection rate present. Runs that never reached 0.5 keep a "not reached"
 * cell and no ratio.
 */

import { NOT_REACHED, ResultRow } from "./frame";

export class GossipBaselineMissingError extends Error {
  constructor() {
    super("gossip baseline missing from CSV");
    this.name = "GossipBaselineMissingError";
  }
}

export interface SummaryRow {
  runId: string;
  strategy: string;
  connectionRate: number;
  classesPerClient: number;
  timeToHalfAccS: number | null;
  reductionVsGossip: number | null;
}

export function summarizeReductions(rows: ResultRow[]): SummaryRow[] {
  const runs = new Map<string, SummaryRow>();
  for (const row of rows) {
    const entry = runs.get(row.runId) ?? {
      runId: row.runId,
      strategy: row.strategy,
      connectionRate: row.connectionRate,
      classesPerClient: row.classesPerClient,
      timeToHalfAccS: null,
      reductionVsGossip: null,
    };
    if (typeof row.timeToHalfAccS === "number") {
      entry.timeToHalfAccS = row.timeToHalfAccS;
    }
    runs.set(row.runId, entry);
  }

  let baseline: { connectionRate: number; time: number } | null = null;
  for (const run of runs.values()) {
    if (run.strategy !== "gossip" || run.timeToHalfAccS === null) continue;
    if (
      baseline === null ||
      run.connectionRate > baseline.connectionRate ||
      (run.connectionRate === baseline.connectionRate && run.timeToHalfAccS > baseline.time)
    ) {
      baseline = { connectionRate: run.connectionRate, time: run.timeToHalfAccS };
    }
  }
  if (baseline === null) {
    throw new GossipBaselineMissingError();
  }

  const summary = [...runs.values()].map((run) => ({
    ...run,
    reductionVsGossip:
      run.timeToHalfAccS === null || run.timeToHalfAccS === 0 ? null : baseline!.time / run.timeToHalfAccS,
  }));
  summary.sort((a, b) => {
    if (a.connectionRate !== b.connectionRate) return b.connectionRate - a.connectionRate;
    if (a.strategy !== b.strategy) return a.strategy < b.strategy ? -1 : 1;
    return a.classesPerClient - b.classesPerClient;
  });
  return summary;
}

function formatConnectionRate(value: number): string {
  return Number(value.toPrecision(6)).toString();
}

export function renderSummaryCsv(summary: SummaryRow[]): string {
  const lines = ["connection_rate,classes_per_client,strategy,time_to_half_acc_s,reduction_vs_gossip"];
  for (const row of summary) {
    const time = row.timeToHalfAccS === null ? NOT_REACHED : row.timeToHalfAccS.toFixed(4);
    const reduction = row.reductionVsGossip === null ? "" : row.reductionVsGossip.toFixed(2);
    lines.push(
      [formatConnectionRate(row.connectionRate), row.classesPerClient, row.strategy, time, reduction].join(","),
    );
  }
  return lines.join("\n") + "\n";
}
