import { describe, expect, it } from "vitest";
import { parseResults } from "../src/frame";
import { GossipBaselineMissingError, renderSummaryCsv, summarizeReductions } from "../src/table1";
import { csvOf, runRows } from "./helpers";

/** Reference full-connectivity timings used as the arithmetic fixture. */
const FIXTURE = csvOf([
  ...runRows("g-1.0", "gossip", { timeToHalfAccS: 3891.14 }),
  ...runRows("c-1.0", "contextual", { timeToHalfAccS: 213.5 }),
  ...runRows("d-1.0", "data", { timeToHalfAccS: 620.47 }),
  ...runRows("n-1.0", "network", { timeToHalfAccS: 193.77 }),
]);

describe("summarizeReductions", () => {
  it("reproduces the benchmark reduction rates to two decimals", () => {
    const summary = summarizeReductions(parseResults(FIXTURE));
    const byStrategy = new Map(summary.map((row) => [row.strategy, row]));
    expect(byStrategy.get("contextual")!.reductionVsGossip!.toFixed(2)).toBe("18.23");
    expect(byStrategy.get("data")!.reductionVsGossip!.toFixed(2)).toBe("6.27");
    expect(byStrategy.get("network")!.reductionVsGossip!.toFixed(2)).toBe("20.08");
  });

  it("gives the gossip baseline itself a 1.00 ratio", () => {
    const summary = summarizeReductions(parseResults(FIXTURE));
    const gossip = summary.find((row) => row.strategy === "gossip")!;
    expect(gossip.reductionVsGossip!.toFixed(2)).toBe("1.00");
  });

  it("prefers the gossip run at the highest connection rate as baseline", () => {
    const csv = csvOf([
      ...runRows("g-0.5", "gossip", { connectionRate: 0.5, timeToHalfAccS: 9000 }),
      ...runRows("g-1.0", "gossip", { connectionRate: 1.0, timeToHalfAccS: 1000 }),
      ...runRows("c-1.0", "contextual", { connectionRate: 1.0, timeToHalfAccS: 100 }),
    ]);
    const summary = summarizeReductions(parseResults(csv));
    const contextual = summary.find((row) => row.strategy === "contextual")!;
    expect(contextual.reductionVsGossip).toBeCloseTo(10.0);
  });

  it("keeps never-reached runs in the table with no ratio", () => {
    const csv = csvOf([
      ...runRows("g-1.0", "gossip", { timeToHalfAccS: 1000 }),
      ...runRows("x-1.0", "data", { timeToHalfAccS: "not reached" }),
    ]);
    const summary = summarizeReductions(parseResults(csv));
    const data = summary.find((row) => row.strategy === "data")!;
    expect(data.timeToHalfAccS).toBeNull();
    expect(data.reductionVsGossip).toBeNull();
  });

  it("raises when the gossip baseline is absent", () => {
    const csv = csvOf([...runRows("c-1.0", "contextual", { timeToHalfAccS: 100 })]);
    expect(() => summarizeReductions(parseResults(csv))).toThrowError(GossipBaselineMissingError);
  });

  it("sorts by descending connection rate, then strategy", () => {
    const csv = csvOf([
      ...runRows("g-1.0", "gossip", { connectionRate: 1.0, timeToHalfAccS: 1000 }),
      ...runRows("c-0.5", "contextual", { connectionRate: 0.5, timeToHalfAccS: 300 }),
      ...runRows("c-1.0", "contextual", { connectionRate: 1.0, timeToHalfAccS: 100 }),
    ]);
    const summary = summarizeReductions(parseResults(csv));
    expect(summary.map((row) => `${row.strategy}@${row.connectionRate}`)).toEqual([
      "contextual@1",
      "gossip@1",
      "contextual@0.5",
    ]);
  });
});

describe("renderSummaryCsv", () => {
  it("emits one row per run with formatted cells", () => {
    const summary = summarizeReductions(parseResults(FIXTURE));
    const text = renderSummaryCsv(summary);
    const lines = text.trim().split("\n");
    expect(lines[0]).toBe("connection_rate,classes_per_client,strategy,time_to_half_acc_s,reduction_vs_gossip");
    expect(lines).toHaveLength(5);
    expect(lines).toContain("1,2,contextual,213.5000,18.23");
    expect(lines).toContain("1,2,network,193.7700,20.08");
    expect(lines).toContain("1,2,data,620.4700,6.27");
    expect(lines).toContain("1,2,gossip,3891.1400,1.00");
  });

  it("writes the not-reached sentinel with an empty ratio cell", () => {
    const csv = csvOf([
      ...runRows("g-1.0", "gossip", { timeToHalfAccS: 1000 }),
      ...runRows("x-1.0", "data", { timeToHalfAccS: "not reached" }),
    ]);
    const text = renderSummaryCsv(summarizeReductions(parseResults(csv)));
    expect(text).toContain("1,2,data,not reached,");
  });
});
