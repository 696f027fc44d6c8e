import { describe, expect, it } from "vitest";
import { accuracyCurves, renderAccuracySvg } from "../src/accuracy";
import { EmptyInputError, parseResults } from "../src/frame";
import { csvOf, runRows } from "./helpers";

const FIVE_STRATEGIES = ["greedy", "gossip", "data", "network", "contextual"];

function fiveStrategyCsv(): string {
  return csvOf(
    FIVE_STRATEGIES.flatMap((strategy, index) =>
      runRows(`run-${strategy}`, strategy, {
        accuracies: [0.1 + index * 0.01, 0.3, 0.55 + index * 0.02],
        timeToHalfAccS: 25,
      }),
    ),
  );
}

describe("accuracyCurves", () => {
  it("builds one curve per strategy in canonical order", () => {
    const curves = accuracyCurves(parseResults(fiveStrategyCsv()));
    expect(curves.map((curve) => curve.strategy)).toEqual(FIVE_STRATEGIES);
    expect(curves.every((curve) => curve.points.length === 3)).toBe(true);
  });

  it("prefers the highest connection rate run for each strategy", () => {
    const csv = csvOf([
      ...runRows("low", "gossip", { connectionRate: 0.2, accuracies: [0.1, 0.2] }),
      ...runRows("high", "gossip", { connectionRate: 1.0, accuracies: [0.3, 0.6] }),
    ]);
    const curves = accuracyCurves(parseResults(csv));
    expect(curves).toHaveLength(1);
    expect(curves[0]!.runId).toBe("high");
  });

  it("skips unevaluated rounds", () => {
    const csv = csvOf([
      { runId: "r1", strategy: "gossip", round: 0, simTimeS: 5, testAccuracy: null },
      { runId: "r1", strategy: "gossip", round: 1, simTimeS: 10, testAccuracy: 0.4, timeToHalfAccS: "not reached" },
    ]);
    const curves = accuracyCurves(parseResults(csv));
    expect(curves[0]!.points).toEqual([{ time: 10, accuracy: 0.4 }]);
  });

  it("raises when no rounds were evaluated", () => {
    const csv = csvOf([
      { runId: "r1", strategy: "gossip", round: 0, simTimeS: 5, testAccuracy: null, timeToHalfAccS: "not reached" },
    ]);
    expect(() => accuracyCurves(parseResults(csv))).toThrowError(EmptyInputError);
  });
});

describe("renderAccuracySvg", () => {
  it("draws five labeled curves and the 0.5 reference line", () => {
    const svg = renderAccuracySvg(parseResults(fiveStrategyCsv()));
    expect(svg.match(/class="strategy-curve"/g)).toHaveLength(5);
    expect(svg.match(/class="legend-label"/g)).toHaveLength(5);
    for (const strategy of FIVE_STRATEGIES) {
      expect(svg).toContain(`data-strategy="${strategy}"`);
      expect(svg).toContain(`>${strategy}</text>`);
    }
    expect(svg.match(/class="reference-half"/g)).toHaveLength(1);
  });

  it("draws a single curve for a single run", () => {
    const svg = renderAccuracySvg(parseResults(csvOf(runRows("only", "contextual"))));
    expect(svg.match(/class="strategy-curve"/g)).toHaveLength(1);
  });

  it("is byte-identical across reruns on the same input", () => {
    const rows = parseResults(fiveStrategyCsv());
    expect(renderAccuracySvg(rows)).toBe(renderAccuracySvg(parseResults(fiveStrategyCsv())));
  });

  it("emits well-formed SVG markup", () => {
    const svg = renderAccuracySvg(parseResults(fiveStrategyCsv()));
    expect(svg.startsWith("<svg xmlns=")).toBe(true);
    expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
  });
});
