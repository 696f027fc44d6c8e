/**
 * Accuracy-vs-simulated-time figure: one labeled curve per strategy over
 * evaluated rounds, with a horizontal reference line at accuracy 0.5.
 *
 * A grid CSV holds several runs per strategy (connection rates, class
 * ratios, seeds). A curve must be a single time series, so for each strategy
 * the run closest to the headline condition is drawn: highest connection
 * rate first, then most classes per client, then lowest run_id.
 */

import {
  DEFAULT_FRAME,
  Frame,
  document as svgDocument,
  escapeXml,
  fmt,
  legend,
  linearScale,
  niceTicks,
  orderStrategies,
  plotArea,
  strategyColor,
  xAxis,
  yAxis,
} from "./svg";
import { EmptyInputError, ResultRow } from "./frame";

export interface Curve {
  strategy: string;
  runId: string;
  points: Array<{ time: number; accuracy: number }>;
}

/** Pick one representative run per strategy and collect its evaluated rounds. */
export function accuracyCurves(rows: ResultRow[]): Curve[] {
  const byStrategy = new Map<string, Map<string, ResultRow[]>>();
  for (const row of rows) {
    const runs = byStrategy.get(row.strategy) ?? new Map<string, ResultRow[]>();
    const run = runs.get(row.runId) ?? [];
    run.push(row);
    runs.set(row.runId, run);
    byStrategy.set(row.strategy, runs);
  }
  const curves: Curve[] = [];
  for (const strategy of orderStrategies(byStrategy.keys())) {
    const runs = byStrategy.get(strategy)!;
    const ranked = [...runs.entries()].sort(([idA, rowsA], [idB, rowsB]) => {
      const headA = rowsA[0]!;
      const headB = rowsB[0]!;
      if (headA.connectionRate !== headB.connectionRate) {
        return headB.connectionRate - headA.connectionRate;
      }
      if (headA.classesPerClient !== headB.classesPerClient) {
        return headB.classesPerClient - headA.classesPerClient;
      }
      return idA < idB ? -1 : idA > idB ? 1 : 0;
    });
    const [runId, runRows] = ranked[0]!;
    const points = runRows
      .filter((row) => row.testAccuracy !== null)
      .map((row) => ({ time: row.simTimeS, accuracy: row.testAccuracy! }));
    if (points.length > 0) {
      curves.push({ strategy, runId, points });
    }
  }
  if (curves.length === 0) {
    throw new EmptyInputError("accuracy plot (no evaluated rounds)");
  }
  return curves;
}

export function renderAccuracySvg(rows: ResultRow[], frame: Frame = DEFAULT_FRAME): string {
  const curves = accuracyCurves(rows);
  const { x0, x1, y0, y1 } = plotArea(frame);
  const maxTime = Math.max(...curves.flatMap((curve) => curve.points.map((p) => p.time)));
  const xScale = linearScale([0, maxTime || 1], [x0, x1]);
  const yScale = linearScale([0, 1], [y0, y1]);

  const body: string[] = [];
  body.push(xAxis(frame, xScale, niceTicks([0, maxTime || 1], 6), "simulated time (s)"));
  body.push(yAxis(frame, yScale, niceTicks([0, 1], 5), "test accuracy"));
  const refY = yScale(0.5);
  body.push(
    `<line class="reference-half" x1="${fmt(x0)}" y1="${fmt(refY)}" x2="${fmt(x1)}" y2="${fmt(refY)}" stroke="#999" stroke-dasharray="6 4"/>`,
  );
  body.push(
    `<text x="${fmt(x1 - 4)}" y="${fmt(refY - 6)}" text-anchor="end" font-size="11" fill="#666">0.5</text>`,
  );
  curves.forEach((curve, index) => {
    const path = curve.points
      .map((point) => `${fmt(xScale(point.time))},${fmt(yScale(point.accuracy))}`)
      .join(" ");
    body.push(
      `<polyline class="strategy-curve" data-strategy="${escapeXml(curve.strategy)}" points="${path}" fill="none" stroke="${strategyColor(curve.strategy, index)}" stroke-width="2"/>`,
    );
  });
  body.push(
    legend(
      frame,
      curves.map((curve, index) => ({
        label: curve.strategy,
        color: strategyColor(curve.strategy, index),
      })),
    ),
  );
  return svgDocument(frame, "Test accuracy over simulated time", body.join("\n"));
}
