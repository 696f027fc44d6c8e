#!/usr/bin/env node
/**
 * plots accuracy|ratios|table1 --in CSV [--in CSV ...] --out PATH
 *
 * accuracy  SVG of test accuracy over simulated time, one curve per strategy.
 * ratios    SVG of accuracy-at-budget bars grouped by classes per client.
 * table1    CSV of time-to-half-accuracy and reduction rate vs gossip.
 */

import { parseArgs } from "node:util";
import { writeFileSync } from "node:fs";
import { loadResults } from "./frame";
import { renderAccuracySvg } from "./accuracy";
import { renderRatioBarsSvg } from "./ratios";
import { renderSummaryCsv, summarizeReductions } from "./table1";

const USAGE = `usage: plots <accuracy|ratios|table1> --in CSV [--in CSV ...] --out PATH

subcommands:
  accuracy   accuracy-vs-simulated-time curves per strategy (SVG)
  ratios     accuracy-at-budget bars grouped by class ratio (SVG)
  table1     time-to-half-accuracy and reduction-vs-gossip summary (CSV)

options:
  --in PATH   results CSV from the simulator (repeatable)
  --out PATH  output file
  --help      show this message
`;

export function run(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        in: { type: "string", multiple: true },
        out: { type: "string" },
        help: { type: "boolean" },
      },
    });
  } catch (error) {
    process.stderr.write(`plots: ${(error as Error).message}\n${USAGE}`);
    return 2;
  }
  if (parsed.values.help) {
    process.stdout.write(USAGE);
    return 0;
  }
  const subcommand = parsed.positionals[0];
  if (subcommand === undefined || !["accuracy", "ratios", "table1"].includes(subcommand)) {
    process.stderr.write(`plots: expected a subcommand (accuracy|ratios|table1)\n${USAGE}`);
    return 2;
  }
  const inputs = parsed.values.in ?? [];
  if (inputs.length === 0) {
    process.stderr.write(`plots: at least one --in CSV is required\n${USAGE}`);
    return 2;
  }
  const out = parsed.values.out;
  if (out === undefined) {
    process.stderr.write(`plots: --out PATH is required\n${USAGE}`);
    return 2;
  }

  try {
    const rows = loadResults(inputs);
    const output =
      subcommand === "accuracy"
        ? renderAccuracySvg(rows)
        : subcommand === "ratios"
          ? renderRatioBarsSvg(rows)
          : renderSummaryCsv(summarizeReductions(rows));
    writeFileSync(out, output);
  } catch (error) {
    process.stderr.write(`plots: ${(error as Error).message}\n`);
    return 1;
  }
  return 0;
}

if (require.main === module) {
  process.exitCode = run(process.argv.slice(2));
}
