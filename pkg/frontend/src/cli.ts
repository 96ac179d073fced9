#!/usr/bin/env node
import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { parseResultsCsv, trialsFromManifest, SchemaError } from "./csv.js";
import { renderPlot, FigureKind, FIGURE_KINDS, NoDataError, PlotSpec } from "./plot.js";

const USAGE = `usage: risopt-plot plot --csv <results.csv> --kind <k> --out <figure.svg>
                   [--manifest <manifest.json>] [--trials <n>]
                   [--group-by <col,col>] [--linear-y] [--title <text>]

kinds: ${FIGURE_KINDS.join(", ")}
exit codes: 0 ok, 2 bad arguments or schema, 3 no data to plot`;

/** Run the CLI against argv (no leading node/script); returns the exit code. */
export function runCli(argv: string[]): number {
  if (argv[0] !== "plot") {
    process.stderr.write(`${USAGE}\n`);
    return 2;
  }
  let opts;
  try {
    opts = parseArgs({
      args: argv.slice(1),
      options: {
        csv: { type: "string" },
        kind: { type: "string" },
        out: { type: "string" },
        manifest: { type: "string" },
        trials: { type: "string" },
        "group-by": { type: "string" },
        "linear-y": { type: "boolean" },
        title: { type: "string" },
      },
    }).values;
  } catch (e) {
    process.stderr.write(`${(e as Error).message}\n${USAGE}\n`);
    return 2;
  }
  if (!opts.csv || !opts.kind || !opts.out) {
    process.stderr.write(`--csv, --kind and --out are required\n${USAGE}\n`);
    return 2;
  }
  if (!(FIGURE_KINDS as string[]).includes(opts.kind)) {
    process.stderr.write(`unknown kind ${opts.kind}; expected one of ${FIGURE_KINDS.join(", ")}\n`);
    return 2;
  }

  try {
    const rows = parseResultsCsv(readFileSync(opts.csv, "utf-8"));
    let mcTrials: number | undefined;
    if (opts.trials !== undefined) {
      mcTrials = Number(opts.trials);
      if (!Number.isInteger(mcTrials) || mcTrials < 1) {
        process.stderr.write(`--trials must be a positive integer, got ${opts.trials}\n`);
        return 2;
      }
    } else if (opts.manifest !== undefined) {
      mcTrials = trialsFromManifest(readFileSync(opts.manifest, "utf-8"));
    }
    const spec: PlotSpec = {
      kind: opts.kind as FigureKind,
      mcTrials,
      title: opts.title,
    };
    if (opts["group-by"]) spec.groupBy = opts["group-by"].split(",").map((s) => s.trim());
    if (opts["linear-y"]) spec.logY = false;
    const svg = renderPlot(rows, spec);
    writeFileSync(opts.out, svg, "utf-8");
    process.stdout.write(`wrote ${opts.out}\n`);
    return 0;
  } catch (e) {
    if (e instanceof NoDataError) {
      process.stderr.write(`${e.message}\n`);
      return 3;
    }
    if (e instanceof SchemaError || (e as NodeJS.ErrnoException).code === "ENOENT") {
      process.stderr.write(`${(e as Error).message}\n`);
      return 2;
    }
    throw e;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(runCli(process.argv.slice(2)));
}
