#!/usr/bin/env node
/**
 * Command-line entry: render figures from a run directory.
 *
 *   ridk-plots <run-dir> [--kind profiles|heatmap|mass|all] [--out DIR]
 *
 * `all` (the default) picks profiles or heatmaps from the run's
 * dimension and always adds the mass figure.  Figures land in --out
 * (default ./figures), never in the run directory.  Exit code 1 on
 * usage or file-format errors.
 */

import { renderRun, type FigureKind } from "./figures.js";

const USAGE =
  "usage: ridk-plots <run-dir> [--kind profiles|heatmap|mass|all] [--out DIR]";

function main(argv: string[]): number {
  let runDir: string | null = null;
  let kind: FigureKind | "all" = "all";
  let outDir = "figures";
  for (let k = 0; k < argv.length; k++) {
    const arg = argv[k]!;
    if (arg === "--kind") {
      const v = argv[++k];
      if (v !== "profiles" && v !== "heatmap" && v !== "mass" && v !== "all") {
        console.error(`unknown figure kind ${v}\n${USAGE}`);
        return 1;
      }
      kind = v;
    } else if (arg === "--out") {
      const v = argv[++k];
      if (!v) {
        console.error(`--out needs a directory\n${USAGE}`);
        return 1;
      }
      outDir = v;
    } else if (arg === "--help" || arg === "-h") {
      console.log(USAGE);
      return 0;
    } else if (arg.startsWith("-")) {
      console.error(`unknown flag ${arg}\n${USAGE}`);
      return 1;
    } else if (runDir === null) {
      runDir = arg;
    } else {
      console.error(`unexpected argument ${arg}\n${USAGE}`);
      return 1;
    }
  }
  if (runDir === null) {
    console.error(USAGE);
    return 1;
  }
  try {
    const result = renderRun(runDir, kind, outDir);
    for (const f of result.written) console.log(f);
    for (const flag of result.flags) {
      const mark = flag.flagged ? "NEGATIVE" : "ok";
      console.log(
        `  ${flag.file}: t = ${flag.t.toFixed(3)}, min density ` +
          `${flag.minRho.toExponential(3)} [${mark}]`,
      );
    }
    return 0;
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
