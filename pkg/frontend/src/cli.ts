#!/usr/bin/env node
/**
 * Commands:
 *   validate <dataset-dir>          schema + digest + count validation
 *   summarize <dataset-dir>         summary statistics as JSON
 *   render <report.json> <out-dir>  write the SVG chart set
 */

import { loadDataset, summarize } from "./loader.js";
import { loadReport, renderReport } from "./report.js";

function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "validate" && rest.length === 1) {
      const ds = loadDataset(rest[0]!);
      console.log(
        `ok: ${ds.samples.length} samples across ${ds.manifest.episodes.length} episodes, 0 validation errors`,
      );
      return 0;
    }
    if (command === "summarize" && rest.length === 1) {
      const ds = loadDataset(rest[0]!);
      console.log(JSON.stringify(summarize(ds), null, 2));
      return 0;
    }
    if (command === "render" && rest.length === 2) {
      const report = loadReport(rest[0]!);
      const files = renderReport(report, rest[1]!);
      console.log(`wrote ${files.length} charts: ${files.join(", ")}`);
      return 0;
    }
  } catch (e) {
    console.error(String(e));
    return 1;
  }
  console.error("usage: palletbench-frontend validate|summarize <dataset> | render <report.json> <out>");
  return 64;
}

process.exit(main(process.argv.slice(2)));
