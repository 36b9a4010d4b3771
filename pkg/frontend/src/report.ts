/**
 * Static chart rendering for a palletbench metrics report: one SVG per
 * metric family, grouped by box-count bucket and task variant, with
 * deterministic file names.
 */

import { mkdirSync, writeFileSync, readFileSync } from "node:fs";
import { join } from "node:path";

import { BarSeries, barChartSvg } from "./charts.js";
import { BUCKETS, Report, reportSchema } from "./schema.js";

export class MalformedReportError extends Error {
  readonly code = "malformed-report";
}

export function parseReport(raw: string): Report {
  let json: unknown;
  try {
    json = JSON.parse(raw);
  } catch (e) {
    throw new MalformedReportError(`report is not JSON: ${e}`);
  }
  const result = reportSchema.safeParse(json);
  if (!result.success) {
    throw new MalformedReportError(`report invalid: ${result.error.issues[0]?.message}`);
  }
  return result.data;
}

export function loadReport(path: string): Report {
  return parseReport(readFileSync(path, "utf-8"));
}

type PerBucket = Record<string, { pct: number; count: number } | null>;

function bucketValues(row: PerBucket): (number | null)[] {
  return BUCKETS.map((b) => row[b]?.pct ?? null);
}

function weightedVariantAggregate(row: PerBucket): number | null {
  let wins = 0;
  let n = 0;
  for (const bucket of BUCKETS) {
    const cell = row[bucket];
    if (cell) {
      wins += (cell.pct * cell.count) / 100;
      n += cell.count;
    }
  }
  return n ? (100 * wins) / n : null;
}

export function renderReport(report: Report, outDir: string): string[] {
  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];
  const write = (name: string, svg: string) => {
    writeFileSync(join(outDir, name), svg);
    written.push(name);
  };

  const modes = Object.keys(report.plan_success).sort();
  if (modes.length > 0) {
    write(
      "plan_success_by_bucket.svg",
      barChartSvg({
        title: "Plan success by boxes per scene",
        groups: [...BUCKETS],
        series: modes.map((mode) => ({
          label: mode,
          values: bucketValues(report.plan_success[mode]!.by_bucket),
        })),
        yLabel: "plan success (%)",
        yMax: 100,
      }),
    );
    const variants = [
      ...new Set(modes.flatMap((mode) => Object.keys(report.plan_success[mode]!.by_variant))),
    ].sort();
    write(
      "plan_success_by_variant.svg",
      barChartSvg({
        title: "Plan success by task variant",
        groups: variants,
        series: modes.map((mode) => ({
          label: mode,
          values: variants.map((variant) => {
            const row = report.plan_success[mode]!.by_variant[variant];
            return row ? weightedVariantAggregate(row) : null;
          }),
        })),
        yLabel: "plan success (%)",
        yMax: 100,
      }),
    );
  }

  const validityModes = Object.keys(report.one_step_validity).sort();
  if (validityModes.length > 0) {
    write(
      "one_step_validity.svg",
      barChartSvg({
        title: "One-step validity by boxes per scene",
        groups: [...BUCKETS],
        series: validityModes.map((mode) => ({
          label: mode,
          values: bucketValues(report.one_step_validity[mode]!),
        })),
        yLabel: "valid actions (%)",
        yMax: 100,
      }),
    );
  }

  const taus = Object.keys(report.joint_iou).sort();
  if (taus.length > 0) {
    write(
      "joint_iou_accuracy.svg",
      barChartSvg({
        title: "Joint mask IoU accuracy",
        groups: [...BUCKETS],
        series: taus.map((tau) => ({
          label: `tau=${tau}`,
          values: bucketValues(report.joint_iou[tau]!),
        })),
        yLabel: "both masks >= tau (%)",
        yMax: 100,
      }),
    );
  }

  if (report.placement_error) {
    const kinds = Object.keys(report.placement_error)
      .filter((k) => report.placement_error![k] !== null)
      .sort();
    if (kinds.length > 0) {
      const series: BarSeries[] = [
        {
          label: "mean error",
          values: kinds.map((k) => report.placement_error![k]!.mean),
        },
      ];
      write(
        "placement_error.svg",
        barChartSvg({
          title: "Putdown placement error (free-form)",
          groups: kinds,
          series,
          yLabel: "error (m)",
        }),
      );
    }
  }
  return written;
}
