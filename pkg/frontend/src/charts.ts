/**
 * Minimal deterministic SVG bar charts. No timestamps, no randomness:
 * identical input yields identical bytes.
 */

export interface BarSeries {
  label: string;
  /** One value per group; null marks an absent cell (omitted, noted in legend). */
  values: (number | null)[];
}

export interface BarChartSpec {
  title: string;
  groups: string[];
  series: BarSeries[];
  yLabel: string;
  yMax?: number;
  width?: number;
  height?: number;
}

const COLORS = ["#4878cf", "#ee854a", "#6acc64", "#d65f5f", "#956cb4", "#8c613c"];

const MARGIN = { top: 34, right: 16, bottom: 64, left: 52 };

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmt(x: number): string {
  return Number.isInteger(x) ? String(x) : x.toFixed(2);
}

export function barChartSvg(spec: BarChartSpec): string {
  const width = spec.width ?? Math.max(480, 90 * spec.groups.length + MARGIN.left + MARGIN.right);
  const height = spec.height ?? 300;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;
  const allValues = spec.series.flatMap((s) => s.values.filter((v): v is number => v !== null));
  const yMax = spec.yMax ?? Math.max(1, ...allValues) * 1.05;
  const nGroups = Math.max(spec.groups.length, 1);
  const nSeries = Math.max(spec.series.length, 1);
  const groupW = plotW / nGroups;
  const barW = (groupW * 0.8) / nSeries;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="11">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="18" text-anchor="middle" font-size="13">${esc(spec.title)}</text>`,
  );

  const y = (v: number) => MARGIN.top + plotH - (v / yMax) * plotH;
  for (let tick = 0; tick <= 4; tick++) {
    const value = (yMax / 4) * tick;
    const yy = y(value);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${yy.toFixed(2)}" x2="${width - MARGIN.right}" y2="${yy.toFixed(2)}" stroke="#ddd"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 6}" y="${(yy + 4).toFixed(2)}" text-anchor="end">${fmt(value)}</text>`,
    );
  }
  parts.push(
    `<text x="14" y="${MARGIN.top + plotH / 2}" transform="rotate(-90 14 ${MARGIN.top + plotH / 2})" text-anchor="middle">${esc(spec.yLabel)}</text>`,
  );

  let omitted = false;
  spec.series.forEach((series, si) => {
    const color = COLORS[si % COLORS.length];
    series.values.forEach((value, gi) => {
      if (value === null) {
        omitted = true;
        return;
      }
      const x = MARGIN.left + gi * groupW + groupW * 0.1 + si * barW;
      const top = y(value);
      parts.push(
        `<rect x="${x.toFixed(2)}" y="${top.toFixed(2)}" width="${barW.toFixed(2)}" height="${(MARGIN.top + plotH - top).toFixed(2)}" fill="${color}"><title>${esc(series.label)} / ${esc(spec.groups[gi] ?? "")}: ${fmt(value)}</title></rect>`,
      );
    });
  });

  spec.groups.forEach((group, gi) => {
    const x = MARGIN.left + gi * groupW + groupW / 2;
    const yy = MARGIN.top + plotH + 14;
    parts.push(
      `<text x="${x.toFixed(2)}" y="${yy}" text-anchor="end" transform="rotate(-30 ${x.toFixed(2)} ${yy})">${esc(group)}</text>`,
    );
  });

  let legendX = MARGIN.left;
  const legendY = height - 10;
  spec.series.forEach((series, si) => {
    const color = COLORS[si % COLORS.length];
    parts.push(`<rect x="${legendX}" y="${legendY - 9}" width="10" height="10" fill="${color}"/>`);
    parts.push(`<text x="${legendX + 14}" y="${legendY}">${esc(series.label)}</text>`);
    legendX += 14 + 8 * series.label.length + 18;
  });
  if (omitted) {
    parts.push(
      `<text x="${width - MARGIN.right}" y="${legendY}" text-anchor="end" fill="#777">empty cells omitted</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
