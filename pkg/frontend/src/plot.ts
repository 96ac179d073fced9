import { RESULT_COLUMNS, ResultRow, SchemaError } from "./csv.js";

export type FigureKind = "ser_vs_snr" | "iterations" | "ser_vs_n" | "csi_error";

export const FIGURE_KINDS: FigureKind[] = [
  "ser_vs_snr",
  "iterations",
  "ser_vs_n",
  "csi_error",
];

export interface PlotSpec {
  kind: FigureKind;
  /** Series-grouping columns; default ["combo"]. */
  groupBy?: string[];
  /** Log-scale SER axis; defaults to true for every kind except iterations. */
  logY?: boolean;
  /** Monte-Carlo trials behind each row; places the zero-SER clamp. */
  mcTrials?: number;
  title?: string;
}

export class NoDataError extends Error {}

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { top: 44, right: 190, bottom: 78, left: 78 };
const PLOT_W = WIDTH - MARGIN.left - MARGIN.right;
const PLOT_H = HEIGHT - MARGIN.top - MARGIN.bottom;
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

interface Point {
  x: number;
  y: number; // already clamped if the raw value was zero
  spread: number; // 3 * combined standard error (0 when unknown)
  bound: number | null; // union bound at the same x, or null
  clamped: boolean;
}

interface Series {
  label: string;
  points: Point[];
}

function fmt(v: number): string {
  return String(Number(v.toPrecision(6)));
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

function mean(vals: number[]): number {
  return vals.reduce((a, b) => a + b, 0) / vals.length;
}

function groupKey(row: ResultRow, cols: string[]): string {
  return cols.map((c) => String((row as unknown as Record<string, unknown>)[c])).join(" / ");
}

/** Split a combo label like "vMSER-MMED[N=16]" into its base and N. */
export function splitSizeSuffix(label: string): { base: string; n: number | null } {
  const m = /^(.*)\[N=(\d+)\]$/.exec(label);
  if (!m) return { base: label, n: null };
  return { base: m[1], n: Number(m[2]) };
}

function checkGroupBy(groupBy: string[]): void {
  const unknown = groupBy.filter((c) => !(RESULT_COLUMNS as readonly string[]).includes(c));
  if (unknown.length > 0) {
    throw new SchemaError(`group_by names columns not in the CSV schema: ${unknown.join(", ")}`);
  }
}

/**
 * Aggregate rows into per-series points.  Rows sharing (series, x) — multiple
 * channel draws — average their SER estimates; standard errors combine as
 * sqrt(sum stderr^2) / n, the standard error of the averaged estimate.
 */
function collectSeries(
  rows: ResultRow[],
  xOf: (r: ResultRow) => number | null,
  labelOf: (r: ResultRow) => string,
  clampFloor: (r: ResultRow[]) => number | null
): Series[] {
  const bySeries = new Map<string, Map<number, ResultRow[]>>();
  for (const row of rows) {
    const x = xOf(row);
    if (x === null) continue;
    const label = labelOf(row);
    let xs = bySeries.get(label);
    if (!xs) bySeries.set(label, (xs = new Map()));
    let cell = xs.get(x);
    if (!cell) xs.set(x, (cell = []));
    cell.push(row);
  }
  const series: Series[] = [];
  for (const [label, xs] of bySeries) {
    const points: Point[] = [];
    for (const [x, cell] of [...xs.entries()].sort((a, b) => a[0] - b[0])) {
      const y = mean(cell.map((r) => r.mc_ser));
      const spread =
        (3 * Math.sqrt(cell.reduce((a, r) => a + r.mc_stderr ** 2, 0))) / cell.length;
      const bound = mean(cell.map((r) => r.union_bound_ser));
      if (y === 0) {
        const floor = clampFloor(cell);
        if (floor === null) {
          throw new SchemaError(
            "rows with mc_ser = 0 need the Monte-Carlo trial count to place the log-axis clamp; pass the run manifest or the trial count explicitly"
          );
        }
        points.push({ x, y: floor, spread: 0, bound, clamped: true });
      } else {
        points.push({ x, y, spread, bound, clamped: false });
      }
    }
    series.push({ label, points });
  }
  series.sort((a, b) => (a.label < b.label ? -1 : a.label > b.label ? 1 : 0));
  return series;
}

interface Scale {
  (v: number): number;
  ticks: number[];
  kind: "log" | "linear";
}

function logScale(lo: number, hi: number): Scale {
  const eLo = Math.floor(Math.log10(lo));
  const eHi = Math.ceil(Math.log10(hi));
  const span = Math.max(eHi - eLo, 1);
  const f = (v: number) =>
    MARGIN.top + PLOT_H - ((Math.log10(v) - eLo) / span) * PLOT_H;
  const scale = f as Scale;
  scale.ticks = [];
  for (let e = eLo; e <= eHi; e++) scale.ticks.push(10 ** e);
  scale.kind = "log";
  return scale;
}

function linearScale(lo: number, hi: number): Scale {
  const span = hi - lo || 1;
  const f = (v: number) => MARGIN.top + PLOT_H - ((v - lo) / span) * PLOT_H;
  const scale = f as Scale;
  const step = span / 5;
  scale.ticks = [];
  for (let i = 0; i <= 5; i++) scale.ticks.push(lo + i * step);
  scale.kind = "linear";
  return scale;
}

function xScale(values: number[]): { (v: number): number; ticks: number[] } {
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const f = (v: number) => MARGIN.left + ((v - lo) / span) * PLOT_W;
  const scale = f as { (v: number): number; ticks: number[] };
  scale.ticks = [...new Set(values)].sort((a, b) => a - b);
  return scale;
}

function axesSvg(
  sx: { (v: number): number; ticks: number[] },
  sy: Scale,
  xLabel: string,
  yLabel: string
): string {
  const parts: string[] = [`<g class="axes" data-yscale="${sy.kind}">`];
  const x0 = MARGIN.left;
  const x1 = MARGIN.left + PLOT_W;
  const y0 = MARGIN.top;
  const y1 = MARGIN.top + PLOT_H;
  parts.push(`<line x1="${x0}" y1="${y1}" x2="${x1}" y2="${y1}" stroke="#333"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="#333"/>`);
  for (const t of sx.ticks) {
    const px = sx(t);
    parts.push(`<line x1="${fmt(px)}" y1="${y1}" x2="${fmt(px)}" y2="${y1 + 5}" stroke="#333"/>`);
    parts.push(
      `<text class="tick-label" x="${fmt(px)}" y="${y1 + 20}" text-anchor="middle" font-size="11">${fmt(t)}</text>`
    );
  }
  for (const t of sy.ticks) {
    const py = sy(t);
    parts.push(`<line x1="${x0 - 5}" y1="${fmt(py)}" x2="${x0}" y2="${fmt(py)}" stroke="#333"/>`);
    parts.push(`<line x1="${x0}" y1="${fmt(py)}" x2="${x1}" y2="${fmt(py)}" stroke="#eee"/>`);
    const label = sy.kind === "log" ? `1e${Math.round(Math.log10(t))}` : fmt(t);
    parts.push(
      `<text class="tick-label" x="${x0 - 9}" y="${fmt(py) + 4}" text-anchor="end" font-size="11">${label}</text>`
    );
  }
  parts.push(
    `<text x="${MARGIN.left + PLOT_W / 2}" y="${HEIGHT - 34}" text-anchor="middle" font-size="13">${esc(xLabel)}</text>`
  );
  parts.push(
    `<text x="20" y="${MARGIN.top + PLOT_H / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 20 ${MARGIN.top + PLOT_H / 2})">${esc(yLabel)}</text>`
  );
  parts.push("</g>");
  return parts.join("\n");
}

function legendSvg(labels: string[]): string {
  const parts: string[] = [`<g class="legend">`];
  labels.forEach((label, i) => {
    const y = MARGIN.top + 14 + i * 20;
    const x = MARGIN.left + PLOT_W + 16;
    const color = PALETTE[i % PALETTE.length];
    parts.push(`<line x1="${x}" y1="${y - 4}" x2="${x + 18}" y2="${y - 4}" stroke="${color}" stroke-width="2"/>`);
    parts.push(`<text x="${x + 24}" y="${y}" font-size="12">${esc(label)}</text>`);
  });
  parts.push("</g>");
  return parts.join("\n");
}

function svgDocument(body: string, title: string): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="15">${esc(title)}</text>`,
    body,
    `</svg>`,
    "",
  ].join("\n");
}

function seriesSvg(series: Series[], sx: (v: number) => number, sy: Scale, yFloor: number): string {
  const parts: string[] = [];
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    parts.push(`<g class="series" data-label="${esc(s.label)}" data-points="${s.points.length}">`);
    const boundPts = s.points.filter((p) => p.bound !== null && p.bound > 0);
    if (boundPts.length > 0) {
      const d = boundPts
        .map((p, k) => `${k === 0 ? "M" : "L"}${fmt(sx(p.x))} ${fmt(sy(Math.max(p.bound as number, yFloor)))}`)
        .join(" ");
      parts.push(`<path class="bound-line" d="${d}" fill="none" stroke="${color}" stroke-dasharray="5 3" stroke-width="1"/>`);
    }
    const lineD = s.points
      .map((p, k) => `${k === 0 ? "M" : "L"}${fmt(sx(p.x))} ${fmt(sy(p.y))}`)
      .join(" ");
    parts.push(`<path class="mc-line" d="${lineD}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
    for (const p of s.points) {
      const px = sx(p.x);
      const py = sy(p.y);
      if (p.spread > 0) {
        const upper = sy(p.y + p.spread);
        const lower = sy(Math.max(p.y - p.spread, yFloor));
        parts.push(
          `<line class="errbar" x1="${fmt(px)}" y1="${fmt(lower)}" x2="${fmt(px)}" y2="${fmt(upper)}" stroke="${color}" stroke-width="1"/>`
        );
        parts.push(
          `<line class="errbar-cap" x1="${fmt(px - 4)}" y1="${fmt(upper)}" x2="${fmt(px + 4)}" y2="${fmt(upper)}" stroke="${color}" stroke-width="1"/>`
        );
        parts.push(
          `<line class="errbar-cap" x1="${fmt(px - 4)}" y1="${fmt(lower)}" x2="${fmt(px + 4)}" y2="${fmt(lower)}" stroke="${color}" stroke-width="1"/>`
        );
      }
      if (p.clamped) {
        parts.push(
          `<circle class="point clamped" cx="${fmt(px)}" cy="${fmt(py)}" r="4" fill="white" stroke="${color}" stroke-width="1.5"/>`
        );
      } else {
        parts.push(`<circle class="point" cx="${fmt(px)}" cy="${fmt(py)}" r="3.5" fill="${color}"/>`);
      }
    }
    parts.push("</g>");
  });
  return parts.join("\n");
}

function renderSerFigure(
  series: Series[],
  xLabel: string,
  title: string,
  logY: boolean,
  mcTrials: number | undefined
): string {
  const ys: number[] = [];
  const xs: number[] = [];
  for (const s of series) {
    for (const p of s.points) {
      xs.push(p.x);
      ys.push(p.y);
      if (p.bound !== null && p.bound > 0) ys.push(p.bound);
      if (p.y + p.spread > 0) ys.push(p.y + p.spread);
    }
  }
  const yLo = Math.min(...ys);
  const yHi = Math.max(...ys);
  const sy = logY ? logScale(yLo, yHi) : linearScale(Math.min(yLo, 0), yHi);
  const yFloor = logY ? 10 ** Math.floor(Math.log10(yLo)) : 0;
  const sx = xScale(xs);

  const body: string[] = [];
  body.push(axesSvg(sx, sy, xLabel, "symbol error rate"));
  body.push(seriesSvg(series, sx, sy, yFloor));
  body.push(legendSvg(series.map((s) => s.label)));
  const anyClamped = series.some((s) => s.points.some((p) => p.clamped));
  if (anyClamped && mcTrials !== undefined) {
    body.push(
      `<text class="caption" x="${MARGIN.left}" y="${HEIGHT - 12}" font-size="11" fill="#555">open markers: zero estimates clamped to 1/(10*${mcTrials}) = ${fmt(1 / (10 * mcTrials))}</text>`
    );
  }
  return svgDocument(body.join("\n"), title);
}

function renderIterations(rows: ResultRow[], groupBy: string[], title: string): string {
  const byLabel = new Map<string, number[]>();
  for (const row of rows) {
    const label = groupKey(row, groupBy);
    let cell = byLabel.get(label);
    if (!cell) byLabel.set(label, (cell = []));
    cell.push(row.outer_iterations);
  }
  const labels = [...byLabel.keys()].sort();
  const means = labels.map((l) => mean(byLabel.get(l) as number[]));
  const sy = linearScale(0, Math.max(...means, 1));
  const slot = PLOT_W / labels.length;
  const barW = Math.min(slot * 0.6, 90);

  const parts: string[] = [`<g class="axes" data-yscale="linear">`];
  const x0 = MARGIN.left;
  const y1 = MARGIN.top + PLOT_H;
  parts.push(`<line x1="${x0}" y1="${y1}" x2="${x0 + PLOT_W}" y2="${y1}" stroke="#333"/>`);
  parts.push(`<line x1="${x0}" y1="${MARGIN.top}" x2="${x0}" y2="${y1}" stroke="#333"/>`);
  for (const t of sy.ticks) {
    const py = sy(t);
    parts.push(`<line x1="${x0 - 5}" y1="${fmt(py)}" x2="${x0}" y2="${fmt(py)}" stroke="#333"/>`);
    parts.push(
      `<text class="tick-label" x="${x0 - 9}" y="${fmt(py) + 4}" text-anchor="end" font-size="11">${fmt(t)}</text>`
    );
  }
  parts.push(
    `<text x="20" y="${MARGIN.top + PLOT_H / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 20 ${MARGIN.top + PLOT_H / 2})">mean outer iterations</text>`
  );
  parts.push("</g>");

  labels.forEach((label, i) => {
    const cx = MARGIN.left + slot * (i + 0.5);
    const top = sy(means[i]);
    const color = PALETTE[i % PALETTE.length];
    parts.push(
      `<rect class="bar" data-label="${esc(label)}" data-value="${fmt(means[i])}" x="${fmt(cx - barW / 2)}" y="${fmt(top)}" width="${fmt(barW)}" height="${fmt(y1 - top)}" fill="${color}"/>`
    );
    parts.push(
      `<text class="tick-label" x="${fmt(cx)}" y="${y1 + 20}" text-anchor="middle" font-size="11">${esc(label)}</text>`
    );
  });
  return svgDocument(parts.join("\n"), title);
}

/** Render one figure to an SVG string; pure function of rows and spec. */
export function renderPlot(rows: ResultRow[], spec: PlotSpec): string {
  const groupBy = spec.groupBy ?? ["combo"];
  checkGroupBy(groupBy);
  if (rows.length === 0) {
    throw new NoDataError("no data: the CSV holds no rows");
  }
  const logY = spec.logY ?? spec.kind !== "iterations";
  const clampFloor = (cell: ResultRow[]): number | null =>
    spec.mcTrials !== undefined && logY ? 1 / (10 * spec.mcTrials) : logY ? null : 0;

  switch (spec.kind) {
    case "ser_vs_snr": {
      const series = collectSeries(rows, (r) => r.snr_db, (r) => groupKey(r, groupBy), clampFloor);
      if (series.length === 0) throw new NoDataError("no data for ser_vs_snr");
      return renderSerFigure(series, "SNR (dB)", spec.title ?? "SER vs SNR", logY, spec.mcTrials);
    }
    case "csi_error": {
      const series = collectSeries(
        rows,
        (r) => r.csi_error_var,
        (r) => groupKey(r, groupBy),
        clampFloor
      );
      if (series.length === 0) throw new NoDataError("no data for csi_error");
      return renderSerFigure(
        series,
        "channel error variance",
        spec.title ?? "SER vs CSI error",
        logY,
        spec.mcTrials
      );
    }
    case "ser_vs_n": {
      const tagged = rows.filter((r) => splitSizeSuffix(r.combo).n !== null);
      if (tagged.length === 0) {
        throw new NoDataError(
          "no data: ser_vs_n needs combo labels with an [N=...] suffix (a surface-size study)"
        );
      }
      const series = collectSeries(
        tagged,
        (r) => splitSizeSuffix(r.combo).n,
        (r) => splitSizeSuffix(r.combo).base,
        clampFloor
      );
      return renderSerFigure(
        series,
        "reflecting elements N",
        spec.title ?? "SER vs surface size",
        logY,
        spec.mcTrials
      );
    }
    case "iterations":
      return renderIterations(rows, groupBy, spec.title ?? "Alternating iterations");
    default:
      throw new SchemaError(`unknown figure kind: ${String(spec.kind)}`);
  }
}
