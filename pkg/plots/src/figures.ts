/**
 * The six figure families rendered from exported run tables.
 *
 * Every renderer is a pure function of one CSV: same bytes in, same bytes
 * out.  Axis labels carry the units of the columns they draw.
 */

import { basename } from "path";

import { distinct, numbers, readTable, requireColumns, SchemaError, Table } from "./csv.js";
import { kernelDensity, linspace } from "./kde.js";
import {
  drawAxes, drawLegend, extent, fmt, linearScale, MARGIN, PALETTE,
  SvgCanvas, HEIGHT, WIDTH,
} from "./svg.js";

export const FAMILIES = [
  "fig_rewards",
  "fig_allocations",
  "fig_utility_vs_slot",
  "fig_per_mu",
  "fig_trajectories",
  "fig_alpha_sweep",
] as const;

export type Family = (typeof FAMILIES)[number];

export interface FigureSpec {
  family: Family;
  inputCsv: string;
  outputPath: string;
  style?: { width?: number; height?: number };
}

type Renderer = (path: string, table: Table) => string;

function plotArea(canvas: SvgCanvas): {
  x: [number, number]; y: [number, number];
} {
  return {
    x: [MARGIN.left, canvas.width - MARGIN.right],
    y: [canvas.height - MARGIN.bottom, MARGIN.top],
  };
}

function seriesChart(
  path: string,
  table: Table,
  xCol: string,
  yCol: string,
  groupCol: string,
  labels: { title: string; xLabel: string; yLabel: string },
): string {
  const canvas = new SvgCanvas();
  const area = plotArea(canvas);
  const x = linearScale(extent(numbers(table, xCol), 0), area.x);
  const y = linearScale(extent(numbers(table, yCol)), area.y);
  drawAxes(canvas, x, y, labels);
  const groups = distinct(table, groupCol);
  const legend: { label: string; color: string }[] = [];
  groups.forEach((group, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = table.rows
      .filter((row) => row[groupCol] === group)
      .map((row) => [x(row[xCol] as number), y(row[yCol] as number)] as
        [number, number]);
    canvas.polyline(pts, color);
    legend.push({ label: String(group), color });
  });
  drawLegend(canvas, legend, canvas.width - MARGIN.right + 16, MARGIN.top + 8);
  return canvas.render();
}

function renderRewards(path: string, table: Table): string {
  requireColumns(path, table, ["episode", "agent", "cumulative_return"]);
  return seriesChart(path, table, "episode", "cumulative_return", "agent", {
    title: "Cumulative reward per agent",
    xLabel: "episode",
    yLabel: "cumulative return (reward units)",
  });
}

function renderUtilityVsSlot(path: string, table: Table): string {
  requireColumns(path, table, ["label", "slot", "utility"]);
  return seriesChart(path, table, "slot", "utility", "label", {
    title: "Utility over the episode",
    xLabel: "time slot",
    yLabel: "cost (weighted J + s)",
  });
}

function renderAlphaSweep(path: string, table: Table): string {
  requireColumns(path, table, ["label", "slot", "utility"]);
  return seriesChart(path, table, "slot", "utility", "label", {
    title: "Fixed vs learned offloading ratio",
    xLabel: "time slot",
    yLabel: "cost (weighted J + s)",
  });
}

function renderAllocations(path: string, table: Table): string {
  requireColumns(path, table, ["variable", "value", "cap"]);
  const canvas = new SvgCanvas();
  const area = plotArea(canvas);
  const variables = distinct(table, "variable") as string[];
  const panelWidth = (area.x[1] - area.x[0]) / variables.length;
  canvas.text((area.x[0] + area.x[1]) / 2, 24,
    "Distribution of total allocated resource per UAV-slot",
    { anchor: "middle", size: 16, bold: true });

  variables.forEach((variable, i) => {
    const rows = table.rows.filter((row) => row.variable === variable);
    const values = rows.map((row) => row.value as number);
    const cap = rows[0].cap as number;
    const x0 = area.x[0] + i * panelWidth;
    const center = x0 + panelWidth / 2;
    const lo = Math.min(0, ...values);
    const hi = Math.max(cap, ...values) * 1.08;
    const y = linearScale([lo, hi], area.y);

    canvas.line(x0 + 8, area.y[0], x0 + panelWidth - 8, area.y[0], "#222");
    canvas.line(x0 + 8, area.y[0], x0 + 8, area.y[1], "#222");
    const grid = linspace(lo, hi, 80);
    const density = kernelDensity(values, grid);
    const peak = Math.max(...density, 1e-12);
    const halfWidth = panelWidth * 0.33;
    const right = grid.map((g, k) =>
      `${fmt(center + (density[k] / peak) * halfWidth)},${fmt(y(g))}`);
    const left = grid.map((g, k) =>
      `${fmt(center - (density[k] / peak) * halfWidth)},${fmt(y(g))}`)
      .reverse();
    canvas.path(`M${right.join("L")}L${left.join("L")}Z`,
      PALETTE[i % PALETTE.length], "#222", 0.55);

    // cap reference line: allocations should stay below this level
    canvas.line(x0 + 10, y(cap), x0 + panelWidth - 10, y(cap), "#c23d4a", 2,
      "6,4");
    canvas.text(x0 + panelWidth - 10, y(cap) - 6, `cap ${fmt(cap)}`, {
      anchor: "end", size: 11, fill: "#c23d4a",
    });
    canvas.text(center, area.y[0] + 18, variable,
      { anchor: "middle", size: 12 });
    canvas.text(x0 + 6, area.y[1] - 6, `max ${fmt(hi)}`, { size: 10,
      fill: "#666" });
  });
  canvas.text(20, (area.y[0] + area.y[1]) / 2,
    "summed allocation (fractions; power in W)",
    { anchor: "middle", size: 13, rotate: -90 });
  return canvas.render();
}

function renderPerMu(path: string, table: Table): string {
  requireColumns(path, table, ["mu", "distance", "rate_ul", "rate_dl"]);
  const canvas = new SvgCanvas();
  const area = plotArea(canvas);
  const mus = distinct(table, "mu") as number[];
  const rates = [...numbers(table, "rate_ul"), ...numbers(table, "rate_dl")];
  const y = linearScale([0, Math.max(...rates) * 1.1], area.y);
  const x = linearScale([-0.5, mus.length - 0.5], area.x);
  drawAxes(canvas, x, y, {
    title: "Per-user achievable rate and distance",
    xLabel: "user index",
    yLabel: "achievable rate (bit/s)",
  });
  const band = (x(1) - x(0)) * 0.32;
  mus.forEach((mu, i) => {
    const row = table.rows.find((r) => r.mu === mu)!;
    const cx = x(i);
    canvas.rect(cx - band, y(row.rate_ul as number), band,
      area.y[0] - y(row.rate_ul as number), PALETTE[0], 0.85);
    canvas.rect(cx, y(row.rate_dl as number), band,
      area.y[0] - y(row.rate_dl as number), PALETTE[1], 0.85);
  });
  const distances = numbers(table, "distance");
  const yd = linearScale([0, Math.max(...distances) * 1.15], area.y);
  mus.forEach((mu, i) => {
    const row = table.rows.find((r) => r.mu === mu)!;
    canvas.circle(x(i), yd(row.distance as number), 4, "#222");
  });
  canvas.text(area.x[1], MARGIN.top - 6, "dots: link distance (m)",
    { anchor: "end", size: 11, fill: "#222" });
  drawLegend(canvas, [
    { label: "uplink rate", color: PALETTE[0] },
    { label: "downlink rate", color: PALETTE[1] },
  ], canvas.width - MARGIN.right + 16, MARGIN.top + 8);
  return canvas.render();
}

function renderTrajectories(path: string, table: Table): string {
  requireColumns(path, table, ["slot", "uav", "x", "y"]);
  const canvas = new SvgCanvas(620, 620);
  const side: [number, number] = [70, 550];
  const xs = numbers(table, "x");
  const ys = numbers(table, "y");
  const hi = Math.max(...xs, ...ys, 1) * 1.05;
  const x = linearScale([0, hi], side);
  const y = linearScale([0, hi], [side[1], side[0]]);
  drawAxes(canvas, x, y, {
    title: "UAV trajectories",
    xLabel: "x (m)",
    yLabel: "y (m)",
  });
  const uavs = distinct(table, "uav") as number[];
  const legend: { label: string; color: string }[] = [];
  uavs.forEach((uav, i) => {
    const color = PALETTE[i % PALETTE.length];
    const track = table.rows
      .filter((row) => row.uav === uav)
      .sort((a, b) => (a.slot as number) - (b.slot as number))
      .map((row) => [x(row.x as number), y(row.y as number)] as
        [number, number]);
    canvas.polyline(track, color);
    canvas.circle(track[0][0], track[0][1], 5, color);
    canvas.rect(track[track.length - 1][0] - 4,
      track[track.length - 1][1] - 4, 8, 8, color);
    legend.push({ label: `UAV ${uav}`, color });
  });
  drawLegend(canvas, legend, side[1] - 90, side[0] + 10);
  canvas.text(side[1] - 90, side[0] + 10 + uavs.length * 20 + 4,
    "circle: start, square: end", { size: 10, fill: "#444" });
  return canvas.render();
}

const RENDERERS: Record<Family, Renderer> = {
  fig_rewards: renderRewards,
  fig_allocations: renderAllocations,
  fig_utility_vs_slot: renderUtilityVsSlot,
  fig_per_mu: renderPerMu,
  fig_trajectories: renderTrajectories,
  fig_alpha_sweep: renderAlphaSweep,
};

export function familyOf(csvPath: string): Family | undefined {
  const stem = basename(csvPath).replace(/\.csv$/, "");
  return FAMILIES.find((family) => family === stem);
}

/** Render one family to an SVG string; throws SchemaError on bad input. */
export function renderSvg(family: Family, csvPath: string): string {
  const renderer = RENDERERS[family];
  if (!renderer) {
    throw new SchemaError(csvPath, `unknown figure family: ${family}`);
  }
  return renderer(csvPath, readTable(csvPath));
}
