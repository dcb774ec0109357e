/** File-level rendering: one figure or every family found in a run dir. */

import { existsSync, mkdirSync, writeFileSync } from "fs";
import { dirname, join } from "path";

import { FAMILIES, Family, FigureSpec, renderSvg } from "./figures.js";

export type Format = "svg" | "png";

export interface RenderResult {
  family: Family;
  outputPath: string;
}

async function toPng(svg: string): Promise<Buffer> {
  const { Resvg } = await import("@resvg/resvg-js");
  return Buffer.from(new Resvg(svg).render().asPng());
}

/** Render a single figure spec; nothing is written when rendering fails. */
export async function render(
  spec: FigureSpec,
  format: Format = "svg",
): Promise<RenderResult> {
  if (!existsSync(spec.inputCsv)) {
    throw new Error(`input not found: ${spec.inputCsv}`);
  }
  const svg = renderSvg(spec.family, spec.inputCsv);
  mkdirSync(dirname(spec.outputPath), { recursive: true });
  if (format === "png") {
    writeFileSync(spec.outputPath, await toPng(svg));
  } else {
    writeFileSync(spec.outputPath, svg, "utf-8");
  }
  return { family: spec.family, outputPath: spec.outputPath };
}

export interface RenderAllResult {
  rendered: RenderResult[];
  skipped: Family[];
}

/**
 * Render every family whose table exists in the run directory; absent
 * families are reported, not fatal.
 */
export async function renderAll(
  runDir: string,
  format: Format = "svg",
  warn: (message: string) => void = (message) => console.warn(message),
): Promise<RenderAllResult> {
  if (!existsSync(runDir)) {
    throw new Error(`run directory not found: ${runDir}`);
  }
  const rendered: RenderResult[] = [];
  const skipped: Family[] = [];
  for (const family of FAMILIES) {
    const csvPath = join(runDir, `${family}.csv`);
    if (!existsSync(csvPath)) {
      skipped.push(family);
      warn(`skipping ${family}: no ${family}.csv in ${runDir}`);
      continue;
    }
    const outputPath = join(runDir, `${family}.${format}`);
    rendered.push(await render({ family, inputCsv: csvPath, outputPath },
      format));
  }
  return { rendered, skipped };
}
