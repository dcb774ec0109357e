#!/usr/bin/env node
/**
 * usage: uavmec-plots render_all <run_dir> [--format png|svg]
 *        uavmec-plots render <family> <input.csv> <output> [--format ...]
 *
 * Exit codes: 0 success, 1 schema or argument errors, 2 missing inputs.
 */

import { SchemaError } from "./csv.js";
import { FAMILIES, Family } from "./figures.js";
import { Format, render, renderAll } from "./render.js";

function parseFormat(argv: string[]): Format {
  const i = argv.indexOf("--format");
  if (i === -1) return "svg";
  const value = argv[i + 1];
  if (value !== "svg" && value !== "png") {
    throw new Error(`unsupported format: ${value} (use png or svg)`);
  }
  argv.splice(i, 2);
  return value;
}

export async function main(argv: string[]): Promise<number> {
  const args = [...argv];
  let format: Format;
  try {
    format = parseFormat(args);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
  const [command, ...rest] = args;
  try {
    if (command === "render_all") {
      if (rest.length !== 1) {
        console.error("usage: render_all <run_dir> [--format png|svg]");
        return 1;
      }
      const { rendered } = await renderAll(rest[0], format);
      for (const r of rendered) {
        console.log(`${r.family}: ${r.outputPath}`);
      }
      return 0;
    }
    if (command === "render") {
      const [family, input, output] = rest;
      if (!family || !input || !output) {
        console.error("usage: render <family> <input.csv> <output>");
        return 1;
      }
      if (!FAMILIES.includes(family as Family)) {
        console.error(
          `unknown family ${family}; one of: ${FAMILIES.join(", ")}`);
        return 1;
      }
      await render(
        { family: family as Family, inputCsv: input, outputPath: output },
        format);
      console.log(output);
      return 0;
    }
    console.error("usage: uavmec-plots render_all <run_dir> " +
      "[--format png|svg]");
    return 1;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(err.message);
      return 1;
    }
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }
}

const invoked = process.argv[1] ?? "";
if (invoked.endsWith("cli.js") || invoked.endsWith("uavmec-plots")) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
