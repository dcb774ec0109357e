/**
 * Strict reader for the flat, unquoted tables the exporter writes:
 * one header row, comma separators, dot-decimal numbers.
 */

import { readFileSync } from "fs";

export type Row = Record<string, string | number>;

export class SchemaError extends Error {
  constructor(public readonly file: string, message: string) {
    super(`${file}: ${message}`);
    this.name = "SchemaError";
  }
}

export interface Table {
  columns: string[];
  rows: Row[];
}

export function readTable(path: string): Table {
  const text = readFileSync(path, "utf-8");
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(path, "empty file (no header row)");
  }
  const columns = lines[0].split(",");
  const rows: Row[] = [];
  for (const line of lines.slice(1)) {
    const parts = line.split(",");
    if (parts.length !== columns.length) {
      throw new SchemaError(
        path,
        `row has ${parts.length} fields, header has ${columns.length}`,
      );
    }
    const row: Row = {};
    columns.forEach((name, i) => {
      const raw = parts[i];
      const num = Number(raw);
      row[name] = raw !== "" && Number.isFinite(num) ? num : raw;
    });
    rows.push(row);
  }
  return { columns, rows };
}

/** Validate presence of required columns and of at least one data row. */
export function requireColumns(
  path: string,
  table: Table,
  required: string[],
): void {
  for (const name of required) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(path, `missing required column: ${name}`);
    }
  }
  if (table.rows.length === 0) {
    throw new SchemaError(path, "no data rows");
  }
}

export function numbers(table: Table, column: string): number[] {
  return table.rows.map((row) => row[column] as number);
}

export function distinct(table: Table, column: string): (string | number)[] {
  const seen: (string | number)[] = [];
  for (const row of table.rows) {
    const value = row[column];
    if (!seen.includes(value)) seen.push(value);
  }
  return seen;
}
