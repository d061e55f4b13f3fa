import fs from "node:fs";
import path from "node:path";
import Papa from "papaparse";

/** Bad input data: missing files, missing columns, empty tables. */
export class DataError extends Error {}

/** Bad invocation: unknown kind, bad flags, unsupported extension. */
export class UsageError extends Error {}

export interface ResultsTable {
  columns: string[];
  rows: Record<string, string>[];
}

export interface Manifest {
  name: string;
  kind: string;
  seed: number;
  params: Record<string, unknown>;
  version: string;
}

export function loadResults(runDir: string): ResultsTable {
  const file = path.join(runDir, "results.csv");
  if (!fs.existsSync(file)) {
    throw new DataError(`no results.csv in ${runDir}`);
  }
  const text = fs.readFileSync(file, "utf8").trim();
  if (text === "") {
    throw new DataError(`results.csv in ${runDir} is empty`);
  }
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new DataError(`malformed results.csv row ${e.row}: ${e.message}`);
  }
  const columns = parsed.meta.fields ?? [];
  if (parsed.data.length === 0) {
    throw new DataError(`results.csv in ${runDir} has a header but no rows`);
  }
  return { columns, rows: parsed.data };
}

export function loadManifest(runDir: string): Manifest {
  const file = path.join(runDir, "manifest.json");
  if (!fs.existsSync(file)) {
    throw new DataError(`no manifest.json in ${runDir}`);
  }
  return JSON.parse(fs.readFileSync(file, "utf8")) as Manifest;
}

export function requireColumns(table: ResultsTable, names: string[]): void {
  const missing = names.filter((n) => !table.columns.includes(n));
  if (missing.length > 0) {
    throw new DataError(
      `results.csv is missing column(s): ${missing.join(", ")} ` +
        `(have: ${table.columns.join(", ")})`,
    );
  }
}

/** Parse a required numeric cell; the writer emits full-precision floats. */
export function num(row: Record<string, string>, col: string): number {
  const raw = row[col];
  const v = Number(raw);
  if (raw === undefined || raw === "" || Number.isNaN(v)) {
    throw new DataError(`non-numeric value ${JSON.stringify(raw)} in column ${col}`);
  }
  return v;
}

/** Parse an optional numeric cell; empty cells become null. */
export function numOrNull(row: Record<string, string>, col: string): number | null {
  const raw = row[col];
  if (raw === undefined || raw === "") {
    return null;
  }
  const v = Number(raw);
  if (Number.isNaN(v)) {
    throw new DataError(`non-numeric value ${JSON.stringify(raw)} in column ${col}`);
  }
  return v;
}
