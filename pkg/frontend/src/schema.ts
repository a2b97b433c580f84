import { readFileSync } from "fs";

export const SCHEMA = "congestio/v1";

export class SchemaMismatch extends Error {}

export interface Table {
  columns: string[];
  rows: number[][];
}

export interface Snapshot {
  t: number;
  rho: number[];
  u: number[];
  w: number[];
  pi: number[];
}

export interface Snapshots {
  grid: { h: number; L: number; N: number };
  snapshots: Snapshot[];
}

export interface Measure {
  ac: number[];
  h: number;
  atoms: [number, number][];
}

/** CSV files carry the schema in a leading comment line. */
export function readCsv(path: string): Table {
  const lines = readFileSync(path, "utf8").trim().split("\n");
  if (lines.length < 2 || !lines[0].startsWith(`# schema: ${SCHEMA}`)) {
    throw new SchemaMismatch(`${path}: expected '# schema: ${SCHEMA}' header`);
  }
  const columns = lines[1].split(",");
  const rows = lines.slice(2).map((line) => line.split(",").map(Number));
  for (const row of rows) {
    if (row.length !== columns.length || row.some(Number.isNaN)) {
      throw new SchemaMismatch(`${path}: malformed data row`);
    }
  }
  return { columns, rows };
}

export function column(table: Table, name: string): number[] {
  const i = table.columns.indexOf(name);
  if (i < 0) throw new SchemaMismatch(`missing column ${name}`);
  return table.rows.map((r) => r[i]);
}

function readJsonWithSchema(path: string): any {
  const obj = JSON.parse(readFileSync(path, "utf8"));
  if (obj.schema !== SCHEMA) {
    throw new SchemaMismatch(`${path}: schema ${obj.schema} != ${SCHEMA}`);
  }
  return obj;
}

export function readSnapshots(path: string): Snapshots {
  const obj = readJsonWithSchema(path);
  if (!obj.grid || !Array.isArray(obj.snapshots) || obj.snapshots.length === 0) {
    throw new SchemaMismatch(`${path}: missing grid or snapshots`);
  }
  return obj as Snapshots;
}

export function readMeasureFromDualityReport(path: string): Measure {
  const obj = readJsonWithSchema(path);
  const m = obj.measure_example;
  if (!m || !Array.isArray(m.ac) || typeof m.h !== "number") {
    throw new SchemaMismatch(`${path}: no measure_example`);
  }
  return m as Measure;
}

export function readGapCurve(path: string): { times: number[]; gaps: number[] } {
  const obj = readJsonWithSchema(path);
  if (!Array.isArray(obj.gap_times) || !Array.isArray(obj.gaps)) {
    throw new SchemaMismatch(`${path}: no gap curve`);
  }
  return { times: obj.gap_times, gaps: obj.gaps };
}

/** Cell centers of the centered grid implied by h and the array length. */
export function centers(n: number, h: number): number[] {
  const L = 0.5 * n * h;
  return Array.from({ length: n }, (_, i) => -L + (i + 0.5) * h);
}
