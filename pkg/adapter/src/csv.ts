/** Dataset CSV reader: header `v1,...,vK,target`, one row per sample. */

import * as fs from "fs";

export interface Dataset {
  columns: Map<number, number[]>;
  targets: number[];
}

export function readDatasetCsv(path: string): Dataset {
  const text = fs.readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/).filter((line) => line.trim().length > 0);
  if (lines.length < 2) throw new Error(`${path}: expected a header and rows`);
  const header = lines[0].split(",");
  if (header[header.length - 1] !== "target") {
    throw new Error(`${path}: expected trailing 'target' column`);
  }
  const indices = header.slice(0, -1).map((name) => {
    if (!/^v\d+$/.test(name)) throw new Error(`${path}: bad column '${name}'`);
    return Number(name.slice(1));
  });
  const columns = new Map<number, number[]>(indices.map((i) => [i, []]));
  const targets: number[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(",").map(Number);
    if (cells.length !== header.length || cells.some(Number.isNaN)) {
      throw new Error(`${path}: malformed row '${line}'`);
    }
    indices.forEach((index, j) => columns.get(index)!.push(cells[j]));
    targets.push(cells[cells.length - 1]);
  }
  return { columns, targets };
}

export function pointAt(dataset: Dataset, row: number): Map<number, number> {
  const point = new Map<number, number>();
  for (const [index, values] of dataset.columns) point.set(index, values[row]);
  return point;
}
