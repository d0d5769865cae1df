import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { afterAll, describe, expect, it } from "vitest";

import { pointAt, readDatasetCsv } from "../src/csv";

const tmpdir = fs.mkdtempSync(path.join(os.tmpdir(), "csv-test-"));
afterAll(() => fs.rmSync(tmpdir, { recursive: true, force: true }));

function write(name: string, content: string): string {
  const file = path.join(tmpdir, name);
  fs.writeFileSync(file, content);
  return file;
}

describe("dataset csv", () => {
  it("reads columns keyed by variable index", () => {
    const file = write("ok.csv", "v1,v3,target\n1,2,3\n4,5,6\n");
    const dataset = readDatasetCsv(file);
    expect([...dataset.columns.keys()].sort()).toEqual([1, 3]);
    expect(dataset.columns.get(1)).toEqual([1, 4]);
    expect(dataset.columns.get(3)).toEqual([2, 5]);
    expect(dataset.targets).toEqual([3, 6]);
    expect(pointAt(dataset, 1)).toEqual(new Map([[1, 4], [3, 5]]));
  });

  it("handles scientific notation", () => {
    const file = write("sci.csv", "v1,target\n2.9979e8,1e-100\n");
    const dataset = readDatasetCsv(file);
    expect(dataset.columns.get(1)).toEqual([2.9979e8]);
    expect(dataset.targets).toEqual([1e-100]);
  });

  it("rejects files without a target column", () => {
    const file = write("bad.csv", "v1,v2\n1,2\n");
    expect(() => readDatasetCsv(file)).toThrow(/target/);
  });

  it("rejects malformed rows", () => {
    const file = write("mal.csv", "v1,target\n1,banana\n");
    expect(() => readDatasetCsv(file)).toThrow(/malformed/);
  });
});
