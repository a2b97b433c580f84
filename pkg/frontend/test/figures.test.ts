import { execFileSync } from "child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join, resolve } from "path";
import { describe, expect, it } from "vitest";

import { FigureSpec, buildFigure } from "../src/figures.js";
import { main } from "../src/plot.js";
import { SchemaMismatch, readCsv } from "../src/schema.js";

const FIXTURES = resolve(__dirname, "..", "fixtures");
const tmp = () => mkdtempSync(join(tmpdir(), "congestio-fig-"));

function spec(kind: FigureSpec["kind"], input: string, outDir: string): FigureSpec {
  return { kind, input, output: join(outDir, `${kind}.svg`) };
}

const INPUTS: Record<FigureSpec["kind"], string> = {
  snapshots: join(FIXTURES, "snapshots.json"),
  energy: join(FIXTURES, "diagnostics.csv"),
  sweep: join(FIXTURES, "sweep.csv"),
  measure: join(FIXTURES, "duality_report.json"),
  gap: join(FIXTURES, "counterexample_report.json"),
};

describe("all five figure kinds", () => {
  for (const kind of Object.keys(INPUTS) as FigureSpec["kind"][]) {
    it(`renders ${kind} from the frozen fixture`, () => {
      const out = tmp();
      const s = spec(kind, INPUTS[kind], out);
      expect(main(["--spec", writeSpec(s, out)])).toBe(0);
      const svg = readFileSync(s.output, "utf8");
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg).toContain("</svg>");
    });
  }
});

function writeSpec(s: FigureSpec, dir: string): string {
  const path = join(dir, "spec.json");
  writeFileSync(path, JSON.stringify(s));
  return path;
}

describe("sweep figure", () => {
  it("plots a monotone decreasing residual curve (data array, not pixels)", () => {
    const fig = buildFigure(spec("sweep", INPUTS.sweep, tmp()));
    const ys = fig.panels[0].series[0].y;
    expect(ys.length).toBe(5);
    for (let i = 1; i < ys.length; i++) {
      expect(ys[i]).toBeLessThanOrEqual(ys[i - 1]);
    }
  });
});

describe("measure figure", () => {
  it("renders one stem per atom", () => {
    const s = spec("measure", INPUTS.measure, tmp());
    const fig = buildFigure(s);
    const report = JSON.parse(readFileSync(INPUTS.measure, "utf8"));
    const nAtoms = report.measure_example.atoms.length;
    expect(nAtoms).toBeGreaterThan(0);
    expect(fig.panels[0].stems).toHaveLength(nAtoms);
    const stemCount = (fig.svg.match(/class="stem"/g) ?? []).length;
    expect(stemCount).toBe(nAtoms);
  });

  it("scales stems by atom mass", () => {
    const fig = buildFigure(spec("measure", INPUTS.measure, tmp()));
    const report = JSON.parse(readFileSync(INPUTS.measure, "utf8"));
    const m = report.measure_example;
    const stems = fig.panels[0].stems!;
    stems.forEach((stem, i) => {
      expect(stem.y).toBeCloseTo(m.atoms[i][1] / m.h, 10);
    });
  });
});

describe("degenerate inputs", () => {
  it("single-row diagnostics (T = 0 run) renders a point without crashing", () => {
    const out = tmp();
    const s = spec("energy", join(FIXTURES, "t0", "diagnostics.csv"), out);
    expect(main(["--spec", writeSpec(s, out)])).toBe(0);
    const svg = readFileSync(s.output, "utf8");
    expect(svg).toContain('class="point"');
  });
});

describe("schema gate", () => {
  it("mismatch exits 2", () => {
    const out = tmp();
    const bad = join(out, "bad.csv");
    writeFileSync(bad, "# schema: congestio/v999\nt,E_kinetic\n0.0,0.0\n");
    const s = spec("energy", bad, out);
    expect(main(["--spec", writeSpec(s, out)])).toBe(2);
  });

  it("readCsv raises SchemaMismatch on missing header", () => {
    const out = tmp();
    const bad = join(out, "bad.csv");
    writeFileSync(bad, "t,E\n0,0\n");
    expect(() => readCsv(bad)).toThrow(SchemaMismatch);
  });

  it("unknown figure kind exits 2", () => {
    const out = tmp();
    const s = { kind: "heatmap", input: INPUTS.energy, output: join(out, "x.svg") };
    writeFileSync(join(out, "spec.json"), JSON.stringify(s));
    expect(main(["--spec", join(out, "spec.json")])).toBe(2);
  });

  it("missing spec argument exits 2", () => {
    expect(main([])).toBe(2);
  });
});

describe("idempotency", () => {
  it("re-rendering a spec is byte-identical", () => {
    const out = tmp();
    const s = spec("energy", INPUTS.energy, out);
    const specPath = writeSpec(s, out);
    expect(main(["--spec", specPath])).toBe(0);
    const first = readFileSync(s.output);
    expect(main(["--spec", specPath])).toBe(0);
    expect(readFileSync(s.output).equals(first)).toBe(true);
  });
});

describe("compiled CLI", () => {
  it("runs as a script when built", () => {
    const dist = resolve(__dirname, "..", "dist", "plot.js");
    if (!existsSync(dist)) return; // covered by the in-process tests pre-build
    const out = tmp();
    const s = spec("gap", INPUTS.gap, out);
    execFileSync("node", [dist, "--spec", writeSpec(s, out)]);
    expect(existsSync(s.output)).toBe(true);
  });
});
