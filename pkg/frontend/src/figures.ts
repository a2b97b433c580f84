import {
  centers,
  column,
  readCsv,
  readGapCurve,
  readMeasureFromDualityReport,
  readSnapshots,
} from "./schema.js";
import { PanelSpec, renderFigure } from "./svg.js";

export const FIGURE_KINDS = ["snapshots", "energy", "sweep", "measure", "gap"] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureSpec {
  kind: FigureKind;
  input: string;
  output: string;
  title?: string;
}

/** Rendered figure plus the plotted arrays, so tests can assert on data. */
export interface Figure {
  svg: string;
  panels: PanelSpec[];
}

function snapshotsFigure(spec: FigureSpec): Figure {
  const snaps = readSnapshots(spec.input);
  const x = centers(snaps.grid.N, snaps.grid.h);
  const pick = [0, Math.floor((snaps.snapshots.length - 1) / 2), snaps.snapshots.length - 1]
    .filter((v, i, arr) => arr.indexOf(v) === i);
  const panels: PanelSpec[] = (["rho", "u", "pi"] as const).map((field) => ({
    title: spec.title ? `${spec.title}: ${field}` : field,
    xlabel: "x",
    ylabel: field,
    series: pick.map((k) => ({
      x,
      y: snaps.snapshots[k][field],
      label: `t = ${snaps.snapshots[k].t}`,
    })),
  }));
  return { svg: renderFigure(panels), panels };
}

function energyFigure(spec: FigureSpec): Figure {
  const diag = readCsv(spec.input);
  const t = column(diag, "t");
  const kin = column(diag, "E_kinetic");
  const dis = column(diag, "E_dissipated");
  const bnd = column(diag, "E_boundary");
  const E1 = column(diag, "E1");
  const balance = kin.map((v, i) => v + dis[i] - bnd[i]);
  const panels: PanelSpec[] = [
    {
      title: spec.title ?? "energy identity",
      xlabel: "t",
      ylabel: "energy",
      series: [
        { x: t, y: balance, label: "E_kin + E_diss - E_boundary" },
        { x: t, y: E1, label: "E1" },
        { x: t, y: kin, label: "E_kin" },
      ],
    },
  ];
  return { svg: renderFigure(panels), panels };
}

function sweepFigure(spec: FigureSpec): Figure {
  const sweep = readCsv(spec.input);
  const gamma = column(sweep, "gamma");
  const finals = column(sweep, "switching_final");
  const panels: PanelSpec[] = [
    {
      title: spec.title ?? "switching residual vs stiffness",
      xlabel: "gamma",
      ylabel: "final switching residual",
      logY: true,
      series: [{ x: gamma, y: finals, markers: true }],
    },
  ];
  return { svg: renderFigure(panels), panels };
}

function measureFigure(spec: FigureSpec): Figure {
  const m = readMeasureFromDualityReport(spec.input);
  const x = centers(m.ac.length, m.h);
  // stems scaled by atom mass, drawn at the density an atom would have if
  // smeared over one cell, so they share the ac axis
  const stems = m.atoms.map(([xa, mass]) => ({ x: xa, y: mass / m.h }));
  const panels: PanelSpec[] = [
    {
      title: spec.title ?? "measure (atoms as stems)",
      xlabel: "x",
      ylabel: "density / atom mass per cell",
      series: [{ x, y: m.ac, label: "absolutely continuous part" }],
      stems,
    },
  ];
  return { svg: renderFigure(panels), panels };
}

function gapFigure(spec: FigureSpec): Figure {
  const { times, gaps } = readGapCurve(spec.input);
  const panels: PanelSpec[] = [
    {
      title: spec.title ?? "nonuniqueness gap",
      xlabel: "t",
      ylabel: "dual-Lipschitz gap",
      series: [{ x: times, y: gaps, markers: true }],
    },
  ];
  return { svg: renderFigure(panels), panels };
}

export function buildFigure(spec: FigureSpec): Figure {
  switch (spec.kind) {
    case "snapshots":
      return snapshotsFigure(spec);
    case "energy":
      return energyFigure(spec);
    case "sweep":
      return sweepFigure(spec);
    case "measure":
      return measureFigure(spec);
    case "gap":
      return gapFigure(spec);
    default:
      throw new Error(`unknown figure kind ${(spec as FigureSpec).kind}`);
  }
}
