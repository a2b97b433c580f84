/** Minimal deterministic SVG line plots: no DOM, no timestamps, fixed number
 * formatting, so re-rendering a spec is byte-identical. */

export interface Series {
  x: number[];
  y: number[];
  label?: string;
  color?: string;
  markers?: boolean;
}

export interface Stem {
  x: number;
  y: number;
}

export interface PanelSpec {
  title?: string;
  xlabel?: string;
  ylabel?: string;
  series: Series[];
  stems?: Stem[];
  logY?: boolean;
}

const WIDTH = 640;
const HEIGHT = 360;
const MARGIN = { left: 64, right: 16, top: 32, bottom: 44 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];

const fmt = (v: number): string => {
  if (!Number.isFinite(v)) return "0";
  const s = v.toPrecision(6);
  return s.includes("e") ? s : s.replace(/\.?0+$/, "").replace(/^-0$/, "0");
};

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (Number.isFinite(v)) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  if (lo === Infinity) return [0, 1];
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  return [lo, hi];
}

function ticks(lo: number, hi: number, n = 5): number[] {
  const out: number[] = [];
  for (let i = 0; i <= n; i++) out.push(lo + ((hi - lo) * i) / n);
  return out;
}

export function renderPanel(panel: PanelSpec, width = WIDTH, height = HEIGHT): string {
  const xs = panel.series.flatMap((s) => s.x).concat((panel.stems ?? []).map((s) => s.x));
  const yRaw = panel.series
    .flatMap((s) => s.y)
    .concat((panel.stems ?? []).map((s) => s.y), panel.logY ? [] : [0]);
  const ys = panel.logY ? yRaw.filter((v) => v > 0).map(Math.log10) : yRaw;
  const [x0, x1] = extent(xs);
  const [y0, y1] = extent(ys);
  const innerW = width - MARGIN.left - MARGIN.right;
  const innerH = height - MARGIN.top - MARGIN.bottom;
  const px = (x: number) => MARGIN.left + ((x - x0) / (x1 - x0)) * innerW;
  const py = (yv: number) => {
    const v = panel.logY ? Math.log10(Math.max(yv, 1e-300)) : yv;
    return MARGIN.top + innerH - ((v - y0) / (y1 - y0)) * innerH;
  };

  const parts: string[] = [];
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${fmt(innerW)}" height="${fmt(innerH)}" fill="none" stroke="#888" stroke-width="1"/>`);
  for (const t of ticks(x0, x1)) {
    const X = fmt(px(t));
    parts.push(`<line x1="${X}" y1="${MARGIN.top + innerH}" x2="${X}" y2="${MARGIN.top + innerH + 4}" stroke="#555"/>`);
    parts.push(`<text x="${X}" y="${MARGIN.top + innerH + 18}" font-size="11" text-anchor="middle" fill="#333">${fmt(t)}</text>`);
  }
  for (const t of ticks(y0, y1)) {
    const Y = fmt(MARGIN.top + innerH - ((t - y0) / (y1 - y0)) * innerH);
    const label = panel.logY ? `1e${fmt(t)}` : fmt(t);
    parts.push(`<line x1="${MARGIN.left - 4}" y1="${Y}" x2="${MARGIN.left}" y2="${Y}" stroke="#555"/>`);
    parts.push(`<text x="${MARGIN.left - 8}" y="${Y}" font-size="11" text-anchor="end" dominant-baseline="middle" fill="#333">${label}</text>`);
  }
  if (panel.title) {
    parts.push(`<text x="${width / 2}" y="20" font-size="14" text-anchor="middle" fill="#111">${panel.title}</text>`);
  }
  if (panel.xlabel) {
    parts.push(`<text x="${width / 2}" y="${height - 8}" font-size="12" text-anchor="middle" fill="#111">${panel.xlabel}</text>`);
  }
  if (panel.ylabel) {
    parts.push(`<text x="14" y="${MARGIN.top + innerH / 2}" font-size="12" text-anchor="middle" fill="#111" transform="rotate(-90 14 ${MARGIN.top + innerH / 2})">${panel.ylabel}</text>`);
  }

  panel.series.forEach((s, i) => {
    const color = s.color ?? PALETTE[i % PALETTE.length];
    if (s.x.length === 1) {
      parts.push(`<circle class="point" cx="${fmt(px(s.x[0]))}" cy="${fmt(py(s.y[0]))}" r="4" fill="${color}"/>`);
    } else {
      const pts = s.x.map((x, k) => `${fmt(px(x))},${fmt(py(s.y[k]))}`).join(" ");
      parts.push(`<polyline class="series" points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
    }
    if (s.markers) {
      s.x.forEach((x, k) => {
        parts.push(`<circle class="marker" cx="${fmt(px(x))}" cy="${fmt(py(s.y[k]))}" r="3" fill="${color}"/>`);
      });
    }
    if (s.label) {
      parts.push(`<text x="${MARGIN.left + 8}" y="${MARGIN.top + 14 + 14 * i}" font-size="11" fill="${color}">${s.label}</text>`);
    }
  });

  for (const stem of panel.stems ?? []) {
    const X = fmt(px(stem.x));
    parts.push(`<line class="stem" x1="${X}" y1="${fmt(py(0))}" x2="${X}" y2="${fmt(py(stem.y))}" stroke="#d62728" stroke-width="2"/>`);
    parts.push(`<circle class="stem-head" cx="${X}" cy="${fmt(py(stem.y))}" r="3.5" fill="#d62728"/>`);
  }

  return parts.join("\n");
}

export function renderFigure(panels: PanelSpec[], width = WIDTH): string {
  const height = HEIGHT * panels.length;
  const body = panels
    .map((p, i) => `<g transform="translate(0 ${i * HEIGHT})">\n${renderPanel(p, width)}\n</g>`)
    .join("\n");
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif">\n<rect width="${width}" height="${height}" fill="white"/>\n${body}\n</svg>\n`;
}
