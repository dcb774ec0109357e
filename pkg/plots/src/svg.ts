/**
 * Deterministic SVG assembly: fixed canvas, no timestamps, numbers rounded
 * to a stable short form.  Every chart is a pure function of its data.
 */

export const WIDTH = 860;
export const HEIGHT = 520;
export const MARGIN = { top: 48, right: 170, bottom: 56, left: 72 };

export const PALETTE = [
  "#3b6fb6", "#d1662c", "#3f9d58", "#c23d4a", "#8461b8",
  "#7a6651", "#d57fbe", "#6d7680", "#b0b03a", "#4fb8c9",
];

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  const rounded = Math.round(x * 100) / 100;
  return Object.is(rounded, -0) ? "0" : String(rounded);
}

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((value: number) =>
    r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  scale.range = range;
  return scale;
}

export function extent(values: number[], padFraction = 0.05): [number, number] {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const pad = (hi - lo) * padFraction;
  return [lo - pad, hi + pad];
}

export function ticks(lo: number, hi: number, count = 6): number[] {
  const span = hi - lo || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / count / step;
  const unit = err >= 7.5 ? step * 10 : err >= 3.5 ? step * 5 : err >= 1.5 ? step * 2 : step;
  const out: number[] = [];
  for (let v = Math.ceil(lo / unit) * unit; v <= hi + unit * 1e-9; v += unit) {
    out.push(Math.abs(v) < unit * 1e-9 ? 0 : v);
  }
  return out;
}

const escape = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export class SvgCanvas {
  private parts: string[] = [];

  constructor(
    public readonly width = WIDTH,
    public readonly height = HEIGHT,
  ) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
        `height="${height}" viewBox="0 0 ${width} ${height}" ` +
        `font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${width}" height="${height}" fill="#ffffff"/>`,
    );
  }

  raw(fragment: string): void {
    this.parts.push(fragment);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string,
       width = 1, dash?: string): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}"` +
        ` stroke="${stroke}" stroke-width="${width}"${d}/>`,
    );
  }

  polyline(points: [number, number][], stroke: string, width = 2): void {
    const attr = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${attr}" fill="none" stroke="${stroke}" ` +
        `stroke-width="${width}" stroke-linejoin="round"/>`,
    );
  }

  path(d: string, fill: string, stroke = "none", opacity = 1): void {
    this.parts.push(
      `<path d="${d}" fill="${fill}" stroke="${stroke}" ` +
        `fill-opacity="${opacity}"/>`,
    );
  }

  circle(cx: number, cy: number, r: number, fill: string): void {
    this.parts.push(
      `<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${r}" fill="${fill}"/>`,
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string,
       opacity = 1): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" ` +
        `height="${fmt(h)}" fill="${fill}" fill-opacity="${opacity}"/>`,
    );
  }

  text(x: number, y: number, content: string, options: {
    size?: number; anchor?: "start" | "middle" | "end";
    fill?: string; rotate?: number; bold?: boolean;
  } = {}): void {
    const { size = 12, anchor = "start", fill = "#222", rotate, bold } =
      options;
    const transform = rotate !== undefined
      ? ` transform="rotate(${rotate} ${fmt(x)} ${fmt(y)})"` : "";
    const weight = bold ? ` font-weight="bold"` : "";
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" ` +
        `text-anchor="${anchor}" fill="${fill}"${weight}${transform}>` +
        `${escape(content)}</text>`,
    );
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

export interface AxisOptions {
  xLabel: string;
  yLabel: string;
  title: string;
}

/** Draw a framed plot area with ticks and unit-bearing labels. */
export function drawAxes(
  canvas: SvgCanvas,
  x: Scale,
  y: Scale,
  options: AxisOptions,
): void {
  const [rx0, rx1] = x.range;
  const [ry0, ry1] = y.range;
  canvas.line(rx0, ry0, rx1, ry0, "#222");
  canvas.line(rx0, ry0, rx0, ry1, "#222");
  for (const t of ticks(x.domain[0], x.domain[1])) {
    const px = x(t);
    canvas.line(px, ry0, px, ry0 + 5, "#222");
    canvas.text(px, ry0 + 18, fmt(t), { anchor: "middle", size: 11 });
    canvas.line(px, ry0, px, ry1, "#eee");
  }
  for (const t of ticks(y.domain[0], y.domain[1])) {
    const py = y(t);
    canvas.line(rx0 - 5, py, rx0, py, "#222");
    canvas.text(rx0 - 8, py + 4, fmt(t), { anchor: "end", size: 11 });
    canvas.line(rx0, py, rx1, py, "#eee");
  }
  const cx = (rx0 + rx1) / 2;
  canvas.text(cx, ry0 + 40, options.xLabel, { anchor: "middle", size: 13 });
  canvas.text(20, (ry0 + ry1) / 2, options.yLabel, {
    anchor: "middle", size: 13, rotate: -90,
  });
  canvas.text(cx, 24, options.title, { anchor: "middle", size: 16, bold: true });
}

export function drawLegend(
  canvas: SvgCanvas,
  entries: { label: string; color: string }[],
  x: number,
  y: number,
): void {
  entries.forEach((entry, i) => {
    const py = y + i * 20;
    canvas.rect(x, py - 9, 14, 10, entry.color);
    canvas.text(x + 20, py, entry.label, { size: 12 });
  });
}
