/**
 * Minimal SVG scene builder: a fixed-margin plot area, data-to-pixel
 * transforms, 1-2-5 tick placement, and string-assembled elements.  No
 * runtime dependencies; output is a standalone .svg document.
 */

export interface DataBox {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

export interface PlotOptions {
  title?: string;
  xLabel?: string;
  yLabel?: string;
}

const MARGIN = { left: 58, right: 16, top: 30, bottom: 42 };

export const PALETTE = ["#1b6ca8", "#d1495b", "#2e8b57", "#8d6cab", "#c07d2b", "#4a4a4a"];
/** Distinct fill reserved for negative-density marks. */
export const NEGATIVE_COLOR = "#e69f00";

function fmt(v: number): string {
  const r = Math.round(v * 100) / 100;
  return Object.is(r, -0) ? "0" : String(r);
}

/** Tick positions with a 1-2-5 step covering [lo, hi]. */
export function niceTicks(lo: number, hi: number, target = 5): number[] {
  if (!(hi > lo)) return [lo];
  const raw = (hi - lo) / target;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  let step = 10 * mag;
  for (const m of [1, 2, 5]) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12 * step; v += step) {
    out.push(Math.abs(v) < 1e-12 * step ? 0 : v);
  }
  return out;
}

function tickLabel(v: number): string {
  if (v !== 0 && (Math.abs(v) >= 1e4 || Math.abs(v) < 1e-3)) {
    return v.toExponential(1);
  }
  return String(Math.round(v * 1e6) / 1e6);
}

function escapeText(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export class Plot {
  private readonly parts: string[] = [];
  private readonly sx: number;
  private readonly sy: number;

  constructor(
    readonly width: number,
    readonly height: number,
    readonly box: DataBox,
    readonly opts: PlotOptions = {},
  ) {
    if (!(box.x1 > box.x0) || !(box.y1 > box.y0)) {
      throw new Error("plot data box must have positive extent");
    }
    this.sx = (width - MARGIN.left - MARGIN.right) / (box.x1 - box.x0);
    this.sy = (height - MARGIN.top - MARGIN.bottom) / (box.y1 - box.y0);
  }

  px(x: number): number {
    return MARGIN.left + (x - this.box.x0) * this.sx;
  }

  // SVG y grows downward; data y grows upward
  py(y: number): number {
    return this.height - MARGIN.bottom - (y - this.box.y0) * this.sy;
  }

  raw(element: string): void {
    this.parts.push(element);
  }

  openGroup(attrs: string): void {
    this.parts.push(`<g ${attrs}>`);
  }

  closeGroup(): void {
    this.parts.push("</g>");
  }

  line(x0: number, y0: number, x1: number, y1: number, attrs: string): void {
    this.parts.push(
      `<line x1="${fmt(this.px(x0))}" y1="${fmt(this.py(y0))}" ` +
        `x2="${fmt(this.px(x1))}" y2="${fmt(this.py(y1))}" ${attrs}/>`,
    );
  }

  polyline(xs: number[], ys: number[], attrs: string): void {
    const pts: string[] = [];
    for (let k = 0; k < xs.length; k++) {
      pts.push(`${fmt(this.px(xs[k]!))},${fmt(this.py(ys[k]!))}`);
    }
    this.parts.push(`<polyline points="${pts.join(" ")}" fill="none" ${attrs}/>`);
  }

  polygon(points: [number, number][], attrs: string): void {
    const pts = points
      .map(([x, y]) => `${fmt(this.px(x))},${fmt(this.py(y))}`)
      .join(" ");
    this.parts.push(`<polygon points="${pts}" ${attrs}/>`);
  }

  rect(x0: number, y0: number, x1: number, y1: number, attrs: string): void {
    const xa = Math.min(this.px(x0), this.px(x1));
    const ya = Math.min(this.py(y0), this.py(y1));
    const w = Math.abs(this.px(x1) - this.px(x0));
    const h = Math.abs(this.py(y1) - this.py(y0));
    this.parts.push(
      `<rect x="${fmt(xa)}" y="${fmt(ya)}" width="${fmt(w)}" height="${fmt(h)}" ${attrs}/>`,
    );
  }

  /** Pixel-coordinate text (for legends and annotations). */
  textAt(xpx: number, ypx: number, s: string, attrs = ""): void {
    this.parts.push(
      `<text x="${fmt(xpx)}" y="${fmt(ypx)}" font-family="sans-serif" ` +
        `font-size="11" ${attrs}>${escapeText(s)}</text>`,
    );
  }

  axes(): void {
    const x0 = MARGIN.left;
    const x1 = this.width - MARGIN.right;
    const y0 = this.height - MARGIN.bottom;
    const frame = `stroke="#333" stroke-width="1" fill="none"`;
    this.parts.push(
      `<rect x="${fmt(x0)}" y="${fmt(MARGIN.top)}" width="${fmt(x1 - x0)}" ` +
        `height="${fmt(y0 - MARGIN.top)}" ${frame}/>`,
    );
    for (const t of niceTicks(this.box.x0, this.box.x1)) {
      const xp = this.px(t);
      this.parts.push(
        `<line x1="${fmt(xp)}" y1="${fmt(y0)}" x2="${fmt(xp)}" y2="${fmt(y0 + 4)}" stroke="#333"/>`,
      );
      this.textAt(xp, y0 + 16, tickLabel(t), `text-anchor="middle"`);
    }
    for (const t of niceTicks(this.box.y0, this.box.y1)) {
      const yp = this.py(t);
      this.parts.push(
        `<line x1="${fmt(x0 - 4)}" y1="${fmt(yp)}" x2="${fmt(x0)}" y2="${fmt(yp)}" stroke="#333"/>`,
      );
      this.textAt(x0 - 7, yp + 3.5, tickLabel(t), `text-anchor="end"`);
    }
    if (this.opts.title) {
      this.textAt(this.width / 2, 18, this.opts.title, `text-anchor="middle" font-size="13"`);
    }
    if (this.opts.xLabel) {
      this.textAt(
        (x0 + x1) / 2,
        this.height - 8,
        this.opts.xLabel,
        `text-anchor="middle" font-style="italic"`,
      );
    }
    if (this.opts.yLabel) {
      const yc = (MARGIN.top + y0) / 2;
      this.parts.push(
        `<text x="14" y="${fmt(yc)}" font-family="sans-serif" font-size="11" ` +
          `font-style="italic" text-anchor="middle" ` +
          `transform="rotate(-90 14 ${fmt(yc)})">${escapeText(this.opts.yLabel)}</text>`,
      );
    }
  }

  legend(entries: { label: string; color: string; dashed?: boolean }[]): void {
    let y = MARGIN.top + 14;
    const x = this.width - MARGIN.right - 130;
    for (const e of entries) {
      const dash = e.dashed ? ` stroke-dasharray="5 3"` : "";
      this.parts.push(
        `<line x1="${fmt(x)}" y1="${fmt(y - 3.5)}" x2="${fmt(x + 22)}" ` +
          `y2="${fmt(y - 3.5)}" stroke="${e.color}" stroke-width="2"${dash}/>`,
      );
      this.textAt(x + 28, y, e.label);
      y += 15;
    }
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}
