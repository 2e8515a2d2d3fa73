/**
 * Just enough basis evaluation to put coefficient arrays on plotting
 * grids.  The conventions mirror the solver's documented layout:
 *
 *  1D  DG(q) on n uniform cells of the periodic interval [0, 2pi):
 *      cell k = [k h, (k+1) h) with h = 2 pi / n carries q+1 equispaced
 *      Lagrange nodes (the cell midpoint at q = 0); coefficients are
 *      stored element-major, dof (k, i) at index k (q+1) + i.
 *
 *  2D  DG(0) on the uniform right-triangle mesh of the periodic square:
 *      grid cell (i, j) = [i hx, (i+1) hx) x [j hy, (j+1) hy) is split
 *      along the diagonal from its lower-left to its upper-right corner.
 *      The lower triangle (fractional x >= fractional y) is element
 *      2 (j nx + i), the upper triangle is that + 1; each triangle
 *      carries one constant coefficient.
 */

import type { Snapshot } from "./formats.js";

export const TWO_PI = 2.0 * Math.PI;

/** Lagrange basis values at s in [0, 1] for q+1 equispaced nodes. */
function lagrangeRow(q: number, s: number): number[] {
  if (q === 0) return [1.0];
  const nodes: number[] = [];
  for (let i = 0; i <= q; i++) nodes.push(i / q);
  const row: number[] = [];
  for (let i = 0; i <= q; i++) {
    let v = 1.0;
    for (let m = 0; m <= q; m++) {
      if (m !== i) v *= (s - nodes[m]!) / (nodes[i]! - nodes[m]!);
    }
    row.push(v);
  }
  return row;
}

export interface Curve {
  x: number[];
  values: number[];
}

/**
 * Sample a 1D density on a plotting grid.  q = 0 yields the exact step
 * outline (two points per cell edge); q > 0 samples `perCell` points of
 * the Lagrange interpolant within each cell.
 */
export function sampleDensity1d(snap: Snapshot, perCell = 8): Curve {
  if (snap.dimension !== 1) {
    throw new Error("sampleDensity1d expects a 1D snapshot");
  }
  const n = snap.shape[0]!;
  const q = snap.q;
  if (snap.rho.length !== n * (q + 1)) {
    throw new Error(
      `snapshot has ${snap.rho.length} density coefficients, expected ${n * (q + 1)}`,
    );
  }
  const h = TWO_PI / n;
  const x: number[] = [];
  const values: number[] = [];
  for (let k = 0; k < n; k++) {
    if (q === 0) {
      const v = snap.rho[k]!;
      x.push(k * h, (k + 1) * h);
      values.push(v, v);
    } else {
      for (let p = 0; p < perCell; p++) {
        const s = p / (perCell - 1);
        const row = lagrangeRow(q, s);
        let v = 0.0;
        for (let i = 0; i <= q; i++) v += row[i]! * snap.rho[k * (q + 1) + i]!;
        x.push((k + s) * h);
        values.push(v);
      }
    }
  }
  return { x, values };
}

export interface Triangle {
  /** Three (x, y) corners in physical coordinates. */
  points: [number, number][];
  value: number;
}

/** All mesh triangles of a 2D snapshot with their constant values. */
export function triangles2d(snap: Snapshot): Triangle[] {
  if (snap.dimension !== 2) {
    throw new Error("triangles2d expects a 2D snapshot");
  }
  if (snap.q !== 0) {
    throw new Error(`2D rendering supports q = 0 only, got q = ${snap.q}`);
  }
  const [nx, ny] = [snap.shape[0]!, snap.shape[1]!];
  if (snap.rho.length !== 2 * nx * ny) {
    throw new Error(
      `snapshot has ${snap.rho.length} density coefficients, expected ${2 * nx * ny}`,
    );
  }
  const hx = TWO_PI / nx;
  const hy = TWO_PI / ny;
  const out: Triangle[] = [];
  for (let j = 0; j < ny; j++) {
    for (let i = 0; i < nx; i++) {
      const x0 = i * hx;
      const y0 = j * hy;
      const lo = 2 * (j * nx + i);
      out.push({
        points: [[x0, y0], [x0 + hx, y0], [x0 + hx, y0 + hy]],
        value: snap.rho[lo]!,
      });
      out.push({
        points: [[x0, y0], [x0 + hx, y0 + hy], [x0, y0 + hy]],
        value: snap.rho[lo + 1]!,
      });
    }
  }
  return out;
}

/** Density value at a physical point of a 2D q = 0 snapshot. */
export function densityAt2d(snap: Snapshot, x: number, y: number): number {
  const [nx, ny] = [snap.shape[0]!, snap.shape[1]!];
  const hx = TWO_PI / nx;
  const hy = TWO_PI / ny;
  const wrap = (v: number, period: number): number =>
    ((v % period) + period) % period;
  const xw = wrap(x, TWO_PI);
  const yw = wrap(y, TWO_PI);
  const i = Math.min(nx - 1, Math.floor(xw / hx));
  const j = Math.min(ny - 1, Math.floor(yw / hy));
  const fx = xw / hx - i;
  const fy = yw / hy - j;
  const elem = 2 * (j * nx + i) + (fy > fx ? 1 : 0);
  return snap.rho[elem]!;
}

/** Minimum of the stored density coefficients. */
export function minDensity(snap: Snapshot): number {
  let m = Infinity;
  for (const v of snap.rho) m = Math.min(m, v);
  return m;
}
