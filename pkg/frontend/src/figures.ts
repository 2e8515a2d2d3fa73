/**
 * Figure renderers for run directories.
 *
 *   profiles  overlaid density profiles at the snapshot times (1D runs)
 *   heatmap   one 2D field image per snapshot, negative triangles
 *             filled in a distinct color (2D runs)
 *   mass      species mass against time with the total-mass-one
 *             reference line
 *
 * Negative-flag contract: a figure carries marks inside
 * <g class="negative-region" data-snapshot="..."> exactly for those
 * snapshots whose stored minimum density coefficient is below zero,
 * and each rendered snapshot is reported with its minimum and flag.
 * Rendering never writes into the run directory it reads.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { basename, join, resolve } from "node:path";

import { minDensity, sampleDensity1d, triangles2d, type Curve } from "./basis.js";
import { readDiagnostics, readSnapshot, scanRunDir, type RunListing, type Snapshot } from "./formats.js";
import { NEGATIVE_COLOR, PALETTE, Plot } from "./svg.js";

export type FigureKind = "profiles" | "heatmap" | "mass";

export interface SnapshotFlag {
  file: string;
  species: string;
  t: number;
  minRho: number;
  flagged: boolean;
}

export interface RenderResult {
  written: string[];
  flags: SnapshotFlag[];
}

interface LoadedSnapshot {
  file: string;
  species: string;
  snap: Snapshot;
}

function loadSnapshots(listing: RunListing): LoadedSnapshot[] {
  const out: LoadedSnapshot[] = [];
  for (const sp of listing.species) {
    for (const { path } of sp.snapshots) {
      out.push({ file: basename(path), species: sp.label, snap: readSnapshot(path) });
    }
  }
  if (out.length === 0) {
    throw new Error(`${listing.dir}: no snapshots to render`);
  }
  return out;
}

function flagOf(ls: LoadedSnapshot): SnapshotFlag {
  const minRho = minDensity(ls.snap);
  return {
    file: ls.file,
    species: ls.species,
    t: ls.snap.t,
    minRho,
    flagged: minRho < 0,
  };
}

function speciesTag(label: string): string {
  return label === "" ? "" : `_${label}`;
}

/**
 * x-intervals where a sampled curve is negative: segments between
 * consecutive sample points with both endpoint values below zero,
 * merged across shared cell-boundary points.
 */
function negativeSpans(curve: Curve): [number, number][] {
  const spans: [number, number][] = [];
  let open: [number, number] | null = null;
  for (let k = 0; k + 1 < curve.x.length; k++) {
    if (!(curve.values[k]! < 0 && curve.values[k + 1]! < 0)) continue;
    const xa = curve.x[k]!;
    const xb = curve.x[k + 1]!;
    if (open && xa <= open[1] + 1e-12) {
      open[1] = Math.max(open[1], xb);
    } else {
      open = [xa, xb];
      spans.push(open);
    }
  }
  return spans;
}

/** Overlaid density profiles at the snapshot times; 1D runs only. */
export function renderProfiles(runDir: string, outDir: string): RenderResult {
  const listing = scanRunDir(runDir);
  const loaded = loadSnapshots(listing);
  if (loaded.some((ls) => ls.snap.dimension !== 1)) {
    throw new Error(`${runDir}: profiles need a 1D run (use heatmap for 2D)`);
  }
  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];
  const flags: SnapshotFlag[] = [];
  for (const sp of listing.species) {
    const group = loaded.filter((ls) => ls.species === sp.label);
    const curves = group.map((ls) => sampleDensity1d(ls.snap));
    let lo = 0;
    let hi = -Infinity;
    for (const c of curves) {
      for (const v of c.values) {
        lo = Math.min(lo, v);
        hi = Math.max(hi, v);
      }
    }
    const pad = 0.05 * (hi - lo || 1);
    const name = sp.label === "" ? "density" : `density of species ${sp.label}`;
    const plot = new Plot(640, 420, { x0: 0, x1: 2 * Math.PI, y0: lo - pad, y1: hi + pad }, {
      title: `${name} at ${group.length} snapshot times`,
      xLabel: "x",
      yLabel: "density",
    });
    // negative-density bands go underneath the curves
    group.forEach((ls, k) => {
      const flag = flagOf(ls);
      flags.push(flag);
      if (!flag.flagged) return;
      plot.openGroup(`class="negative-region" data-snapshot="${ls.file}"`);
      for (const [xa, xb] of negativeSpans(curves[k]!)) {
        plot.rect(xa, lo - pad, Math.max(xb, xa + 0.01), 0, `fill="${NEGATIVE_COLOR}" opacity="0.35"`);
      }
      plot.closeGroup();
    });
    if (lo < 0) {
      plot.line(0, 0, 2 * Math.PI, 0, `stroke="#888" stroke-dasharray="3 3"`);
    }
    group.forEach((ls, k) => {
      const color = PALETTE[k % PALETTE.length]!;
      plot.polyline(curves[k]!.x, curves[k]!.values, `stroke="${color}" stroke-width="1.6"`);
    });
    plot.axes();
    plot.legend(group.map((ls, k) => ({
      label: `t = ${ls.snap.t.toFixed(2)}`,
      color: PALETTE[k % PALETTE.length]!,
    })));
    const out = join(outDir, `profiles${speciesTag(sp.label)}.svg`);
    writeFileSync(out, plot.render());
    written.push(out);
  }
  return { written, flags };
}

/** One heatmap per snapshot, negative triangles in the flag color. */
export function renderHeatmaps(runDir: string, outDir: string): RenderResult {
  const listing = scanRunDir(runDir);
  const loaded = loadSnapshots(listing);
  if (loaded.some((ls) => ls.snap.dimension !== 2)) {
    throw new Error(`${runDir}: heatmaps need a 2D run (use profiles for 1D)`);
  }
  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];
  const flags: SnapshotFlag[] = [];
  for (const ls of loaded) {
    const flag = flagOf(ls);
    flags.push(flag);
    const tris = triangles2d(ls.snap);
    let hi = -Infinity;
    for (const t of tris) hi = Math.max(hi, t.value);
    const span = hi > 0 ? hi : 1;
    const shade = (v: number): string => {
      // light-to-dark blue ramp over the nonnegative range
      const s = Math.max(0, Math.min(1, v / span));
      const mix = (a: number, b: number): number => Math.round(a + (b - a) * s);
      return `rgb(${mix(247, 8)},${mix(251, 48)},${mix(255, 107)})`;
    };
    const name = ls.species === "" ? "density" : `species ${ls.species}`;
    const plot = new Plot(520, 520, { x0: 0, x1: 2 * Math.PI, y0: 0, y1: 2 * Math.PI }, {
      title: `${name} at t = ${ls.snap.t.toFixed(2)}`,
      xLabel: "x",
      yLabel: "y",
    });
    for (const t of tris) {
      if (t.value < 0) continue;
      const c = shade(t.value);
      plot.polygon(t.points, `fill="${c}" stroke="${c}" stroke-width="0.4"`);
    }
    const negatives = tris.filter((t) => t.value < 0);
    if (negatives.length > 0) {
      plot.openGroup(`class="negative-region" data-snapshot="${ls.file}"`);
      for (const t of negatives) {
        plot.polygon(
          t.points,
          `fill="${NEGATIVE_COLOR}" stroke="${NEGATIVE_COLOR}" stroke-width="0.4"`,
        );
      }
      plot.closeGroup();
    }
    plot.axes();
    const note = flag.flagged
      ? `min ${flag.minRho.toExponential(2)} < 0 (flagged), max ${hi.toExponential(2)}`
      : `min ${flag.minRho.toExponential(2)}, max ${hi.toExponential(2)}`;
    plot.textAt(520 / 2, 520 - 22, note, `text-anchor="middle" fill="#555"`);
    const stem = ls.file.replace(/^snapshot/, "heatmap").replace(/\.dat$/, ".svg");
    const out = join(outDir, stem);
    writeFileSync(out, plot.render());
    written.push(out);
  }
  return { written, flags };
}

/** Species mass against time with the total-mass-one reference line. */
export function renderMass(runDir: string, outDir: string): RenderResult {
  const listing = scanRunDir(runDir);
  const series: { label: string; t: number[]; mass: number[] }[] = [];
  for (const sp of listing.species) {
    if (sp.diagnostics === "") {
      throw new Error(`${listing.dir}: missing diagnostics for species ${sp.label || "(single)"}`);
    }
    const d = readDiagnostics(sp.diagnostics);
    series.push({ label: sp.label, t: d.t, mass: d.mass });
  }
  if (series.length > 1) {
    const first = series[0]!;
    const total = first.mass.map((_, k) =>
      series.reduce((acc, s) => acc + s.mass[k]!, 0),
    );
    series.push({ label: "total", t: first.t, mass: total });
  }
  let lo = 0;
  let hi = 1;
  let tEnd = 0;
  for (const s of series) {
    for (const v of s.mass) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
    tEnd = Math.max(tEnd, s.t[s.t.length - 1] ?? 0);
  }
  const pad = 0.06 * (hi - lo || 1);
  const plot = new Plot(640, 420, { x0: 0, x1: tEnd, y0: lo - pad, y1: hi + pad }, {
    title: "species mass over time",
    xLabel: "t",
    yLabel: "mass",
  });
  plot.openGroup(`class="reference-line"`);
  plot.line(0, 1, tEnd, 1, `stroke="#888" stroke-dasharray="6 4" stroke-width="1.2"`);
  plot.closeGroup();
  if (lo < 0) {
    plot.line(0, 0, tEnd, 0, `stroke="#bbb" stroke-dasharray="2 3"`);
  }
  series.forEach((s, k) => {
    const color = s.label === "total" ? "#222" : PALETTE[k % PALETTE.length]!;
    const dash = s.label === "total" ? ` stroke-dasharray="8 4"` : "";
    plot.polyline(s.t, s.mass, `stroke="${color}" stroke-width="1.6"${dash}`);
  });
  plot.axes();
  plot.legend(
    series
      .map((s, k) => ({
        label: s.label === "" ? "mass" : s.label === "total" ? "total" : `species ${s.label}`,
        color: s.label === "total" ? "#222" : PALETTE[k % PALETTE.length]!,
        dashed: s.label === "total",
      }))
      .concat([{ label: "total mass 1", color: "#888", dashed: true }]),
  );
  mkdirSync(outDir, { recursive: true });
  const out = join(outDir, "mass.svg");
  writeFileSync(out, plot.render());
  return { written: [out], flags: [] };
}

/** Render one kind, or everything that applies to the run's dimension. */
export function renderRun(runDir: string, kind: FigureKind | "all", outDir: string): RenderResult {
  if (resolve(outDir) === resolve(runDir)) {
    throw new Error("refusing to write figures into the run directory itself");
  }
  if (kind !== "all") {
    const fn = { profiles: renderProfiles, heatmap: renderHeatmaps, mass: renderMass }[kind];
    return fn(runDir, outDir);
  }
  const listing = scanRunDir(runDir);
  const first = listing.species[0]!.snapshots[0];
  const dimension = first ? readSnapshot(first.path).dimension : 1;
  const parts = [
    dimension === 1 ? renderProfiles(runDir, outDir) : renderHeatmaps(runDir, outDir),
    renderMass(runDir, outDir),
  ];
  return {
    written: parts.flatMap((p) => p.written),
    flags: parts.flatMap((p) => p.flags),
  };
}
