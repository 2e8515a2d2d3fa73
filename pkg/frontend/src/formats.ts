/**
 * Read-only parsers for the run-directory formats written by the `ridk`
 * command:
 *
 *   meta               `# ridk <version>` comment, bare `seed=N` lines,
 *                      then the echoed effective INI config
 *   diagnostics.csv    header t,mass,min_rho,l2_rho,l2_j,energy, one row
 *                      per step (t = 0 included), 17 significant digits
 *   snapshot_NNNN.dat  binary: 8-byte magic "RIDKSNAP", little-endian
 *                      int32 header (dimension, q, n | nx ny, ndof_rho,
 *                      ndof_j), one float64 time, then the density and
 *                      momentum coefficients as little-endian float64
 *
 * Two-species runs use per-species suffixes (diagnostics_A.csv,
 * snapshot_B_0002.dat, ...), each file in the single-species format.
 * All errors name the offending file.
 */

import { readFileSync, readdirSync } from "node:fs";
import { join } from "node:path";

const SNAPSHOT_MAGIC = "RIDKSNAP";

export interface Snapshot {
  dimension: 1 | 2;
  q: number;
  /** n in 1D, [nx, ny] in 2D. */
  shape: number[];
  t: number;
  rho: Float64Array;
  j: Float64Array;
}

export interface Diagnostics {
  t: number[];
  mass: number[];
  minRho: number[];
  l2Rho: number[];
  l2J: number[];
  energy: number[];
}

export interface Meta {
  version: string | null;
  seeds: number[];
  /** section -> key -> raw string value of the echoed config. */
  sections: Map<string, Map<string, string>>;
}

/** One species' file set within a run directory. */
export interface SpeciesFiles {
  /** "" for single-species runs, otherwise the suffix letter (A, B). */
  label: string;
  diagnostics: string;
  snapshots: { index: number; path: string }[];
}

export interface RunListing {
  dir: string;
  meta: string;
  species: SpeciesFiles[];
}

export function readSnapshot(path: string): Snapshot {
  const buf = readFileSync(path);
  if (buf.length < 8 || buf.toString("latin1", 0, 8) !== SNAPSHOT_MAGIC) {
    throw new Error(`${path}: not a snapshot file (bad magic)`);
  }
  let pos = 8;
  const int = (): number => {
    if (pos + 4 > buf.length) throw new Error(`${path}: truncated header`);
    const v = buf.readInt32LE(pos);
    pos += 4;
    return v;
  };
  const dimension = int();
  const q = int();
  if (dimension !== 1 && dimension !== 2) {
    throw new Error(`${path}: bad dimension ${dimension}`);
  }
  if (q < 0) throw new Error(`${path}: bad polynomial degree ${q}`);
  const shape: number[] = [];
  for (let k = 0; k < dimension; k++) shape.push(int());
  const ndofRho = int();
  const ndofJ = int();
  if (ndofRho <= 0 || ndofJ <= 0) {
    throw new Error(`${path}: bad dof counts ${ndofRho}, ${ndofJ}`);
  }
  if (pos + 8 > buf.length) throw new Error(`${path}: truncated header`);
  const t = buf.readDoubleLE(pos);
  pos += 8;
  const expected = pos + 8 * (ndofRho + ndofJ);
  if (buf.length !== expected) {
    throw new Error(`${path}: expected ${expected} bytes, found ${buf.length}`);
  }
  const doubles = (n: number): Float64Array => {
    const out = new Float64Array(n);
    for (let k = 0; k < n; k++, pos += 8) out[k] = buf.readDoubleLE(pos);
    return out;
  };
  return { dimension, q, shape, t, rho: doubles(ndofRho), j: doubles(ndofJ) };
}

const DIAG_HEADER = "t,mass,min_rho,l2_rho,l2_j,energy";

export function readDiagnostics(path: string): Diagnostics {
  const lines = readFileSync(path, "utf8").trim().split("\n");
  if (lines[0]?.trim() !== DIAG_HEADER) {
    throw new Error(`${path}: unexpected diagnostics header ${lines[0]}`);
  }
  const out: Diagnostics = { t: [], mass: [], minRho: [], l2Rho: [], l2J: [], energy: [] };
  const cols = [out.t, out.mass, out.minRho, out.l2Rho, out.l2J, out.energy];
  for (let k = 1; k < lines.length; k++) {
    const cells = lines[k]!.split(",");
    if (cells.length !== 6) {
      throw new Error(`${path}: row ${k + 1} has ${cells.length} fields, expected 6`);
    }
    for (let c = 0; c < 6; c++) {
      const v = Number(cells[c]);
      if (!Number.isFinite(v)) {
        throw new Error(`${path}: row ${k + 1} field ${c + 1} is not a number`);
      }
      cols[c]!.push(v);
    }
  }
  return out;
}

export function parseMeta(path: string): Meta {
  const meta: Meta = { version: null, seeds: [], sections: new Map() };
  let current: Map<string, string> | null = null;
  for (const raw of readFileSync(path, "utf8").split("\n")) {
    const line = raw.trim();
    if (line === "") continue;
    if (line.startsWith("#")) {
      const m = /^#\s*ridk\s+(\S+)/.exec(line);
      if (m) meta.version = m[1]!;
      continue;
    }
    const sec = /^\[(.+)\]$/.exec(line);
    if (sec) {
      current = new Map();
      meta.sections.set(sec[1]!, current);
      continue;
    }
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`${path}: unparseable line ${JSON.stringify(line)}`);
    const key = line.slice(0, eq).trim();
    const value = line.slice(eq + 1).trim();
    if (current === null) {
      // bare seed lines precede the first section header
      if (key !== "seed") {
        throw new Error(`${path}: unexpected key ${key} before first section`);
      }
      meta.seeds.push(Number(value));
    } else {
      current.set(key, value);
    }
  }
  return meta;
}

const SNAP_RE = /^snapshot(?:_([A-Z]))?_(\d{4})\.dat$/;
const DIAG_RE = /^diagnostics(?:_([A-Z]))?\.csv$/;

/** Group a run directory's files per species; errors on an empty listing. */
export function scanRunDir(dir: string): RunListing {
  const bySpecies = new Map<string, SpeciesFiles>();
  const species = (label: string): SpeciesFiles => {
    let s = bySpecies.get(label);
    if (!s) {
      s = { label, diagnostics: "", snapshots: [] };
      bySpecies.set(label, s);
    }
    return s;
  };
  let meta = "";
  for (const name of readdirSync(dir)) {
    if (name === "meta") {
      meta = join(dir, name);
      continue;
    }
    const d = DIAG_RE.exec(name);
    if (d) {
      species(d[1] ?? "").diagnostics = join(dir, name);
      continue;
    }
    const s = SNAP_RE.exec(name);
    if (s) {
      species(s[1] ?? "").snapshots.push({ index: Number(s[2]), path: join(dir, name) });
    }
  }
  if (bySpecies.size === 0) {
    throw new Error(`${dir}: no diagnostics or snapshot files found`);
  }
  const listing: RunListing = { dir, meta, species: [] };
  for (const label of [...bySpecies.keys()].sort()) {
    const s = bySpecies.get(label)!;
    s.snapshots.sort((a, b) => a.index - b.index);
    listing.species.push(s);
  }
  return listing;
}
