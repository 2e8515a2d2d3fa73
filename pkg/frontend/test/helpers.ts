// Independent snapshot writer used by the tests, assembled byte by byte
// so the reader is never checked against itself.

import { writeFileSync } from "node:fs";

export function writeSnapshotFile(
  path: string,
  dimension: number,
  q: number,
  shape: number[],
  t: number,
  rho: number[],
  j: number[],
): void {
  const ints = [dimension, q, ...shape, rho.length, j.length];
  const buf = Buffer.alloc(8 + 4 * ints.length + 8 * (1 + rho.length + j.length));
  buf.write("RIDKSNAP", 0, "latin1");
  let pos = 8;
  for (const v of ints) {
    buf.writeInt32LE(v, pos);
    pos += 4;
  }
  buf.writeDoubleLE(t, pos);
  pos += 8;
  for (const v of [...rho, ...j]) {
    buf.writeDoubleLE(v, pos);
    pos += 8;
  }
  writeFileSync(path, buf);
}
