import { mkdtemp, rm } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

export async function withDir<T>(fn: (dir: string) => Promise<T>): Promise<T> {
  const dir = await mkdtemp(join(tmpdir(), "starm-test-"));
  try {
    return await fn(dir);
  } finally {
    await rm(dir, { recursive: true, force: true });
  }
}

export function relError(reference: Float64Array, other: Float64Array): number {
  let num = 0;
  let den = 0;
  for (let i = 0; i < reference.length; i++) {
    const d = reference[i] - other[i];
    num += d * d;
    den += reference[i] * reference[i];
  }
  return Math.sqrt(num / den);
}

export function hex(bytes: Uint8Array): string {
  return Buffer.from(bytes.buffer, bytes.byteOffset, bytes.byteLength).toString("hex");
}

/** Deterministic filler so tests never depend on Math.random. */
export function waveData(size: number): Float64Array {
  const out = new Float64Array(size);
  for (let i = 0; i < size; i++) {
    out[i] = Math.sin(0.7 * i + 1.3) + 0.25 * Math.cos(2.9 * i);
  }
  return out;
}
