import { mkdtemp, readFile, rm, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { checkCli, parseKeyValues, parseNumber } from "./cli";
import { checkDims, rowMajorToColumnMajor, type Layout } from "./layout";
import { decodeTensor, encodeTensor, sniffMagic } from "./tensorfile";

/** Matches the version of the compressor package this binds to. */
export const VERSION = "0.1.0";

export { cliCommand } from "./cli";
export { columnMajorToRowMajor, rowMajorToColumnMajor, strides, type Layout } from "./layout";
export { decodeTensor, encodeTensor, sniffMagic } from "./tensorfile";

/**
 * A float64 tensor bound for compression. Data is always held column-major
 * (first index fastest); `converted` records whether binding had to copy a
 * row-major input into that order.
 */
export interface BoundTensorView {
  readonly dims: readonly number[];
  readonly layout: "column-major";
  readonly data: Float64Array;
  readonly converted: boolean;
}

/**
 * Bind an in-memory array for compression. Column-major input is borrowed
 * as-is (zero copy; the caller must not mutate it while in use). Row-major
 * input is converted once, with `converted: true` on the result.
 */
export function bindTensor(
  data: Float64Array,
  dims: readonly number[],
  layout: Layout = "column-major",
): BoundTensorView {
  if (!(data instanceof Float64Array)) {
    throw new TypeError("data must be a Float64Array");
  }
  if (dims.length < 3) {
    throw new Error(`need at least 3 modes, got ${dims.length}`);
  }
  const size = checkDims(dims);
  if (data.length !== size) {
    throw new Error(`expected ${size} elements for dims ${dims.join("x")}, got ${data.length}`);
  }
  if (layout === "column-major") {
    return { dims: [...dims], layout, data, converted: false };
  }
  if (layout !== "row-major") {
    throw new Error(`unknown layout ${JSON.stringify(layout)}`);
  }
  return {
    dims: [...dims],
    layout: "column-major",
    data: rowMajorToColumnMajor(data, dims),
    converted: true,
  };
}

export interface CompressOptions {
  /** identity|dct|data|custom:PATH, one kind for all trailing modes or a comma list. */
  transform?: string;
  /** tsvdm2 pipeline strategy. */
  strategy?: "memory" | "compute" | "truncate";
  svdStrategy?: "slices" | "svd";
  ttmVariant?: "batched" | "loop" | "parfor";
  /** Worker threads for the compressor process (default 1). */
  threads?: number;
}

/** A compressed artifact plus the stats the compressor reported for it. */
export interface CompressedHandle {
  readonly bytes: Uint8Array;
  /** Realized relative error; undefined for handles loaded from disk. */
  readonly error?: number;
  readonly ratio: number;
}

async function withTempDir<T>(fn: (dir: string) => Promise<T>): Promise<T> {
  const dir = await mkdtemp(join(tmpdir(), "starm-"));
  try {
    return await fn(dir);
  } finally {
    await rm(dir, { recursive: true, force: true });
  }
}

async function compress(
  view: BoundTensorView,
  methodArgs: string[],
  opts: CompressOptions,
): Promise<CompressedHandle> {
  return withTempDir(async (dir) => {
    const input = join(dir, "input.ten");
    const output = join(dir, "output.cmp");
    await writeFile(input, encodeTensor(view.data, view.dims));
    const args = ["compress", ...methodArgs];
    if (opts.transform !== undefined) args.push("--transform", opts.transform);
    if (opts.strategy !== undefined) args.push("--strategy", opts.strategy);
    if (opts.svdStrategy !== undefined) args.push("--svd-strategy", opts.svdStrategy);
    if (opts.ttmVariant !== undefined) args.push("--ttm-variant", opts.ttmVariant);
    args.push("--threads", String(opts.threads ?? 1), input, output);
    const fields = parseKeyValues(await checkCli(args));
    const bytes = new Uint8Array(await readFile(output));
    return {
      bytes,
      error: parseNumber(fields.get("error"), "error"),
      ratio: parseNumber(fields.get("ratio"), "ratio"),
    };
  });
}

/** Compress to a relative error tolerance (variable per-slice ranks). */
export function tsvdm2(
  view: BoundTensorView,
  tol: number,
  opts: CompressOptions = {},
): Promise<CompressedHandle> {
  if (typeof tol !== "number" || !Number.isFinite(tol)) {
    throw new TypeError(`tolerance must be a finite number, got ${tol}`);
  }
  return compress(view, ["--method", "tsvdm2", "--tol", String(tol)], opts);
}

/** Compress keeping a uniform rank in every transformed slice. */
export function tsvdm1(
  view: BoundTensorView,
  rank: number,
  opts: CompressOptions = {},
): Promise<CompressedHandle> {
  if (!Number.isInteger(rank) || rank < 1) {
    throw new TypeError(`rank must be a positive integer, got ${rank}`);
  }
  return compress(view, ["--method", "tsvdm1", "--rank", String(rank)], opts);
}

export interface DecompressOptions {
  ttmVariant?: "batched" | "loop" | "parfor";
  threads?: number;
}

/** Expand a compressed artifact back to a dense column-major tensor. */
export function decompress(
  handle: CompressedHandle | Uint8Array,
  opts: DecompressOptions = {},
): Promise<BoundTensorView> {
  const bytes = handle instanceof Uint8Array ? handle : handle.bytes;
  if (sniffMagic(bytes) !== "compressed") {
    throw new Error("not a compressed artifact");
  }
  return withTempDir(async (dir) => {
    const input = join(dir, "input.cmp");
    const output = join(dir, "output.ten");
    await writeFile(input, bytes);
    const args = ["decompress"];
    if (opts.ttmVariant !== undefined) args.push("--ttm-variant", opts.ttmVariant);
    args.push("--threads", String(opts.threads ?? 1), input, output);
    await checkCli(args);
    const { dims, data } = decodeTensor(new Uint8Array(await readFile(output)));
    return { dims, layout: "column-major", data, converted: false };
  });
}

/** Write a compressed artifact to disk. */
export async function save(handle: CompressedHandle, path: string): Promise<void> {
  if (sniffMagic(handle.bytes) !== "compressed") {
    throw new Error("not a compressed artifact");
  }
  await writeFile(path, handle.bytes);
}

/**
 * Read a compressed artifact from disk, validating it through the
 * compressor's own reader. Loaded handles report the stored compression
 * ratio; the realized error is not recorded in the format.
 */
export async function load(path: string): Promise<CompressedHandle> {
  const bytes = new Uint8Array(await readFile(path));
  if (sniffMagic(bytes) !== "compressed") {
    throw new Error(`${path} is not a compressed artifact`);
  }
  const fields = parseKeyValues(await checkCli(["info", path]));
  if (fields.get("kind") !== "compressed") {
    throw new Error(`${path} is not a compressed artifact`);
  }
  return { bytes, ratio: parseNumber(fields.get("ratio"), "ratio") };
}
