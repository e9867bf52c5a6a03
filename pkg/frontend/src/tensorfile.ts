import { checkDims } from "./layout";

export const TENSOR_MAGIC = "STARMTEN";
export const COMPRESSED_MAGIC = "STARMCMP";
const VERSION = 1;
const DTYPE_FLOAT64 = 0;
const MAX_MODES = 64;

export interface DecodedTensor {
  dims: number[];
  data: Float64Array;
}

function magicOf(bytes: Uint8Array): string {
  let out = "";
  for (let i = 0; i < 8 && i < bytes.length; i++) out += String.fromCharCode(bytes[i]);
  return out;
}

export function sniffMagic(bytes: Uint8Array): "tensor" | "compressed" | "unknown" {
  const magic = magicOf(bytes);
  if (magic === TENSOR_MAGIC) return "tensor";
  if (magic === COMPRESSED_MAGIC) return "compressed";
  return "unknown";
}

/** Serialize a column-major float64 buffer to raw tensor file bytes. */
export function encodeTensor(data: Float64Array, dims: readonly number[]): Uint8Array {
  const size = checkDims(dims);
  if (data.length !== size) {
    throw new Error(`expected ${size} elements for dims ${dims.join("x")}, got ${data.length}`);
  }
  if (dims.length > MAX_MODES) throw new Error(`too many modes: ${dims.length}`);
  const headerBytes = 8 + 1 + 1 + 4 + 8 * dims.length;
  const buf = new ArrayBuffer(headerBytes + 8 * size);
  const view = new DataView(buf);
  for (let i = 0; i < 8; i++) view.setUint8(i, TENSOR_MAGIC.charCodeAt(i));
  view.setUint8(8, VERSION);
  view.setUint8(9, DTYPE_FLOAT64);
  view.setUint32(10, dims.length, true);
  for (let k = 0; k < dims.length; k++) {
    view.setBigUint64(14 + 8 * k, BigInt(dims[k]), true);
  }
  // the header is not 8-aligned, so the payload goes through the DataView
  for (let i = 0; i < size; i++) {
    view.setFloat64(headerBytes + 8 * i, data[i], true);
  }
  return new Uint8Array(buf);
}

/** Parse raw tensor file bytes into dims and a column-major buffer. */
export function decodeTensor(bytes: Uint8Array): DecodedTensor {
  if (bytes.length < 14) throw new Error("truncated tensor file");
  if (magicOf(bytes) !== TENSOR_MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(magicOf(bytes))}`);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const version = view.getUint8(8);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const dtype = view.getUint8(9);
  if (dtype !== DTYPE_FLOAT64) throw new Error(`unsupported dtype code ${dtype}`);
  const ndim = view.getUint32(10, true);
  if (ndim < 1 || ndim > MAX_MODES) throw new Error(`bad mode count ${ndim}`);
  if (bytes.length < 14 + 8 * ndim) throw new Error("truncated tensor file");
  const dims: number[] = [];
  for (let k = 0; k < ndim; k++) {
    const d = view.getBigUint64(14 + 8 * k, true);
    if (d <= 0n || d > BigInt(Number.MAX_SAFE_INTEGER)) throw new Error(`bad extent ${d}`);
    dims.push(Number(d));
  }
  const size = checkDims(dims);
  const headerBytes = 14 + 8 * ndim;
  if (bytes.length !== headerBytes + 8 * size) {
    throw new Error(`expected ${headerBytes + 8 * size} bytes, file has ${bytes.length}`);
  }
  const data = new Float64Array(size);
  for (let i = 0; i < size; i++) {
    data[i] = view.getFloat64(headerBytes + 8 * i, true);
  }
  return { dims, data };
}
