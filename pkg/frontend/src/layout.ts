export type Layout = "column-major" | "row-major";

export function checkDims(dims: readonly number[]): number {
  if (dims.length === 0) throw new Error("dims must not be empty");
  let size = 1;
  for (const d of dims) {
    if (!Number.isInteger(d) || d <= 0) {
      throw new Error(`dims must be positive integers, got ${d}`);
    }
    size *= d;
  }
  if (!Number.isSafeInteger(size)) throw new Error("tensor size overflows");
  return size;
}

/** Per-mode element strides for the given layout. */
export function strides(dims: readonly number[], layout: Layout): number[] {
  const n = dims.length;
  const out = new Array<number>(n);
  if (layout === "column-major") {
    let acc = 1;
    for (let k = 0; k < n; k++) {
      out[k] = acc;
      acc *= dims[k];
    }
  } else {
    let acc = 1;
    for (let k = n - 1; k >= 0; k--) {
      out[k] = acc;
      acc *= dims[k];
    }
  }
  return out;
}

function permute(src: Float64Array, dims: readonly number[], srcLayout: Layout): Float64Array {
  const size = checkDims(dims);
  if (src.length !== size) {
    throw new Error(`expected ${size} elements for dims ${dims.join("x")}, got ${src.length}`);
  }
  const n = dims.length;
  const srcStrides = strides(dims, srcLayout);
  const dst = new Float64Array(size);
  // walk destination offsets in order, first mode fastest, with an odometer
  const idx = new Array<number>(n).fill(0);
  const dstIsColumn = srcLayout === "row-major";
  const dstStrides = strides(dims, dstIsColumn ? "column-major" : "row-major");
  for (let i = 0; i < size; i++) {
    let s = 0;
    let d = 0;
    for (let k = 0; k < n; k++) {
      s += idx[k] * srcStrides[k];
      d += idx[k] * dstStrides[k];
    }
    dst[d] = src[s];
    for (let k = 0; k < n; k++) {
      if (++idx[k] < dims[k]) break;
      idx[k] = 0;
    }
  }
  return dst;
}

/** Copy a row-major buffer into column-major order. */
export function rowMajorToColumnMajor(src: Float64Array, dims: readonly number[]): Float64Array {
  return permute(src, dims, "row-major");
}

/** Copy a column-major buffer into row-major order. */
export function columnMajorToRowMajor(src: Float64Array, dims: readonly number[]): Float64Array {
  return permute(src, dims, "column-major");
}
