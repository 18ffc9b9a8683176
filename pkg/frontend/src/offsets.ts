// Gateway offsets count Unicode scalar values; DOM strings are UTF-16.
// Astral-plane characters occupy two UTF-16 units but one scalar value, so
// every offset crossing the wire goes through these converters.

/** UTF-16 index for a scalar-value index into text. */
export function scalarToUtf16(text: string, scalarIndex: number): number {
  if (scalarIndex < 0) throw new RangeError(`negative scalar index ${scalarIndex}`);
  let scalars = 0;
  let units = 0;
  for (const ch of text) {
    if (scalars === scalarIndex) return units;
    scalars += 1;
    units += ch.length;
  }
  if (scalars === scalarIndex) return units;
  throw new RangeError(`scalar index ${scalarIndex} beyond text length ${scalars}`);
}

/** Scalar-value index for a UTF-16 index into text. */
export function utf16ToScalar(text: string, utf16Index: number): number {
  if (utf16Index < 0) throw new RangeError(`negative UTF-16 index ${utf16Index}`);
  let scalars = 0;
  let units = 0;
  for (const ch of text) {
    if (units >= utf16Index) {
      if (units !== utf16Index) {
        throw new RangeError(`UTF-16 index ${utf16Index} splits a surrogate pair`);
      }
      return scalars;
    }
    scalars += 1;
    units += ch.length;
  }
  if (units === utf16Index) return scalars;
  throw new RangeError(`UTF-16 index ${utf16Index} beyond text length ${units}`);
}

/** Number of scalar values in text. */
export function scalarLength(text: string): number {
  let n = 0;
  for (const _ of text) n += 1;
  return n;
}

/** Slice text by scalar-value offsets (end exclusive). */
export function scalarSlice(text: string, start: number, end: number): string {
  return text.slice(scalarToUtf16(text, start), scalarToUtf16(text, end));
}
