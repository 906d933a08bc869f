// The server stores span offsets in Unicode scalar values; the DOM hands
// out UTF-16 code unit offsets. Everything that crosses the wire goes
// through these converters.

export const scalarLength = (text: string): number => {
  let count = 0;
  for (const _ of text) count += 1;
  return count;
};

export const scalarToUtf16 = (text: string, scalar: number): number => {
  let units = 0;
  let count = 0;
  for (const ch of text) {
    if (count >= scalar) break;
    units += ch.length;
    count += 1;
  }
  return units;
};

export const utf16ToScalar = (text: string, units: number): number => {
  // An offset inside a surrogate pair snaps down to the scalar boundary.
  let pos = 0;
  let count = 0;
  for (const ch of text) {
    if (pos + ch.length > units) break;
    pos += ch.length;
    count += 1;
  }
  return count;
};

// UTF-16 offset of (node, offset) measured from the start of container's
// text content.
export const utf16OffsetIn = (
  container: Node,
  node: Node,
  offset: number
): number => {
  const doc = container.ownerDocument;
  if (!doc) return 0;
  const range = doc.createRange();
  range.selectNodeContents(container);
  range.setEnd(node, offset);
  return range.toString().length;
};
