import { describe, expect, it } from "vitest";
import {
  scalarLength,
  scalarToUtf16,
  utf16OffsetIn,
  utf16ToScalar,
} from "../src/offsets.js";

// 🜁 is an astral code point: one scalar, two UTF-16 units.
const MIXED = "ab🜁cé🜁f";

describe("scalar and UTF-16 conversion", () => {
  it("counts scalars, not UTF-16 units", () => {
    expect("🜁".length).toBe(2);
    expect(scalarLength("🜁")).toBe(1);
    expect(scalarLength(MIXED)).toBe(7);
    expect(MIXED.length).toBe(9);
    expect(scalarLength("")).toBe(0);
  });

  it("maps scalar offsets to UTF-16 offsets", () => {
    expect(scalarToUtf16(MIXED, 0)).toBe(0);
    expect(scalarToUtf16(MIXED, 2)).toBe(2);
    expect(scalarToUtf16(MIXED, 3)).toBe(4); // past the first astral char
    expect(scalarToUtf16(MIXED, 5)).toBe(6); // é is a single unit
    expect(scalarToUtf16(MIXED, 7)).toBe(9);
    expect(scalarToUtf16(MIXED, 99)).toBe(9); // clamps at end
  });

  it("maps UTF-16 offsets to scalar offsets", () => {
    expect(utf16ToScalar(MIXED, 0)).toBe(0);
    expect(utf16ToScalar(MIXED, 2)).toBe(2);
    expect(utf16ToScalar(MIXED, 4)).toBe(3);
    expect(utf16ToScalar(MIXED, 9)).toBe(7);
  });

  it("snaps an offset inside a surrogate pair down to the boundary", () => {
    expect(utf16ToScalar(MIXED, 3)).toBe(2);
  });

  it("round-trips every scalar boundary", () => {
    for (let s = 0; s <= scalarLength(MIXED); s += 1) {
      expect(utf16ToScalar(MIXED, scalarToUtf16(MIXED, s))).toBe(s);
    }
  });

  it("round-trips every valid UTF-16 boundary", () => {
    for (let u = 0; u <= MIXED.length; u += 1) {
      const s = utf16ToScalar(MIXED, u);
      const back = scalarToUtf16(MIXED, s);
      // back === u except when u split a surrogate pair.
      if (back !== u) {
        expect(back).toBe(u - 1);
      }
    }
  });
});

describe("utf16OffsetIn", () => {
  it("measures a point inside nested nodes against the container text", () => {
    const container = document.createElement("div");
    const a = document.createTextNode("one ");
    const wrap = document.createElement("span");
    const b = document.createTextNode("two");
    wrap.appendChild(b);
    const c = document.createTextNode(" three");
    container.append(a, wrap, c);

    expect(container.textContent).toBe("one two three");
    expect(utf16OffsetIn(container, a, 0)).toBe(0);
    expect(utf16OffsetIn(container, a, 4)).toBe(4);
    expect(utf16OffsetIn(container, b, 0)).toBe(4);
    expect(utf16OffsetIn(container, b, 3)).toBe(7);
    expect(utf16OffsetIn(container, c, 6)).toBe(13);
  });
});
