import { describe, expect, it } from "vitest";

import {
  VatError,
  computeVat,
  formatRupiah,
  parseQuantity,
} from "../src/vat.js";

describe("parseQuantity", () => {
  it("accepts canonical decimals", () => {
    expect(parseQuantity("0")).toEqual({ num: 0n, scale: 0 });
    expect(parseQuantity("1")).toEqual({ num: 1n, scale: 0 });
    expect(parseQuantity("12.5")).toEqual({ num: 125n, scale: 1 });
    expect(parseQuantity("0.004")).toEqual({ num: 4n, scale: 3 });
    expect(parseQuantity("1.000001")).toEqual({ num: 1000001n, scale: 6 });
  });

  it("rejects every non-canonical spelling", () => {
    for (const bad of ["", "01", "1.", ".5", "1.50", "-1", "+1", "1e3", " 1", "1 "]) {
      expect(() => parseQuantity(bad), bad).toThrow(VatError);
    }
  });

  it("rejects oversized strings", () => {
    expect(() => parseQuantity("1".repeat(25))).toThrow(VatError);
    expect(parseQuantity("1".repeat(24)).scale).toBe(0);
  });
});

describe("computeVat", () => {
  // Expected values were produced by the network's own chaincode for
  // the same line items; the client must agree digit for digit.
  const cases: {
    items: { quantity: string; unit_price: number }[];
    text: string;
    base: bigint | null;
    vat: bigint;
  }[] = [
    { items: [{ quantity: "1", unit_price: 5000 }], text: "5000", base: 5000n, vat: 550n },
    { items: [{ quantity: "0.5", unit_price: 99 }], text: "49.5", base: null, vat: 5n },
    { items: [{ quantity: "1", unit_price: 50 }], text: "50", base: 50n, vat: 6n },
    { items: [{ quantity: "1", unit_price: 150 }], text: "150", base: 150n, vat: 17n },
    { items: [{ quantity: "1", unit_price: 49 }], text: "49", base: 49n, vat: 5n },
    {
      items: [
        { quantity: "2.5", unit_price: 1999 },
        { quantity: "0.004", unit_price: 250 },
      ],
      text: "4998.5",
      base: null,
      vat: 550n,
    },
    {
      items: [
        { quantity: "3", unit_price: 333 },
        { quantity: "0.25", unit_price: 4 },
      ],
      text: "1000",
      base: 1000n,
      vat: 110n,
    },
    { items: [{ quantity: "0", unit_price: 77 }], text: "0", base: 0n, vat: 0n },
    { items: [{ quantity: "0.125", unit_price: 8 }], text: "1", base: 1n, vat: 0n },
    { items: [], text: "0", base: 0n, vat: 0n },
  ];

  for (const { items, text, base, vat } of cases) {
    it(`agrees with the chaincode for ${JSON.stringify(items)}`, () => {
      const preview = computeVat(items);
      expect(preview.taxBaseText).toBe(text);
      expect(preview.taxBase).toBe(base);
      expect(preview.vatAmount).toBe(vat);
    });
  }

  it("rounds half-up, never banker's", () => {
    // 11% of 50 is 5.5; half-even would give 5.
    expect(computeVat([{ quantity: "1", unit_price: 50 }]).vatAmount).toBe(6n);
    // 11% of 150 is 16.5; half-even would also give 16.
    expect(computeVat([{ quantity: "1", unit_price: 150 }]).vatAmount).toBe(17n);
  });

  it("rejects prices outside the currency grid", () => {
    expect(() => computeVat([{ quantity: "1", unit_price: -1 }])).toThrow(VatError);
    expect(() => computeVat([{ quantity: "1", unit_price: 0.5 }])).toThrow(VatError);
    expect(() => computeVat([{ quantity: "1", unit_price: 1e18 }])).toThrow(VatError);
  });

  it("rejects a tax base at or above 10^18", () => {
    const big = Number(10n ** 17n);
    const items = Array.from({ length: 10 }, () => ({
      quantity: "1",
      unit_price: big,
    }));
    expect(() => computeVat(items)).toThrow("tax base exceeds");
  });
});

describe("formatRupiah", () => {
  it("groups digits Indonesian style", () => {
    expect(formatRupiah(0n)).toBe("Rp 0");
    expect(formatRupiah(550n)).toBe("Rp 550");
    expect(formatRupiah(1234567n)).toBe("Rp 1.234.567");
    expect(formatRupiah(1000000000n)).toBe("Rp 1.000.000.000");
  });
});
