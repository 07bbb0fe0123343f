/** Client-side mirror of the network's VAT arithmetic.
 *
 * The preview shown while an operator types an invoice must agree with
 * what the chaincode will compute, or the form would steer users into
 * rejections. Both sides therefore use the same exact scaled-integer
 * scheme: a quantity string parses to numerator / 10^scale, the tax
 * base is the exact sum of quantity x unit price, and VAT rounds
 * half-up to whole rupiah. The preview stays advisory; the committed
 * values are whatever the network validated.
 */

export const CURRENCY_LIMIT = 10n ** 18n;
export const RATE_NUM = 11n;
export const RATE_DEN = 100n;

const QUANTITY_RE = /^(0|[1-9][0-9]*)(?:\.([0-9]*[1-9]))?$/;

export class VatError extends Error {}

export interface ScaledQuantity {
  num: bigint;
  scale: number;
}

/** Parse a canonical decimal string: no sign, no leading zeros, no
 * trailing fractional zeros, at most 24 characters. */
export function parseQuantity(text: string): ScaledQuantity {
  if (text.length > 24) {
    throw new VatError(`bad quantity: ${JSON.stringify(text)}`);
  }
  const match = QUANTITY_RE.exec(text);
  if (match === null) {
    throw new VatError(`bad quantity: ${JSON.stringify(text)}`);
  }
  const whole = match[1]!;
  const frac = match[2] ?? "";
  return { num: BigInt(whole + frac), scale: frac.length };
}

export interface LineInput {
  quantity: string;
  unit_price: number;
}

export interface VatPreview {
  /** Exact tax base as a decimal string, e.g. "1999.5". */
  taxBaseText: string;
  /** Whole-rupiah tax base when the exact base is integral, else null. */
  taxBase: bigint | null;
  /** Half-up-rounded integer VAT on the exact base. */
  vatAmount: bigint;
}

function decimalText(num: bigint, scale: number): string {
  const digits = num.toString().padStart(scale + 1, "0");
  if (scale === 0) {
    return digits;
  }
  const whole = digits.slice(0, -scale);
  const frac = digits.slice(-scale).replace(/0+$/, "");
  return frac.length > 0 ? `${whole}.${frac}` : whole;
}

export function computeVat(items: readonly LineInput[]): VatPreview {
  let totalNum = 0n;
  let totalScale = 0;
  for (const item of items) {
    if (!Number.isInteger(item.unit_price) || item.unit_price < 0) {
      throw new VatError(`bad unit price: ${item.unit_price}`);
    }
    const price = BigInt(item.unit_price);
    if (price >= CURRENCY_LIMIT) {
      throw new VatError(`unit price ${item.unit_price}`);
    }
    const qty = parseQuantity(item.quantity);
    const num = qty.num * price;
    if (qty.scale > totalScale) {
      totalNum *= 10n ** BigInt(qty.scale - totalScale);
      totalScale = qty.scale;
    }
    totalNum += num * 10n ** BigInt(totalScale - qty.scale);
  }
  const scaleFactor = 10n ** BigInt(totalScale);
  if (totalNum >= CURRENCY_LIMIT * scaleFactor) {
    throw new VatError("tax base exceeds 18-digit currency magnitude");
  }
  const denominator = RATE_DEN * scaleFactor;
  const vat = (2n * totalNum * RATE_NUM + denominator) / (2n * denominator);
  if (vat >= CURRENCY_LIMIT) {
    throw new VatError("vat exceeds 18-digit currency magnitude");
  }
  const integral = totalNum % scaleFactor === 0n;
  return {
    taxBaseText: decimalText(totalNum, totalScale),
    taxBase: integral ? totalNum / scaleFactor : null,
    vatAmount: vat,
  };
}

/** Group digits for display: 1234567 -> "1.234.567" (Indonesian style). */
export function formatRupiah(amount: bigint): string {
  const digits = amount.toString();
  const groups: string[] = [];
  for (let end = digits.length; end > 0; end -= 3) {
    groups.unshift(digits.slice(Math.max(0, end - 3), end));
  }
  return `Rp ${groups.join(".")}`;
}
