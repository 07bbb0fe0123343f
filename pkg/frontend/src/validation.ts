/** Form-level checks and mapping of server rejection reasons to fields.
 *
 * The console flags only what the network itself would reject; there is
 * deliberately no client-only rule, so a form that passes here can still
 * be refused by the chaincode but never the other way around for the
 * same rule set. Server reasons are the short codes the chaincode
 * records with each rejection.
 */

import { VatError, parseQuantity } from "./vat.js";

export const SERIAL_RE = /^(\d{2})(\d)\.(\d{3})\.(\d{2})\.(\d{8})$/;
export const DATE_RE = /^\d{4}-\d{2}-\d{2}$/;
export const TAX_ID_RE = /^[0-9]{15,16}$/;

export type FieldName =
  | "nsfp"
  | "buyer_tax_id"
  | "transaction_date"
  | "line_items"
  | "vat_amount"
  | "form";

export interface FieldIssue {
  field: FieldName;
  message: string;
}

export function checkSerial(serial: string): FieldIssue | null {
  if (!SERIAL_RE.test(serial)) {
    return { field: "nsfp", message: "serial must look like 010.000.YY.NNNNNNNN" };
  }
  return null;
}

/** Invoice-level rule: the chaincode requires only a non-empty buyer id. */
export function checkBuyerTaxId(taxId: string): FieldIssue | null {
  if (taxId.length === 0) {
    return { field: "buyer_tax_id", message: "buyer tax id is required" };
  }
  return null;
}

/** Profile-level rule, identical to the gateway's. */
export function checkProfileTaxId(taxId: string): string | null {
  if (!TAX_ID_RE.test(taxId)) {
    return "tax id must be 15-16 digits";
  }
  return null;
}

export function checkTransactionDate(text: string): FieldIssue | null {
  if (!DATE_RE.test(text)) {
    return { field: "transaction_date", message: "date must be YYYY-MM-DD" };
  }
  const parsed = new Date(text + "T00:00:00Z");
  if (Number.isNaN(parsed.getTime()) || parsed.toISOString().slice(0, 10) !== text) {
    return { field: "transaction_date", message: `no such date: ${text}` };
  }
  return null;
}

export function checkQuantity(text: string): FieldIssue | null {
  try {
    parseQuantity(text);
  } catch (err) {
    if (err instanceof VatError) {
      return {
        field: "line_items",
        message: "quantity must be a plain decimal with no trailing zeros",
      };
    }
    throw err;
  }
  return null;
}

/** Where each chaincode rejection reason should surface in the form. */
const REASON_FIELDS: Record<string, FieldName> = {
  ownership: "nsfp",
  duplicate: "nsfp",
  revoked: "nsfp",
  year: "transaction_date",
  items: "line_items",
  arithmetic: "vat_amount",
  format: "form",
  hash: "form",
};

const REASON_MESSAGES: Record<string, string> = {
  ownership: "this serial belongs to another taxpayer",
  duplicate: "this serial already carries a committed invoice",
  revoked: "this serial has been revoked",
  year: "transaction date falls outside the serial's tax year",
  items: "line items are missing or malformed",
  arithmetic: "amounts do not match the exact computation",
  format: "the invoice is structurally malformed",
  hash: "the payload hash does not match the invoice body",
};

export function mapRejection(reasons: readonly string[]): FieldIssue[] {
  return reasons.map((reason) => ({
    field: REASON_FIELDS[reason] ?? "form",
    message: REASON_MESSAGES[reason] ?? `rejected: ${reason}`,
  }));
}
