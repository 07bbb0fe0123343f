/** Invoice entry form, submission, and the committed print view.
 *
 * The form computes an advisory preview with the same arithmetic the
 * network applies, but the network's verdict is the only one that
 * counts: an accepted invoice is rendered for print straight from the
 * committed record, and the hash shown on the document is cross-checked
 * against the anchor stored in the block that committed it. A print
 * view that cannot complete that check is never shown as valid.
 */

import type { SessionContext } from "./session.js";
import type {
  BlockResponse,
  FakturAcceptResponse,
  FakturBody,
  FakturListResponse,
  FakturRejectResponse,
  FakturRow,
  LineItemWire,
} from "./types.js";
import { computeVat, formatRupiah, type VatPreview } from "./vat.js";
import {
  checkBuyerTaxId,
  checkQuantity,
  checkSerial,
  checkTransactionDate,
  mapRejection,
  type FieldIssue,
} from "./validation.js";

export interface LineItemDraft {
  description: string;
  quantity: string;
  unitPrice: number;
}

export class InvoiceFormModel {
  nsfp = "";
  buyerTaxId = "";
  transactionDate = "";
  lineItems: LineItemDraft[] = [];

  addLine(description = "", quantity = "1", unitPrice = 0): LineItemDraft {
    const draft = { description, quantity, unitPrice };
    this.lineItems.push(draft);
    return draft;
  }

  removeLine(index: number): void {
    this.lineItems.splice(index, 1);
  }

  /** Field problems the network would also flag; empty means submittable. */
  issues(): FieldIssue[] {
    const found: FieldIssue[] = [];
    const serialIssue = checkSerial(this.nsfp);
    if (serialIssue) {
      found.push(serialIssue);
    }
    const buyerIssue = checkBuyerTaxId(this.buyerTaxId);
    if (buyerIssue) {
      found.push(buyerIssue);
    }
    const dateIssue = checkTransactionDate(this.transactionDate);
    if (dateIssue) {
      found.push(dateIssue);
    }
    if (this.lineItems.length === 0) {
      found.push({ field: "line_items", message: "at least one line item" });
    }
    for (const item of this.lineItems) {
      const qtyIssue = checkQuantity(item.quantity);
      if (qtyIssue) {
        found.push(qtyIssue);
        break;
      }
    }
    return found;
  }

  /** Advisory totals, recomputed on every keystroke. */
  preview(): VatPreview {
    return computeVat(
      this.lineItems.map((item) => ({
        quantity: item.quantity,
        unit_price: item.unitPrice,
      })),
    );
  }

  /** The exact body the gateway will hash and validate. The seller is
   * not a field; the gateway takes it from the caller's certificate. */
  buildBody(): FakturBody {
    const preview = this.preview();
    if (preview.taxBase === null) {
      throw new Error(`tax base ${preview.taxBaseText} is not whole rupiah`);
    }
    // Amounts travel as JSON integers; the wire cannot carry values the
    // double grid would distort, even though the network's own ceiling
    // is higher.
    if (preview.taxBase > BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new Error("tax base too large to encode");
    }
    const items: LineItemWire[] = this.lineItems.map((item) => ({
      description: item.description,
      quantity: item.quantity,
      unit_price: item.unitPrice,
    }));
    return {
      nsfp: this.nsfp,
      buyer_tax_id: this.buyerTaxId,
      transaction_date: this.transactionDate,
      line_items: items,
      tax_base: Number(preview.taxBase),
      vat_amount: Number(preview.vatAmount),
    };
  }
}

export type SubmitOutcome =
  | { kind: "accepted"; receipt: FakturAcceptResponse }
  | { kind: "rejected"; reasons: string[]; issues: FieldIssue[] }
  | { kind: "refused"; status: number; message: string };

export async function submitInvoice(
  session: SessionContext,
  body: FakturBody,
): Promise<SubmitOutcome> {
  const result = await session.request("POST", "/api/v1/faktur", { body });
  if (result.status === 200) {
    return { kind: "accepted", receipt: result.body as FakturAcceptResponse };
  }
  if (result.status === 409) {
    const reasons = (result.body as FakturRejectResponse).reasons;
    return { kind: "rejected", reasons, issues: mapRejection(reasons) };
  }
  return {
    kind: "refused",
    status: result.status,
    message: result.error ?? "request refused",
  };
}

export interface PrintView {
  nsfp: string;
  sellerOrg: string;
  receiverOrg: string;
  buyerTaxId: string;
  transactionDate: string;
  lineItems: LineItemWire[];
  taxBase: number;
  vatAmount: number;
  /** Hash anchored in the committing block, equal to the payload hash. */
  verificationHash: string;
  blockNumber: number;
  txId: string;
}

export type PrintOutcome =
  | { kind: "document"; view: PrintView }
  | { kind: "denied"; message: string };

export class IntegrityMismatch extends Error {}

async function fetchPartyRow(
  session: SessionContext,
  nsfp: string,
): Promise<FakturRow | { denied: string }> {
  const result = await session.request("GET", "/api/v1/faktur", {
    query: { nsfp },
  });
  if (result.status !== 200) {
    return { denied: result.error ?? `status ${result.status}` };
  }
  const rows = (result.body as FakturListResponse).fakturs;
  const row = rows.find((r) => r.nsfp === nsfp);
  if (row === undefined) {
    return { denied: `no committed invoice for ${nsfp} is visible to ${session.org}` };
  }
  return row;
}

/** Build the printable document, verifying its hash against the block
 * that committed it. */
export async function buildPrintView(
  session: SessionContext,
  nsfp: string,
): Promise<PrintOutcome> {
  const row = await fetchPartyRow(session, nsfp);
  if ("denied" in row) {
    return { kind: "denied", message: row.denied };
  }
  if (!row.payload_available || row.faktur === undefined) {
    return {
      kind: "denied",
      message: `${session.org} holds no payload for ${nsfp}`,
    };
  }
  const blockResult = await session.request(
    "GET",
    `/api/v1/blocks/${row.block_number}`,
  );
  if (blockResult.status !== 200) {
    return { kind: "denied", message: blockResult.error ?? "block unavailable" };
  }
  const block = (blockResult.body as BlockResponse).block;
  const tx = block.txs.find((t) => t.tx_id === row.tx_id);
  if (tx === undefined) {
    throw new IntegrityMismatch(
      `block ${row.block_number} does not contain tx ${row.tx_id}`,
    );
  }
  if (tx.payload_anchor.value !== row.faktur_hash) {
    throw new IntegrityMismatch(
      `anchored hash ${tx.payload_anchor.value} != reported ${row.faktur_hash}`,
    );
  }
  return {
    kind: "document",
    view: {
      nsfp: row.nsfp,
      sellerOrg: row.seller_org,
      receiverOrg: row.receiver_org,
      buyerTaxId: row.faktur.buyer_tax_id,
      transactionDate: row.faktur.transaction_date,
      lineItems: row.faktur.line_items,
      taxBase: row.faktur.tax_base,
      vatAmount: row.faktur.vat_amount,
      verificationHash: tx.payload_anchor.value,
      blockNumber: row.block_number,
      txId: row.tx_id,
    },
  };
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Static markup for the print dialog; no scripts, no external fetches. */
export function renderPrintHtml(view: PrintView): string {
  const rows = view.lineItems
    .map(
      (item) =>
        `<tr><td>${escapeHtml(item.description)}</td>` +
        `<td>${escapeHtml(item.quantity)}</td>` +
        `<td>${formatRupiah(BigInt(item.unit_price))}</td></tr>`,
    )
    .join("");
  return [
    `<article class="efaktur">`,
    `<h1>Faktur Pajak ${escapeHtml(view.nsfp)}</h1>`,
    `<p>Seller: ${escapeHtml(view.sellerOrg)}</p>`,
    `<p>Buyer tax id: ${escapeHtml(view.buyerTaxId)}</p>`,
    `<p>Date: ${escapeHtml(view.transactionDate)}</p>`,
    `<table>${rows}</table>`,
    `<p>Tax base: ${formatRupiah(BigInt(view.taxBase))}</p>`,
    `<p>VAT (11%): ${formatRupiah(BigInt(view.vatAmount))}</p>`,
    `<p class="verification">Verification: ${escapeHtml(view.verificationHash)}` +
      ` (block ${view.blockNumber})</p>`,
    `</article>`,
  ].join("\n");
}
