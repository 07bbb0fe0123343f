import { describe, expect, it } from "vitest";

import { EventFeed, allAllocations, allFakturs, revokeCertificate, revokedCerts } from "../src/audit.js";
import {
  InvoiceFormModel,
  buildPrintView,
  renderPrintHtml,
  submitInvoice,
} from "../src/invoice.js";
import { RequestFailed, availableSerials, listAllocations, requestSerials } from "../src/nsfp.js";
import { saveProfile } from "../src/profile.js";
import type { FakturBody, OrgProfile } from "../src/types.js";
import { openConsole } from "./helpers.js";

const SERIAL = "010.000.25.00000001";

function recordedFakturBody(console: ReturnType<typeof openConsole>, status: number): FakturBody {
  const exchange = console.fixture.exchanges.find(
    (e) =>
      e.method === "POST" &&
      e.path === "/api/v1/faktur" &&
      e.response.status === status,
  );
  expect(exchange).toBeDefined();
  return exchange!.body as FakturBody;
}

describe("taxpayer invoice flow", () => {
  it("requests serials, enters an invoice, and prints a verified document", async () => {
    const console = openConsole();
    const seller = console.session("pkp-01");

    const profile: OrgProfile = {
      display_name: "PT Sinar Niaga",
      address: "Jl. Sudirman 12, Jakarta",
      tax_id: "012345678901234",
      endpoint: "gw://pkp-01",
    };
    const saved = await saveProfile(seller, profile);
    expect(saved).toEqual({ kind: "saved", profile });

    const grant = await requestSerials(seller, 25, 5);
    expect(grant.serials).toHaveLength(5);
    expect(grant.serials[0]).toBe(SERIAL);

    const allocations = await listAllocations(seller, {
      owner: "pkp-01",
      tax_year: "25",
    });
    const picker = availableSerials(allocations);
    expect(picker.length).toBeGreaterThanOrEqual(5);
    expect(picker[0]!.serial).toBe(SERIAL);

    // Re-enter the recorded invoice through the form model; the body it
    // builds must be byte-equal to what the gateway accepted.
    const recorded = recordedFakturBody(console, 200);
    const form = new InvoiceFormModel();
    form.nsfp = picker[0]!.serial;
    form.buyerTaxId = recorded.buyer_tax_id;
    form.transactionDate = recorded.transaction_date;
    for (const item of recorded.line_items) {
      form.addLine(item.description, item.quantity, item.unit_price);
    }
    expect(form.issues()).toEqual([]);

    const preview = form.preview();
    expect(preview.taxBase).toBe(BigInt(recorded.tax_base));
    expect(preview.vatAmount).toBe(BigInt(recorded.vat_amount));
    expect(form.buildBody()).toEqual(recorded);

    const outcome = await submitInvoice(seller, form.buildBody());
    expect(outcome.kind).toBe("accepted");
    if (outcome.kind !== "accepted") {
      return;
    }
    expect(outcome.receipt.nsfp).toBe(SERIAL);

    // The print view re-reads the committed record and cross-checks its
    // hash against the anchor in the block that committed it.
    const printed = await buildPrintView(seller, SERIAL);
    expect(printed.kind).toBe("document");
    if (printed.kind !== "document") {
      return;
    }
    expect(printed.view.verificationHash).toBe(outcome.receipt.anchored_hash);
    expect(printed.view.blockNumber).toBe(outcome.receipt.block_number);
    expect(printed.view.taxBase).toBe(recorded.tax_base);

    const html = renderPrintHtml(printed.view);
    expect(html).toContain(outcome.receipt.anchored_hash);
    expect(html).toContain(SERIAL);
    expect(html).toContain("Rp 5.000");
  });

  it("maps an arithmetic rejection onto the VAT field", async () => {
    const console = openConsole();
    const seller = console.session("pkp-01");
    const bad = recordedFakturBody(console, 409);
    expect(bad.vat_amount).not.toBe((bad.tax_base * 11) / 100);

    const outcome = await submitInvoice(seller, bad);
    expect(outcome.kind).toBe("rejected");
    if (outcome.kind !== "rejected") {
      return;
    }
    expect(outcome.reasons).toEqual(["arithmetic"]);
    expect(outcome.issues).toEqual([
      { field: "vat_amount", message: "amounts do not match the exact computation" },
    ]);
  });

  it("flags an empty form before any network round trip", () => {
    const form = new InvoiceFormModel();
    const fields = form.issues().map((issue) => issue.field);
    expect(fields).toContain("nsfp");
    expect(fields).toContain("buyer_tax_id");
    expect(fields).toContain("transaction_date");
    expect(fields).toContain("line_items");
  });
});

describe("access denial", () => {
  it("renders a denied state for a non-party taxpayer", async () => {
    const console = openConsole();
    const bystander = console.session("pkp-02");
    const printed = await buildPrintView(bystander, SERIAL);
    expect(printed.kind).toBe("denied");
    if (printed.kind !== "denied") {
      return;
    }
    expect(printed.message).toContain(SERIAL);
    expect(printed.message).toContain("pkp-02");
  });

  it("surfaces a revoked certificate as a refused request", async () => {
    const console = openConsole();
    const victim = console.session("pkp-03");
    // Replay the victim's pre-revocation activity first; the recording
    // continues with the same request refused after revocation.
    for (let i = 0; i < 3; i += 1) {
      await requestSerials(victim, 25, 2);
    }
    const refusal: unknown = await requestSerials(victim, 25, 1).then(
      () => null,
      (err: unknown) => err,
    );
    expect(refusal).toBeInstanceOf(RequestFailed);
    expect((refusal as RequestFailed).status).toBe(401);
    expect((refusal as RequestFailed).message).toBe("certificate revoked");
  });
});

describe("authority audit view", () => {
  it("sees every allocation and reflects a revocation within one feed update", async () => {
    const console = openConsole();
    const authority = console.session("djp");

    const allocations = await allAllocations(authority);
    expect(allocations).toHaveLength(10);
    const owners = new Set(allocations.map((a) => a.owner_org));
    expect(owners).toEqual(new Set(["pkp-01", "pkp-02", "pkp-03"]));

    const fakturs = await allFakturs(authority);
    expect(fakturs).toHaveLength(1);
    expect(fakturs[0]!.payload_available).toBe(true);

    const feed = new EventFeed(authority);
    const backlog = await feed.update();
    expect(backlog.length).toBeGreaterThanOrEqual(10);
    expect(revokedCerts(feed.events).size).toBe(0);

    const receipt = await revokeCertificate(
      authority,
      console.fixture.revoked_cert_id,
      "credential reported stolen",
    );
    expect(receipt.blockNumber).toBeGreaterThan(0);

    // One update, not several, must surface the revocation.
    const fresh = await feed.update();
    const revocation = fresh.find((event) => event.kind === "revoke_cert");
    expect(revocation).toBeDefined();
    expect(revocation!.status).toBe("accepted");
    expect(revocation!.tx_id).toBe(receipt.txId);
    expect(revokedCerts(feed.events)).toEqual(
      new Set([console.fixture.revoked_cert_id]),
    );
  });
});

describe("profile settings", () => {
  it("rejects a malformed tax id with the gateway's reason", async () => {
    const console = openConsole();
    const seller = console.session("pkp-01");
    const outcome = await saveProfile(seller, {
      display_name: "PT Sinar Niaga",
      address: "Jl. Sudirman 12, Jakarta",
      tax_id: "12345",
      endpoint: "gw://pkp-01",
    });
    expect(outcome).toEqual({
      kind: "invalid",
      reasons: ["tax-id-format"],
      message: "tax id must be 15-16 digits",
    });
  });
});
