/** Authority-side audit view: allocations, committed invoices, the
 * event feed, and certificate revocation.
 *
 * The feed is pull-based. Each update asks for everything after the
 * last sequence it has seen, so a reconnect after a gap resumes from
 * the stored cursor and never misses or duplicates an event.
 */

import type { SessionContext } from "./session.js";
import type {
  Allocation,
  ApiEvent,
  EventsResponse,
  FakturListResponse,
  FakturRow,
  NsfpListResponse,
} from "./types.js";
import { RequestFailed } from "./nsfp.js";

export async function allAllocations(session: SessionContext): Promise<Allocation[]> {
  const result = await session.request("GET", "/api/v1/nsfp");
  if (result.status !== 200) {
    throw new RequestFailed(result.status, result.error ?? "listing refused");
  }
  return (result.body as NsfpListResponse).allocations;
}

export async function allFakturs(session: SessionContext): Promise<FakturRow[]> {
  const result = await session.request("GET", "/api/v1/faktur");
  if (result.status !== 200) {
    throw new RequestFailed(result.status, result.error ?? "listing refused");
  }
  return (result.body as FakturListResponse).fakturs;
}

export class EventFeed {
  readonly events: ApiEvent[] = [];
  private nextFrom = 0;

  constructor(private readonly session: SessionContext) {}

  get cursor(): number {
    return this.nextFrom;
  }

  /** Pull everything committed since the last update; returns only the
   * newly arrived events. */
  async update(): Promise<ApiEvent[]> {
    const result = await this.session.request("GET", "/api/v1/events", {
      query: { from: String(this.nextFrom) },
    });
    if (result.status !== 200) {
      throw new RequestFailed(result.status, result.error ?? "feed refused");
    }
    const body = result.body as EventsResponse;
    this.events.push(...body.events);
    this.nextFrom = Math.max(this.nextFrom, body.head_sequence + 1);
    return body.events;
  }
}

export interface RevocationReceipt {
  txId: string;
  blockNumber: number;
}

export async function revokeCertificate(
  session: SessionContext,
  certId: string,
  reason: string,
): Promise<RevocationReceipt> {
  const result = await session.request("POST", "/api/v1/admin/revoke", {
    body: { cert_id: certId, reason },
  });
  if (result.status !== 200) {
    throw new RequestFailed(result.status, result.error ?? "revocation refused");
  }
  const body = result.body as { tx_id: string; block_number: number };
  return { txId: body.tx_id, blockNumber: body.block_number };
}

/** Cert ids whose revocation has appeared in the feed so far. */
export function revokedCerts(events: readonly ApiEvent[]): Set<string> {
  const revoked = new Set<string>();
  for (const event of events) {
    if (event.kind === "revoke_cert" && event.status === "accepted") {
      const certId = event.detail["cert_id"];
      if (typeof certId === "string") {
        revoked.add(certId);
      }
    }
  }
  return revoked;
}
