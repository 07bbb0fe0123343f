/** Serial-number request flow and the picker fed by it.
 *
 * A taxpayer asks the authority for a batch of serial numbers, then
 * issues invoices against individual serials. The picker only offers
 * serials the ledger still reports as available; a serial consumed in
 * another session disappears on the next refresh.
 */

import type { SessionContext } from "./session.js";
import type { Allocation, NsfpGrantResponse, NsfpListResponse } from "./types.js";

export class RequestFailed extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export interface PickerEntry {
  serial: string;
  taxYear: number;
  allocationId: string;
}

export async function requestSerials(
  session: SessionContext,
  taxYear: number,
  count: number,
): Promise<NsfpGrantResponse> {
  const result = await session.request("POST", "/api/v1/nsfp", {
    body: { count, tax_year: taxYear },
  });
  if (result.status !== 200) {
    throw new RequestFailed(result.status, result.error ?? "allocation refused");
  }
  return result.body as NsfpGrantResponse;
}

export async function listAllocations(
  session: SessionContext,
  query: Record<string, string> = {},
): Promise<Allocation[]> {
  const result = await session.request("GET", "/api/v1/nsfp", { query });
  if (result.status !== 200) {
    throw new RequestFailed(result.status, result.error ?? "listing refused");
  }
  return (result.body as NsfpListResponse).allocations;
}

/** Serials the operator can still write an invoice against. */
export function availableSerials(allocations: readonly Allocation[]): PickerEntry[] {
  const entries: PickerEntry[] = [];
  for (const allocation of allocations) {
    for (const serial of allocation.serials) {
      if (allocation.status[serial] === "available") {
        entries.push({
          serial,
          taxYear: allocation.tax_year,
          allocationId: allocation.allocation_id,
        });
      }
    }
  }
  entries.sort((a, b) => (a.serial < b.serial ? -1 : a.serial > b.serial ? 1 : 0));
  return entries;
}
