/** Wire shapes exchanged with a fakturchain gateway.
 *
 * Every hash and identifier travels as lowercase hex; the console never
 * handles raw bytes. Amounts are integer rupiah, quantities canonical
 * decimal strings; arithmetic on them happens in BigInt, never floats.
 */

export type Role = "pkp" | "djp" | "orderer";

export type HttpMethod = "GET" | "POST" | "PUT";

export interface OrgRef {
  name: string;
  role: Role;
  cert_id: string;
}

export interface ApiResult {
  status: number;
  body: unknown;
  block_number: number | null;
  error: string | null;
}

export interface LineItemWire {
  description: string;
  quantity: string;
  unit_price: number;
}

export interface FakturBody {
  nsfp: string;
  buyer_tax_id: string;
  transaction_date: string;
  line_items: LineItemWire[];
  tax_base: number;
  vat_amount: number;
}

export type SerialStatus = "available" | "used" | "revoked";

export interface Allocation {
  allocation_id: string;
  owner_org: string;
  tax_year: number;
  serials: string[];
  status: Record<string, SerialStatus>;
  issued_tx_id: string;
}

export interface NsfpListResponse {
  allocations: Allocation[];
}

export interface NsfpGrantResponse {
  allocation_id: string;
  block_number: number;
  serials: string[];
  tx_id: string;
}

export interface FakturAcceptResponse {
  anchored_hash: string;
  block_number: number;
  nsfp: string;
  tx_id: string;
}

export interface FakturRejectResponse {
  reasons: string[];
}

export interface FakturRow {
  nsfp: string;
  faktur_hash: string;
  seller_org: string;
  receiver_org: string;
  tx_id: string;
  block_number: number;
  payload_available: boolean;
  faktur?: FakturBody;
}

export interface FakturListResponse {
  fakturs: FakturRow[];
}

export interface TxVisibility {
  kind: "broadcast" | "private";
  parties: string[];
}

export interface PayloadAnchor {
  kind: string;
  value: string;
}

export interface TxWire {
  tx_id: string;
  tx_type: string;
  creator_cert_id: string;
  nonce: number;
  created_at: number;
  visibility: TxVisibility;
  payload_anchor: PayloadAnchor;
  body: unknown;
  signature: string;
}

export interface BlockWire {
  number: number;
  prev_hash: string;
  data_hash: string;
  committed_term: number;
  committed_at: number;
  txs: TxWire[];
}

export interface BlockResponse {
  block: BlockWire;
  block_hash: string;
  state_hash: string;
}

export interface ApiEvent {
  sequence: number;
  tx_id: string;
  kind: string;
  visibility: TxVisibility;
  status: "accepted" | "rejected";
  detail: Record<string, unknown>;
}

export interface EventsResponse {
  events: ApiEvent[];
  head_sequence: number;
}

export interface OrgProfile {
  display_name: string;
  address: string;
  tax_id: string;
  endpoint: string;
}

export interface ProfileResponse {
  profile: OrgProfile;
}
