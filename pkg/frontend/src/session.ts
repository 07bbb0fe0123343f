/** Operator session and role-derived capabilities.
 *
 * The capability set is derived from the role exactly as the network's
 * own authorization matrix derives it. The console uses it only to
 * decide what to render; every action is still authorized server-side,
 * so a forged client gains nothing.
 */

import type { Backend, RequestOptions } from "./backend.js";
import type { ApiResult, HttpMethod, Role } from "./types.js";

export type Capability =
  | "post_nsfp"
  | "post_faktur"
  | "get_nsfp"
  | "get_faktur"
  | "revoke"
  | "admin";

const CAPABILITIES: Record<Role, readonly Capability[]> = {
  pkp: ["post_nsfp", "post_faktur", "get_nsfp", "get_faktur"],
  djp: ["get_nsfp", "get_faktur", "revoke", "admin"],
  orderer: [],
};

export function capabilitiesFor(role: Role): ReadonlySet<Capability> {
  return new Set(CAPABILITIES[role]);
}

export interface SessionConfig {
  org: string;
  role: Role;
  certId: string;
  endpoint: string;
}

export class SessionContext {
  readonly org: string;
  readonly role: Role;
  readonly certId: string;
  readonly endpoint: string;
  readonly capabilities: ReadonlySet<Capability>;

  constructor(
    config: SessionConfig,
    private readonly backend: Backend,
  ) {
    this.org = config.org;
    this.role = config.role;
    this.certId = config.certId;
    this.endpoint = config.endpoint;
    this.capabilities = capabilitiesFor(config.role);
  }

  can(capability: Capability): boolean {
    return this.capabilities.has(capability);
  }

  request(
    method: HttpMethod,
    path: string,
    options?: RequestOptions,
  ): Promise<ApiResult> {
    return this.backend.request(this.org, method, path, options);
  }
}
