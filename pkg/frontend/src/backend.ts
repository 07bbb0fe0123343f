/** Gateway transport abstraction.
 *
 * The console issues every request through a Backend so that the same
 * view code runs against a live gateway or a recorded fixture. The
 * fixture backend replays exchanges captured from a real network run;
 * it matches on request content rather than call order, and consumes
 * each exchange once, so a replayed session observes the same state
 * progression the recording did.
 */

import type { ApiResult, HttpMethod } from "./types.js";

export interface RequestOptions {
  query?: Record<string, string>;
  body?: unknown;
}

export interface Backend {
  request(
    org: string,
    method: HttpMethod,
    path: string,
    options?: RequestOptions,
  ): Promise<ApiResult>;
}

interface FixtureExchange {
  org: string;
  method: HttpMethod;
  path: string;
  query: Record<string, string> | null;
  body: unknown;
  response: ApiResult;
}

export interface FixtureFile {
  seed: number;
  djp_org: string;
  orgs: { name: string; role: string; cert_id: string }[];
  revoked_cert_id: string;
  exchanges: FixtureExchange[];
}

function canonical(value: unknown): string {
  if (value === null || value === undefined) {
    return "null";
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonical).join(",") + "]";
  }
  if (typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .filter(([, v]) => v !== undefined)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => JSON.stringify(k) + ":" + canonical(v));
    return "{" + entries.join(",") + "}";
  }
  return JSON.stringify(value);
}

// A request with no parameters is recorded as {} by some writers and
// null by others; both spellings must compare equal.
function emptyToNull(value: unknown): unknown {
  if (
    value === undefined ||
    value === null ||
    (typeof value === "object" &&
      !Array.isArray(value) &&
      Object.keys(value as object).length === 0)
  ) {
    return null;
  }
  return value;
}

export class FixtureBackend implements Backend {
  private readonly exchanges: FixtureExchange[];
  private readonly consumed: boolean[];

  constructor(fixture: FixtureFile) {
    this.exchanges = fixture.exchanges;
    this.consumed = fixture.exchanges.map(() => false);
  }

  async request(
    org: string,
    method: HttpMethod,
    path: string,
    options: RequestOptions = {},
  ): Promise<ApiResult> {
    const query = canonical(emptyToNull(options.query));
    const body = canonical(emptyToNull(options.body));
    for (let i = 0; i < this.exchanges.length; i += 1) {
      const ex = this.exchanges[i]!;
      if (this.consumed[i] || ex.org !== org) {
        continue;
      }
      if (ex.method !== method || ex.path !== path) {
        continue;
      }
      if (canonical(emptyToNull(ex.query)) !== query) {
        continue;
      }
      if (canonical(emptyToNull(ex.body)) !== body) {
        continue;
      }
      this.consumed[i] = true;
      return ex.response;
    }
    throw new Error(
      `fixture holds no unconsumed exchange for ${org} ${method} ${path}` +
        ` query=${query} body=${body}`,
    );
  }

  /** Exchanges recorded but never requested; useful for test hygiene. */
  unconsumed(): FixtureExchange[] {
    return this.exchanges.filter((_, i) => !this.consumed[i]);
  }
}

/** Transport for a live gateway speaking JSON over HTTP. */
export class HttpBackend implements Backend {
  constructor(private readonly baseUrl: string) {}

  async request(
    org: string,
    method: HttpMethod,
    path: string,
    options: RequestOptions = {},
  ): Promise<ApiResult> {
    const url = new URL(this.baseUrl.replace(/\/$/, "") + path);
    for (const [key, value] of Object.entries(options.query ?? {})) {
      url.searchParams.set(key, value);
    }
    const init: RequestInit = {
      method,
      headers: { "content-type": "application/json", "x-org": org },
    };
    if (options.body !== undefined && method !== "GET") {
      init.body = JSON.stringify(options.body);
    }
    const resp = await fetch(url, init);
    const payload = (await resp.json()) as {
      body: unknown;
      block_number: number | null;
      error: string | null;
    };
    return {
      status: resp.status,
      body: payload.body,
      block_number: payload.block_number,
      error: payload.error,
    };
  }
}
