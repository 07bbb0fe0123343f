import { describe, expect, it } from "vitest";

import { capabilitiesFor, type Capability } from "../src/session.js";
import type { Role } from "../src/types.js";
import { openConsole } from "./helpers.js";

// One row per role, one column per action, mirroring the network's own
// authorization matrix. The console renders from this; the gateway
// still decides.
const MATRIX: [Role, Capability, boolean][] = [
  ["pkp", "post_nsfp", true],
  ["pkp", "post_faktur", true],
  ["pkp", "get_nsfp", true],
  ["pkp", "get_faktur", true],
  ["pkp", "revoke", false],
  ["pkp", "admin", false],
  ["djp", "post_nsfp", false],
  ["djp", "post_faktur", false],
  ["djp", "get_nsfp", true],
  ["djp", "get_faktur", true],
  ["djp", "revoke", true],
  ["djp", "admin", true],
  ["orderer", "post_nsfp", false],
  ["orderer", "post_faktur", false],
  ["orderer", "get_nsfp", false],
  ["orderer", "get_faktur", false],
  ["orderer", "revoke", false],
  ["orderer", "admin", false],
];

describe("capabilitiesFor", () => {
  it("covers every cell of the role/action matrix", () => {
    for (const [role, capability, allowed] of MATRIX) {
      expect(capabilitiesFor(role).has(capability), `${role}/${capability}`).toBe(
        allowed,
      );
    }
  });

  it("gives orderers no console surface at all", () => {
    expect(capabilitiesFor("orderer").size).toBe(0);
  });
});

describe("SessionContext", () => {
  it("derives capabilities from the org's role", () => {
    const console = openConsole();
    const seller = console.session("pkp-01");
    expect(seller.can("post_faktur")).toBe(true);
    expect(seller.can("revoke")).toBe(false);
    const authority = console.session("djp");
    expect(authority.can("revoke")).toBe(true);
    expect(authority.can("post_faktur")).toBe(false);
  });
});
