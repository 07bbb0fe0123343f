import { readFileSync } from "node:fs";
import { FixtureBackend, type FixtureFile } from "../src/backend.js";
import { SessionContext } from "../src/session.js";
import type { Role } from "../src/types.js";

const FIXTURE_PATH = new URL("../fixtures/console_fixture.json", import.meta.url);

export function loadFixture(): FixtureFile {
  return JSON.parse(readFileSync(FIXTURE_PATH, "utf8")) as FixtureFile;
}

export interface Console {
  fixture: FixtureFile;
  backend: FixtureBackend;
  session(org: string): SessionContext;
}

/** A fresh backend per test so replay consumption never leaks across tests. */
export function openConsole(): Console {
  const fixture = loadFixture();
  const backend = new FixtureBackend(fixture);
  return {
    fixture,
    backend,
    session(org: string): SessionContext {
      const ref = fixture.orgs.find((o) => o.name === org);
      if (ref === undefined) {
        throw new Error(`no such org in fixture: ${org}`);
      }
      return new SessionContext(
        {
          org: ref.name,
          role: ref.role as Role,
          certId: ref.cert_id,
          endpoint: `gw://${ref.name}`,
        },
        backend,
      );
    },
  };
}
