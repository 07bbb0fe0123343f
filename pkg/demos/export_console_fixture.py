"""
Console fixture export
======================

Drive a seeded network through the operator console's flows and record every
request/response pair. The console's test backend replays these exchanges,
so the console is always tested against responses a real gateway produced.

Writes frontend/fixtures/console_fixture.json; run from anywhere.
"""

import json
from pathlib import Path

from fakturchain import netsim
from fakturchain.scenarios import faktur_body

OUT = Path(__file__).resolve().parent.parent / "frontend" / "fixtures" / "console_fixture.json"

net = netsim.spawn_network(netsim.default_config(seed=2026))
net.run_until(lambda n: n.leader() is not None, 200)

exchanges = []


def record(org, method, path, body=None, query=None, caller=None):
    resp = net.api(org, method, path, body, query, caller=caller)
    exchanges.append(
        {
            "org": caller or org,
            "method": method,
            "path": path,
            "query": query or {},
            "body": body or {},
            "response": {
                "status": resp.status,
                "body": resp.body,
                "block_number": resp.block_number,
                "error": resp.error,
            },
        }
    )
    return resp


# Profile setup: one valid save and one the server must refuse, so the
# settings form has both sides on record.
record("pkp-01", "PUT", "/api/v1/profile", {
    "display_name": "PT Sinar Niaga",
    "address": "Jl. Sudirman 12, Jakarta",
    "tax_id": "012345678901234",
    "endpoint": "gw://pkp-01",
})
record("pkp-01", "PUT", "/api/v1/profile", {
    "display_name": "PT Sinar Niaga",
    "address": "Jl. Sudirman 12, Jakarta",
    "tax_id": "12345",
    "endpoint": "gw://pkp-01",
})

# Ten allocations across the enterprises; the first one is the console's
# request-5-serials flow, the rest fill the authority's monitoring table.
first = record("pkp-01", "POST", "/api/v1/nsfp", {"tax_year": 25, "count": 5})
serials = first.body["serials"]
for org, rounds in (("pkp-01", 3), ("pkp-02", 3), ("pkp-03", 3)):
    for _ in range(rounds):
        record(org, "POST", "/api/v1/nsfp", {"tax_year": 25, "count": 2})

# The serial picker behind the invoice form.
record("pkp-01", "GET", "/api/v1/nsfp",
       query={"owner": "pkp-01", "tax_year": "25"})

# Invoice entry: one acceptance, then the same form with the VAT field
# nudged by one rupiah to capture the server-side rejection.
invoice = faktur_body(serials[0], "pkp-01", 0)
accepted = record("pkp-01", "POST", "/api/v1/faktur", invoice)
bad = dict(faktur_body(serials[1], "pkp-01", 1))
bad["vat_amount"] += 1
record("pkp-01", "POST", "/api/v1/faktur", bad)

# The print view checks its hash against the block that anchored it.
block_number = accepted.body["block_number"]
record("pkp-01", "GET", "/api/v1/faktur", query={"nsfp": serials[0]})
record("pkp-01", "GET", f"/api/v1/blocks/{block_number}")

# A non-party asking for the same invoice gets nothing back.
record("pkp-02", "GET", "/api/v1/faktur", query={"nsfp": serials[0]})

# The authority's audit view: allocation table, faktur hashes, event feed.
record("djp", "GET", "/api/v1/nsfp")
record("djp", "GET", "/api/v1/faktur")
feed = record("djp", "GET", "/api/v1/events", query={"from": "0"})

# Revoke a credential, then read only the new events: the revocation must
# land within this single feed update.
target = net.org("pkp-03").cert.cert_id
record("djp", "POST", "/api/v1/admin/revoke",
       {"cert_id": target, "reason": "credential reported stolen"})
resume_from = str(feed.body["head_sequence"] + 1)
record("djp", "GET", "/api/v1/events", query={"from": resume_from})

# The revoked enterprise tries to keep transacting and is turned away.
record("pkp-03", "POST", "/api/v1/nsfp", {"tax_year": 25, "count": 1})

fixture = {
    "seed": 2026,
    "djp_org": net.djp_org,
    "orgs": [
        {
            "name": name,
            "role": net.org(name).cert.role.value,
            "cert_id": net.org(name).cert.cert_id,
        }
        for name in net.org_names()
    ],
    "revoked_cert_id": target,
    "exchanges": exchanges,
}

OUT.parent.mkdir(parents=True, exist_ok=True)
OUT.write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n")
print(f"{len(exchanges)} exchanges written to {OUT}")
