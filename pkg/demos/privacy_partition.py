"""
The dual data plane
===================

NSFP allocations are broadcast so issuance stays transparent; invoice bodies
move through encrypted private exchanges so prices and buyers stay between
the seller and the tax authority. This walk shows both planes and then scans
the simulated wire for leaks.
"""

from fakturchain import netsim
from fakturchain.crypto import sha256
from fakturchain.scenarios import faktur_body, plaintext_exposure

net = netsim.spawn_network(netsim.default_config(seed=7))
net.run_until(lambda n: n.leader() is not None, 200)

# pkp-01 allocates serials (broadcast) and commits one invoice (private).
serials = net.api("pkp-01", "POST", "/api/v1/nsfp",
                  {"tax_year": 25, "count": 2}).body["serials"]
body = faktur_body(serials[0], "pkp-01", 3)
resp = net.api("pkp-01", "POST", "/api/v1/faktur", body)
payload_hash = resp.body["anchored_hash"]
print(f"invoice anchored: {payload_hash[:16]}..")

# The broadcast plane: the allocation is readable from any member's gateway,
# here a different enterprise entirely.
rows = net.api("pkp-02", "GET", "/api/v1/nsfp",
               query={"owner": "pkp-01"}).body["allocations"]
print(f"pkp-02 sees {len(rows)} broadcast allocation(s) owned by pkp-01")

# The private plane: seller and authority hold the payload; to a bystander
# the invoice is not even listed.
for org in ("pkp-01", "djp", "pkp-02"):
    rows = net.api(org, "GET", "/api/v1/faktur",
                   query={"nsfp": serials[0]}).body["fakturs"]
    visible = bool(rows) and rows[0]["payload_available"]
    print(f"{org}: listed={bool(rows)}, payload_available={visible}")

seller_copy = net.org("pkp-01").offchain.get(payload_hash)
authority_copy = net.org("djp").offchain.get(payload_hash)
assert sha256(seller_copy).hex() == payload_hash
assert seller_copy == authority_copy
print("seller and authority hold byte-identical payloads")

bystander = net.org("pkp-02").offchain
print(f"bystander off-chain store holds {len(bystander.records)} record(s)")

# Finally, sweep every wire frame, CAS replica, and non-party store for
# fragments of the private fields. An empty report means the partition held.
committed = [{"org": "pkp-01", "payload_hash": payload_hash}]
findings = plaintext_exposure(net, committed)
print(f"wire frames scanned: {len(net.wire_log)}, exposures found: {len(findings)}")
assert findings == []
