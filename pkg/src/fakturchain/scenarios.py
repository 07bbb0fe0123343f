"""Attack simulations: credential theft, input injection, in-flight
tampering, and store encryption.

Each runner drives a deterministic network through an attack and returns a
ScenarioReport: the injected faults, what was detected, how the network
responded, and an integrity verdict. Every detection and response is also
written to the chain as a committed audit transaction, so the report can be
reconstructed from block data alone.

Every runner first executes a control phase: the same legitimate traffic on
a fresh network with no fault injected, which must produce zero detections.
A violated expectation raises ScenarioAssertionFailure rather than returning
a doctored report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import dataplane, ledger, netsim
from .encoding import canonical_decode, canonical_encode, sha256
from .ledger import AnchorKind, PayloadAnchor, TxType
from .netsim import FaultKind, FaultRule, Network

FRAGMENT_WIDTH = 16

ATTACKER = "mallory"
VICTIM_ORG_INDEX = 1


class ScenarioAssertionFailure(AssertionError):
    """An expected detection, rejection, or recovery did not occur."""


@dataclass
class Verdict:
    chain_ok: bool
    state_ok: bool
    privacy_ok: bool
    recovery_ok: bool

    @property
    def ok(self) -> bool:
        return self.chain_ok and self.state_ok and self.privacy_ok and self.recovery_ok

    def to_dict(self) -> dict:
        return {
            "chain_ok": self.chain_ok,
            "state_ok": self.state_ok,
            "privacy_ok": self.privacy_ok,
            "recovery_ok": self.recovery_ok,
        }


@dataclass
class ScenarioReport:
    scenario: str
    injected_faults: list[dict] = field(default_factory=list)
    detections: list[dict] = field(default_factory=list)
    response_actions: list[dict] = field(default_factory=list)
    verdict: Verdict = field(default_factory=lambda: Verdict(True, True, True, True))
    audit_tx_ids: list[str] = field(default_factory=list)
    control_detections: int = 0
    notes: list[str] = field(default_factory=list)

    def summary(self) -> str:
        lines = [
            f"scenario: {self.scenario}",
            f"verdict: {'PASS' if self.verdict.ok else 'FAIL'} {self.verdict.to_dict()}",
            f"faults injected: {len(self.injected_faults)}",
            f"detections: {len(self.detections)} (control run: {self.control_detections})",
            f"responses: {len(self.response_actions)}",
            f"audit transactions: {len(self.audit_tx_ids)}",
        ]
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


def report_to_dict(report: ScenarioReport) -> dict:
    return {
        "scenario": report.scenario,
        "injected_faults": report.injected_faults,
        "detections": report.detections,
        "response_actions": report.response_actions,
        "verdict": report.verdict.to_dict(),
        "audit_tx_ids": report.audit_tx_ids,
        "control_detections": report.control_detections,
        "notes": report.notes,
    }


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ScenarioAssertionFailure(message)


# -- shared drivers -----------------------------------------------------------


def _fresh_network(seed: int) -> Network:
    net = netsim.spawn_network(netsim.default_config(seed=seed))
    ok = net.run_until(lambda n: n.leader() is not None, 200)
    _require(ok, "no leader elected during bootstrap")
    return net


def _buyer_id(org: str, i: int) -> str:
    digest = sha256(f"buyer/{org}/{i}".encode())
    return f"{int.from_bytes(digest[:8], 'big') % 10**15:015d}0"


def _description(org: str, i: int) -> str:
    return f"wholesale lot {i:04d} shipped via {org} logistics desk"


def faktur_body(serial: str, org: str, i: int) -> dict:
    price = 5_000 * (i + 1)
    qty = (i % 4) + 1
    base = price * qty
    return {
        "nsfp": serial,
        "buyer_tax_id": _buyer_id(org, i),
        "transaction_date": f"20{serial.split('.')[2]}-0{(i % 9) + 1}-1{i % 9}",
        "line_items": [
            {"description": _description(org, i), "quantity": str(qty), "unit_price": price}
        ],
        "tax_base": base,
        "vat_amount": base * 11 // 100,
    }


def seed_history(net: Network, per_org: int = 2) -> list[dict]:
    """Allocate serials and commit `per_org` fakturs from every enterprise."""
    pkp_orgs = [s.name for s in net.config.orgs if s.name != net.djp_org]
    calls = [
        (org, net.build_request(org, "POST", "/api/v1/nsfp", {"tax_year": 25, "count": max(per_org, 1)}))
        for org in pkp_orgs
    ]
    serials: dict[str, list[str]] = {}
    for org, resp in zip(pkp_orgs, net.call_many(calls)):
        _require(resp.status == 200, f"allocation for {org} failed: {resp.error}")
        serials[org] = resp.body["serials"]

    committed = []
    for round_no in range(per_org):
        batch = []
        for org in pkp_orgs:
            body = faktur_body(serials[org][round_no], org, round_no)
            batch.append((org, net.build_request(org, "POST", "/api/v1/faktur", body)))
        for (org, _), resp in zip(batch, net.call_many(batch)):
            _require(resp.status == 200, f"faktur from {org} failed: {resp.error}")
            committed.append(
                {
                    "org": org,
                    "nsfp": resp.body["nsfp"],
                    "payload_hash": resp.body["anchored_hash"],
                    "tx_id": resp.body["tx_id"],
                    "block_number": resp.body["block_number"],
                }
            )
    return committed


def _control_run(seed: int, per_org: int = 1) -> int:
    """Legitimate traffic only; returns the number of detect events."""
    net = _fresh_network(seed)
    seed_history(net, per_org=per_org)
    net.run_for(10)
    return len(net.detections())


def _all_chains_ok(net: Network) -> bool:
    nodes = list(net.orderer_nodes.values()) + list(net.org_nodes.values())
    return all(ledger.verify_chain(node.chain).ok for node in nodes)


def _converged(net: Network) -> bool:
    net.run_until(lambda n: len(set(n.heights().values())) == 1, 200)
    hashes = {
        node.chain.state_hashes[-1]
        for node in list(net.orderer_nodes.values()) + list(net.org_nodes.values())
    }
    return len(hashes) == 1


def _audit(net: Network, scenario: str, kind: str, detail: str) -> str:
    """Commit one audit transaction from the tax authority; returns its id."""
    gateway = net.org(net.djp_org).gateway
    tx_hex = gateway.submit_admin(
        "scenario_event",
        gateway._scenario_envelope(scenario, kind, detail),
        f"{scenario}/{kind}",
    )
    ok = net.run_until(
        lambda n: tx_hex in n.org(n.djp_org).chain.state.seen_tx_ids, 200
    )
    _require(ok, f"audit record {kind} for {scenario} did not commit")
    return tx_hex


def _audits_committed(net: Network, tx_ids: list[str]) -> bool:
    state = net.org(net.djp_org).chain.state
    return all(tx in state.seen_tx_ids for tx in tx_ids)


def plaintext_exposure(net: Network, committed: list[dict]) -> list[str]:
    """Private payload fragments (>= 16 bytes) found where they must not be.

    Scans every wire frame, every CAS replica, and the off-chain stores of
    orgs that are not a party to the faktur. Returns a description per
    exposure; empty means the privacy partition held. Serials are broadcast
    routing data, so needles are the private field values themselves.
    """
    findings = []
    per_item = []
    for item in committed:
        payload = net.org(item["org"]).offchain.get(item["payload_hash"])
        data = canonical_decode(payload)
        values = [data["buyer_tax_id"]] + [li["description"] for li in data["line_items"]]
        needles = [v.encode() for v in values if len(v.encode()) >= FRAGMENT_WIDTH]
        per_item.append((item, needles))

    for record in net.wire_log:
        for item, needles in per_item:
            for needle in needles:
                if needle in record.payload:
                    findings.append(
                        f"wire {record.src}->{record.dst} {record.kind} "
                        f"tick {record.tick}: {needle[:24]!r}"
                    )
    for name, node in net.org_nodes.items():
        for address, blob in node.cas.blobs.items():
            for _, needles in per_item:
                for needle in needles:
                    if needle in blob:
                        findings.append(f"cas replica {name} {address}: {needle[:24]!r}")
        for item, needles in per_item:
            if name in (item["org"], net.djp_org):
                continue
            for stored in node.offchain.records.values():
                for needle in needles:
                    if needle in stored.plaintext:
                        findings.append(f"offchain store {name}: {needle[:24]!r}")
    return findings


# -- phishing -------------------------------------------------------------------


def _attacker_submit(net: Network, attacker, envelope, max_ticks: int = 80) -> str:
    """Send a crafted envelope from the attacker node; follow redirects.

    Returns "committed", "rejected", or "lost".
    """
    request_id = f"{attacker.node_id}/{envelope.nonce}"
    target = net.leader() or net.config.orderers[0]
    attacker.send(target, "submit", {"request_id": request_id, "envelope": envelope.to_dict()})
    seen = 0
    rotation = 0
    for _ in range(max_ticks):
        net.step()
        if envelope.tx_id.hex() in net.org(net.djp_org).chain.state.seen_tx_ids:
            return "committed"
        fresh = attacker.inbox[seen:]
        seen = len(attacker.inbox)
        for src, kind, body in fresh:
            if body.get("request_id") != request_id:
                continue
            if kind == "submit_reject":
                return "rejected"
            if kind == "submit_redirect":
                hint = body.get("hint")
                if not isinstance(hint, str):
                    rotation += 1
                    hint = net.config.orderers[rotation % len(net.config.orderers)]
                attacker.send(
                    hint, "submit", {"request_id": request_id, "envelope": envelope.to_dict()}
                )
    return "lost"


def _stolen_envelope(net: Network, kp, cert, nonce: int) -> ledger.TransactionEnvelope:
    doc = canonical_encode({"op": "post_nsfp", "claimed_by": cert.subject, "nonce": nonce})
    # The attacker must self-host the request document: honest replicas would
    # refuse to serve content they never saw broadcast.
    address = dataplane.content_address(doc)
    return ledger.sign_envelope(
        kp,
        cert,
        TxType.POST_NSFP,
        {"tax_year": 25, "count": 3},
        PayloadAnchor(AnchorKind.CONTENT_ADDRESS, address),
        ledger.broadcast(),
        nonce=nonce,
        created_at=net.tick,
    )


def run_phishing(network: Network | None = None, seed: int = 1001) -> ScenarioReport:
    report = ScenarioReport(scenario="phishing")
    report.control_detections = _control_run(seed + 500)
    _require(report.control_detections == 0, "control run produced detections")

    net = network or _fresh_network(seed)
    committed = seed_history(net, per_org=1)
    victim = committed[VICTIM_ORG_INDEX]["org"]

    steal_tick = net.tick
    kp, cert = net.steal_credential(victim)
    report.injected_faults.append(
        {"kind": FaultKind.STEAL_CREDENTIAL.value, "org": victim, "tick": steal_tick}
    )
    attacker = net.ensure_attacker(ATTACKER)

    # One stolen transaction is allowed through: the threat is real.
    first = _stolen_envelope(net, kp, cert, nonce=900_001)
    outcome = _attacker_submit(net, attacker, first)
    _require(outcome == "committed", f"pre-revocation transaction was {outcome}")
    report.notes.append(f"stolen-credential tx {first.tx_id.hex()} committed before response")

    # Detection and automatic revocation by the tax authority.
    ok = net.run_until(
        lambda n: cert.cert_id in n.org(n.djp_org).chain.state.cert_revocations, 200
    )
    _require(ok, "certificate was not revoked after anomaly alert")
    anomalies = net.detections("anomalous-origin")
    _require(len(anomalies) >= 1, "no anomalous-origin detection recorded")
    report.detections = [ev.to_dict() for ev in anomalies]
    report.detections += [ev.to_dict() for ev in net.detections("credential-anomaly")]
    report.response_actions.append(
        {"action": "revoke_cert", "cert_id": cert.cert_id, "org": victim}
    )

    # Every post-revocation use of the stolen credential must be rejected.
    rejected = 0
    for i in range(3):
        env = _stolen_envelope(net, kp, cert, nonce=900_100 + i)
        outcome = _attacker_submit(net, attacker, env)
        _require(outcome == "rejected", f"post-revocation submission {i} was {outcome}")
        _require(
            env.tx_id.hex() not in net.org(net.djp_org).chain.state.seen_tx_ids,
            "rejected envelope still committed",
        )
        rejected += 1

    # Service continues for everyone else.
    others = [s.name for s in net.config.orgs if s.name not in (victim, net.djp_org)]
    resp = net.api(others[0], "POST", "/api/v1/nsfp", {"tax_year": 26, "count": 1})
    _require(resp.status == 200, "unrelated org blocked after response")

    state = net.org(net.djp_org).chain.state
    stolen_allocs = [
        a
        for a in state.nsfp_allocations.values()
        if a.owner_org == victim and a.allocation_id == first.tx_id.hex()
    ]
    _require(len(stolen_allocs) == 1, "pre-revocation transaction missing from state")

    response_audit = _audit(
        net,
        "phishing",
        "response",
        f"revoked {cert.cert_id}; {rejected} later submissions rejected; "
        f"pre-revocation tx {first.tx_id.hex()} flagged",
    )
    djp_gateway = net.org(net.djp_org).gateway
    auto_audits = [
        a["tx_id"]
        for a in djp_gateway.admin_actions
        if a["kind"] == "scenario_event" and a.get("status") == "committed"
    ]
    _require(auto_audits, "automatic detection record never committed")
    report.audit_tx_ids = auto_audits + [response_audit]
    _require(_audits_committed(net, report.audit_tx_ids), "audit records missing on-chain")

    report.verdict = Verdict(
        chain_ok=_all_chains_ok(net),
        state_ok=_converged(net),
        privacy_ok=not plaintext_exposure(net, committed),
        recovery_ok=resp.status == 200,
    )
    _require(report.verdict.ok, f"integrity verdict failed: {report.verdict.to_dict()}")
    return report


# -- injection --------------------------------------------------------------------


HOSTILE_STRINGS = [
    "Robert'); DROP TABLE fakturs;--",
    'buyer" OR "1"="1',
    "line'; DELETE FROM nsfp WHERE '1'='1",
    "<script>alert('faktur')</script> padding",
]


def run_injection(network: Network | None = None, seed: int = 2002) -> ScenarioReport:
    report = ScenarioReport(scenario="injection")
    report.notes.append(
        "attack modeled as hostile field injection: this system stores no SQL,"
        " so forged references, bad arithmetic, and quote/semicolon payloads"
        " stand in for query manipulation"
    )
    report.control_detections = _control_run(seed + 500)
    _require(report.control_detections == 0, "control run produced detections")

    net = network or _fresh_network(seed)
    committed = seed_history(net, per_org=1)
    pkp_orgs = [s.name for s in net.config.orgs if s.name != net.djp_org]
    attacker_org = pkp_orgs[-1]
    victim_serial = committed[0]["nsfp"]

    alloc = net.api(attacker_org, "POST", "/api/v1/nsfp", {"tax_year": 25, "count": 4})
    _require(alloc.status == 200, "attacker org could not obtain serials")
    own = alloc.body["serials"]

    attempts: list[tuple[str, dict, str]] = []
    foreign = faktur_body(victim_serial, attacker_org, 7)
    attempts.append(("ownership", foreign, "nsfp owned by another org"))

    unissued = faktur_body("010.000.25.09999999", attacker_org, 8)
    attempts.append(("ownership", unissued, "nsfp never issued"))

    off_by_one = faktur_body(own[0], attacker_org, 9)
    off_by_one["vat_amount"] += 1
    attempts.append(("arithmetic", off_by_one, "vat off by one"))

    wrong_year = faktur_body(own[1], attacker_org, 10)
    wrong_year["transaction_date"] = "2031-05-05"
    attempts.append(("year", wrong_year, "transaction year != serial year"))

    reuse = faktur_body(committed[-1]["nsfp"], committed[-1]["org"], 11)
    attempts.append(("duplicate", reuse, "serial already consumed"))

    for expected_reason, body, label in attempts:
        submit_org = committed[-1]["org"] if body is reuse else attacker_org
        resp = net.api(submit_org, "POST", "/api/v1/faktur", body)
        _require(resp.status == 409, f"{label}: expected rejection, got {resp.status}")
        _require(
            expected_reason in resp.body.get("reasons", []),
            f"{label}: expected reason {expected_reason}, got {resp.body.get('reasons')}",
        )
        report.detections.append(
            {"attempt": label, "reasons": resp.body.get("reasons"), "status": resp.status}
        )

    # Hostile strings inside an otherwise valid faktur: accepted, stored
    # byte-exact, and never interpreted anywhere.
    hostile = faktur_body(own[2], attacker_org, 12)
    hostile["line_items"] = [
        {"description": s, "quantity": "1", "unit_price": 10_000} for s in HOSTILE_STRINGS
    ]
    hostile["tax_base"] = 40_000
    hostile["vat_amount"] = 4_400
    resp = net.api(attacker_org, "POST", "/api/v1/faktur", hostile)
    _require(resp.status == 200, f"hostile-string faktur should pass validation: {resp.error}")
    stored = net.org(attacker_org).offchain.get(resp.body["anchored_hash"])
    round_trip = canonical_decode(stored)
    _require(
        [li["description"] for li in round_trip["line_items"]] == HOSTILE_STRINGS,
        "hostile strings did not survive the round trip byte-exact",
    )
    report.notes.append("hostile strings stored inert and byte-exact")

    state = net.org(net.djp_org).chain.state
    accepted_serials = set(state.faktur_index)
    for _, body, label in attempts:
        if body["nsfp"] in (victim_serial, committed[-1]["nsfp"]):
            continue
        _require(body["nsfp"] not in accepted_serials, f"{label} reached the index")
    _require(own[0] not in accepted_serials, "arithmetic-mismatch faktur accepted")
    _require(own[1] not in accepted_serials, "wrong-year faktur accepted")
    _require(own[2] in accepted_serials, "valid hostile-string faktur missing")

    report.audit_tx_ids.append(
        _audit(
            net,
            "injection",
            "detection",
            f"{len(attempts)} forged submissions rejected at endorsement; "
            f"reasons {sorted({reason for reason, _, _ in attempts})}",
        )
    )
    report.audit_tx_ids.append(
        _audit(net, "injection", "response", "no attacker-controlled record accepted")
    )
    _require(_audits_committed(net, report.audit_tx_ids), "audit records missing on-chain")

    report.verdict = Verdict(
        chain_ok=_all_chains_ok(net),
        state_ok=_converged(net),
        privacy_ok=not plaintext_exposure(net, committed),
        recovery_ok=True,
    )
    _require(report.verdict.ok, f"integrity verdict failed: {report.verdict.to_dict()}")
    return report


# -- man in the middle ---------------------------------------------------------------


TAMPER_WINDOW = 50


def run_mitm(network: Network | None = None, seed: int = 3003) -> ScenarioReport:
    report = ScenarioReport(scenario="mitm")
    report.control_detections = _control_run(seed + 500)
    _require(report.control_detections == 0, "control run produced detections")

    net = network or _fresh_network(seed)
    committed = seed_history(net, per_org=1)
    pkp_orgs = [s.name for s in net.config.orgs if s.name != net.djp_org]

    allocs = net.call_many(
        [
            (org, net.build_request(org, "POST", "/api/v1/nsfp", {"tax_year": 25, "count": 2}))
            for org in pkp_orgs
        ]
    )
    serials = {org: resp.body["serials"] for org, resp in zip(pkp_orgs, allocs)}

    start = net.tick + 1
    end = start + TAMPER_WINDOW
    rule = FaultRule(kind=FaultKind.TAMPER, start=start, end=end, message_kinds=("xfer_payload",))
    cas_rule = FaultRule(
        kind=FaultKind.TAMPER, start=start, end=end, message_kinds=("cas_announce",)
    )
    net.add_fault(rule)
    net.add_fault(cas_rule)
    report.injected_faults = [
        {"kind": "tamper", "message_kind": "xfer_payload", "window": [start, end]},
        {"kind": "tamper", "message_kind": "cas_announce", "window": [start, end]},
    ]

    # Faktur submissions and one broadcast allocation land inside the window.
    in_window = [
        (org, net.build_request(org, "POST", "/api/v1/faktur", faktur_body(serials[org][0], org, 20)))
        for org in pkp_orgs
    ]
    in_window.append(
        (pkp_orgs[0], net.build_request(pkp_orgs[0], "POST", "/api/v1/nsfp", {"tax_year": 26, "count": 1}))
    )
    responses = net.call_many(in_window, max_ticks=TAMPER_WINDOW + 300)
    for (org, _), resp in zip(in_window, responses):
        _require(resp.status == 200, f"submission from {org} never recovered: {resp.error}")

    tampered = [ev for ev in net.trace_log if ev.kind == "tamper"]
    payload_tampers = [
        ev for ev in tampered if dict(ev.subject).get("kind") == "xfer_payload"
    ]
    decrypt_detects = net.detections("decrypt-failure")
    cas_detects = net.detections("cas-mismatch")
    _require(len(payload_tampers) >= 3, "tamper fault never fired on transfers")
    _require(
        len(decrypt_detects) >= len(payload_tampers),
        f"{len(payload_tampers)} tampered transfers but {len(decrypt_detects)} detections",
    )
    report.detections = [ev.to_dict() for ev in decrypt_detects + cas_detects]

    # No faktur was accepted while the window was open.
    faktur_commits_in_window = []
    for node_name in [net.djp_org]:
        gateway = net.org(node_name).gateway
        for ev in gateway.events:
            if ev.kind != "post_faktur" or ev.status != "accepted":
                continue
            block_no = gateway.tx_coords[ev.tx_id]
            block = gateway.chain.blocks[block_no]
            if start <= block.committed_at < end:
                faktur_commits_in_window.append(ev.tx_id)
    _require(
        not faktur_commits_in_window,
        f"fakturs accepted inside tamper window: {faktur_commits_in_window}",
    )

    # Broadcast side: replicas rejected the tampered copy, then healed.
    _require(len(cas_detects) >= 1, "no replica flagged the tampered broadcast")
    nsfp_resp = responses[-1]

    def _all_replicas_complete(n: Network) -> bool:
        addresses = [
            env.payload_anchor.value
            for block in n.org(n.djp_org).chain.blocks[1:]
            for env in block.txs
            if env.tx_type is TxType.POST_NSFP
        ]
        return all(
            addr in n.org(org).cas.blobs
            for org in pkp_orgs + [n.djp_org]
            for addr in addresses
        )

    healed = net.run_until(_all_replicas_complete, 200)
    _require(healed and nsfp_resp.status == 200, "broadcast replicas did not converge")
    report.response_actions.append({"action": "cas_refetch", "healed": True})

    # Post-hoc store tampering is exposed by on-chain hashes.
    djp_store = net.org(net.djp_org).offchain
    target = committed[0]["payload_hash"]
    record = djp_store.records[target]
    original = record.plaintext
    record.plaintext = original[:-1] + bytes([original[-1] ^ 0x40])
    exposed = not dataplane.verify_against_chain(
        record.plaintext, net.org(net.djp_org).chain, bytes.fromhex(committed[0]["tx_id"])
    )
    record.plaintext = original
    _require(exposed, "post-hoc store tampering went unnoticed")
    report.detections.append({"attempt": "post-hoc store tamper", "exposed": True})

    # Service recovered after the window closed.
    after = net.api(pkp_orgs[0], "POST", "/api/v1/faktur", faktur_body(serials[pkp_orgs[0]][1], pkp_orgs[0], 30))
    _require(after.status == 200, "submission after tamper window failed")
    report.response_actions.append({"action": "service_recovered", "tx_id": after.body["tx_id"]})

    report.audit_tx_ids = [
        _audit(
            net,
            "mitm",
            "detection",
            f"{len(decrypt_detects)} tampered transfers rejected; "
            f"{len(cas_detects)} tampered broadcasts rejected; store tamper exposed",
        ),
        _audit(net, "mitm", "response", "all submissions re-sent and committed after window"),
    ]
    _require(_audits_committed(net, report.audit_tx_ids), "audit records missing on-chain")

    report.verdict = Verdict(
        chain_ok=_all_chains_ok(net),
        state_ok=_converged(net),
        privacy_ok=not plaintext_exposure(net, committed),
        recovery_ok=after.status == 200,
    )
    _require(report.verdict.ok, f"integrity verdict failed: {report.verdict.to_dict()}")
    return report


# -- ransomware -------------------------------------------------------------------


RANSOM_FRACTION = 0.4
RANSOM_MIN_RECORDS = 30


def run_ransomware(network: Network | None = None, seed: int = 4004) -> ScenarioReport:
    report = ScenarioReport(scenario="ransomware")
    report.control_detections = _control_run(seed + 500)
    _require(report.control_detections == 0, "control run produced detections")

    net = network or _fresh_network(seed)
    per_org = -(-RANSOM_MIN_RECORDS // max(len(net.config.orgs) - 1, 1))
    committed = seed_history(net, per_org=per_org)
    _require(len(committed) >= RANSOM_MIN_RECORDS, "not enough committed fakturs")

    store = net.org(net.djp_org).offchain
    before = {key: store.records[key].plaintext for key in store.records}
    artifact = dataplane.backup(store)

    start = net.tick + 1
    net.add_fault(
        FaultRule(
            kind=FaultKind.ENCRYPT_STORE,
            start=start,
            end=start + 1,
            org=net.djp_org,
            fraction=RANSOM_FRACTION,
        )
    )
    net.step()
    report.injected_faults.append(
        {"kind": "encrypt_store", "org": net.djp_org, "fraction": RANSOM_FRACTION, "tick": start}
    )

    scrambled = {
        key for key, plaintext in before.items() if store.records[key].plaintext != plaintext
    }
    _require(scrambled, "fault injected but no record changed")

    flagged = set()
    for key in sorted(store.records):
        try:
            store.get(key)
        except dataplane.IntegrityFailure:
            flagged.add(key)
            net.detect(net.djp_org, "store-corrupt", {"payload_hash": key[:16]})
    _require(
        flagged == scrambled,
        f"sweep flagged {len(flagged)} records but {len(scrambled)} were scrambled",
    )
    report.detections = [
        {"payload_hash": key, "detected": "integrity-failure"} for key in sorted(flagged)
    ]

    chain_ok_during = _all_chains_ok(net)
    restore_report = dataplane.restore(store, artifact, net.org(net.djp_org).chain)
    _require(
        restore_report.verified == restore_report.total and not restore_report.corrupt,
        f"restore left damage: {restore_report}",
    )
    _require(not restore_report.missing, f"backup was incomplete: {restore_report.missing}")

    after_flags = []
    for key in sorted(store.records):
        try:
            store.get(key)
        except dataplane.IntegrityFailure:
            after_flags.append(key)
    _require(not after_flags, f"corruption survived restore: {after_flags}")
    anchored_ok = all(
        dataplane.verify_against_chain(
            store.get(item["payload_hash"]),
            net.org(net.djp_org).chain,
            bytes.fromhex(item["tx_id"]),
        )
        for item in committed
    )
    _require(anchored_ok, "restored records do not match their on-chain hashes")
    report.response_actions.append(
        {
            "action": "restore_from_backup",
            "total": restore_report.total,
            "verified": restore_report.verified,
        }
    )

    report.audit_tx_ids = [
        _audit(
            net,
            "ransomware",
            "detection",
            f"{len(flagged)} of {len(before)} records failed integrity sweep",
        ),
        _audit(
            net,
            "ransomware",
            "response",
            f"store restored from backup; {restore_report.verified}/{restore_report.total} "
            "records verified against on-chain hashes",
        ),
    ]
    _require(_audits_committed(net, report.audit_tx_ids), "audit records missing on-chain")

    report.verdict = Verdict(
        chain_ok=chain_ok_during and _all_chains_ok(net),
        state_ok=_converged(net),
        privacy_ok=not plaintext_exposure(net, committed),
        recovery_ok=restore_report.verified == restore_report.total and not after_flags,
    )
    _require(report.verdict.ok, f"integrity verdict failed: {report.verdict.to_dict()}")
    return report


RUNNERS = {
    "phishing": run_phishing,
    "injection": run_injection,
    "mitm": run_mitm,
    "ransomware": run_ransomware,
}
