"""Per-org application service: the JSON API, transfers, and block ingestion.

One Gateway runs on every org node. It exposes the transaction and audit
routes, endorses submissions against local committed state, runs the
two-party encrypted transfer protocol for faktur payloads, submits signed
envelopes to the ordering service with redirect-and-retry, ingests committed
blocks into the local chain replica, and derives the event feed.

Mutating calls resolve asynchronously: `handle` returns None and the response
appears in `responses` once the transaction commits locally (or a retry
budget expires). Queries answer immediately from committed state. Status
codes follow the usual HTTP meanings: 401 authentication, 403 role, 404
unknown resource, 409 validation rejection (with machine-readable reasons),
503 ordering unavailable.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from . import chaincode, consensus, dataplane, identity, ledger
from .chaincode import Faktur, LineItem, SerialStatus, VatConfig
from .dataplane import PrivateEnvelope
from .encoding import EncodingError, canonical_decode, canonical_encode, canonical_json, sha256
from .identity import Action, Certificate, Role
from .ledger import (
    AnchorKind,
    Block,
    PayloadAnchor,
    TransactionEnvelope,
    TxType,
    UnauthorizedTx,
    Visibility,
)

log = logging.getLogger(__name__)

_TAX_ID_RE = re.compile(r"^\d{15,16}$")

SUBMIT_RETRY_TICKS = 8
TRANSFER_RETRY_TICKS = 6
DEFAULT_BUDGET_TICKS = 400
HEAD_ANNOUNCE_TICKS = 5


class GatewayError(Exception):
    pass


class NotCommitted(GatewayError):
    pass


class Forbidden(GatewayError):
    pass


@dataclass(frozen=True)
class ApiRequest:
    method: str
    path: str
    cert_id: str
    nonce: int
    body: dict
    query: dict
    signature: bytes

    def signing_payload(self) -> bytes:
        return canonical_json(
            {
                "method": self.method,
                "path": self.path,
                "nonce": self.nonce,
                "body": self.body,
                "query": self.query,
            }
        )

    @property
    def request_id(self) -> str:
        return f"{self.cert_id}/{self.nonce}"


def make_request(
    keypair,
    cert: Certificate,
    method: str,
    path: str,
    nonce: int,
    body: dict | None = None,
    query: dict | None = None,
) -> ApiRequest:
    req = ApiRequest(
        method=method,
        path=path,
        cert_id=cert.cert_id,
        nonce=nonce,
        body=body or {},
        query=query or {},
        signature=b"",
    )
    return ApiRequest(
        method=req.method,
        path=req.path,
        cert_id=req.cert_id,
        nonce=req.nonce,
        body=req.body,
        query=req.query,
        signature=keypair.sign(req.signing_payload()),
    )


@dataclass(frozen=True)
class ApiResponse:
    status: int
    body: dict
    block_number: int
    error: str | None = None

    @property
    def ok(self) -> bool:
        return 200 <= self.status < 300


@dataclass(frozen=True)
class EventRecord:
    sequence: int
    tx_id: str
    kind: str
    visibility: dict
    status: str
    detail: dict

    def to_dict(self) -> dict:
        return {
            "sequence": self.sequence,
            "tx_id": self.tx_id,
            "kind": self.kind,
            "visibility": self.visibility,
            "status": self.status,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class OrgProfile:
    display_name: str
    address: str
    tax_id: str
    endpoint: str

    def to_dict(self) -> dict:
        return {
            "display_name": self.display_name,
            "address": self.address,
            "tax_id": self.tax_id,
            "endpoint": self.endpoint,
        }


@dataclass(frozen=True)
class EfakturDocument:
    nsfp: str
    seller_org: str
    seller_name: str
    buyer_tax_id: str
    transaction_date: str
    line_items: list[dict]
    tax_base: int
    vat_amount: int
    verification_hash: str
    block_number: int
    tx_id: str

    def to_dict(self) -> dict:
        return {
            "nsfp": self.nsfp,
            "seller_org": self.seller_org,
            "seller_name": self.seller_name,
            "buyer_tax_id": self.buyer_tax_id,
            "transaction_date": self.transaction_date,
            "line_items": self.line_items,
            "tax_base": self.tax_base,
            "vat_amount": self.vat_amount,
            "verification_hash": self.verification_hash,
            "block_number": self.block_number,
            "tx_id": self.tx_id,
        }


def jsonable(value):
    """Recursively convert bytes to hex strings for JSON-style responses."""
    if isinstance(value, bytes):
        return value.hex()
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


@dataclass
class Transfer:
    """Sender-side state of one private payload exchange."""

    transfer_id: str
    receiver_org: str
    payload: bytes
    payload_hash: bytes
    request_id: str
    stage: str = "hello"
    last_action: int = 0
    attempts: int = 0


@dataclass
class IncomingTransfer:
    transfer_id: str
    sender_org: str
    sender_cert_id: str
    payload_hash: bytes


@dataclass
class PendingSubmit:
    request_id: str
    kind: str
    deadline: int
    envelope: TransactionEnvelope | None = None
    stage: str = "submit"
    next_retry: int = 0
    target_idx: int = 0
    transfer: Transfer | None = None
    detail: dict = field(default_factory=dict)
    internal: bool = False


class Gateway:
    """Application service bound to one org node.

    The node object supplies identity, stores, the chain replica, and the
    network port (send/trace/now). Everything protocol-level lives here.
    """

    def __init__(self, node):
        self.node = node
        self.pending: dict[str, PendingSubmit] = {}
        self.responses: dict[str, ApiResponse] = {}
        self.incoming: dict[str, IncomingTransfer] = {}
        self.events: list[EventRecord] = []
        self.profile: OrgProfile | None = None
        self.block_buffer: dict[int, Block] = {}
        self.tx_coords: dict[str, int] = {}
        self.anchor_coords: dict[str, str] = {}
        self.admin_actions: list[dict] = []
        self.alert_handled: set[str] = set()
        self.last_nonce: dict[str, int] = {}
        self._rejection_cursor = 0
        self._envelope_nonce = 0
        self._transfer_counter = 0
        self._self_counter = 0

    # -- small accessors --------------------------------------------------

    @property
    def chain(self) -> ledger.Chain:
        return self.node.chain

    @property
    def state(self) -> chaincode.WorldState:
        return self.node.chain.state

    @property
    def config(self) -> VatConfig:
        return self.node.config

    @property
    def org(self) -> str:
        return self.node.org

    def _now(self) -> int:
        return self.node.now

    def _rl_view(self) -> identity.RevocationList:
        entries = {cid: (0, "on-chain") for cid in self.state.cert_revocations}
        return identity.RevocationList(entries=entries)

    def _next_envelope_nonce(self) -> int:
        self._envelope_nonce += 1
        return self._envelope_nonce

    def _respond(
        self, request_id: str, status: int, body: dict, error: str | None = None
    ) -> ApiResponse:
        resp = ApiResponse(status, jsonable(body), self.chain.height, error)
        self.responses[request_id] = resp
        return resp

    # -- API entry ---------------------------------------------------------

    def handle(self, request: ApiRequest) -> ApiResponse | None:
        """Route one request; None means the response will arrive async."""
        cert = self.node.certs.get(request.cert_id)
        if cert is None:
            return self._reply(401, {}, "unknown certificate")
        decision = identity.verify_signature(
            cert,
            request.signing_payload(),
            request.signature,
            self._rl_view(),
            self._now(),
            self.node.root_bundle,
        )
        if not decision.allowed:
            return self._reply(401, {}, decision.reason)
        if request.method in ("POST", "PUT"):
            if request.nonce <= self.last_nonce.get(request.cert_id, -1):
                return self._reply(409, {"reasons": ["stale-nonce"]}, "stale nonce")
            self.last_nonce[request.cert_id] = request.nonce

        route = (request.method, request.path)
        if route == ("POST", "/api/v1/nsfp"):
            return self._post_nsfp(request, cert)
        if route == ("GET", "/api/v1/nsfp"):
            return self._get_nsfp(request, cert)
        if route == ("POST", "/api/v1/faktur"):
            return self._post_faktur(request, cert)
        if route == ("GET", "/api/v1/faktur"):
            return self._get_faktur(request, cert)
        if request.method == "GET" and request.path.startswith("/api/v1/blocks/"):
            return self._get_block(request)
        if route == ("GET", "/api/v1/events"):
            return self._get_events(request, cert)
        if route == ("PUT", "/api/v1/profile"):
            return self._put_profile(request, cert)
        if route == ("POST", "/api/v1/admin/revoke"):
            return self._admin_revoke(request, cert)
        if request.method == "POST" and request.path.startswith("/api/v1/scenario/"):
            return self._run_scenario(request, cert)
        return self._reply(404, {}, f"no route {request.method} {request.path}")

    def _reply(self, status: int, body: dict, error: str | None = None) -> ApiResponse:
        return ApiResponse(status, jsonable(body), self.chain.height, error)

    def _check_role(self, cert: Certificate, action: Action) -> ApiResponse | None:
        decision = identity.authorize(cert, action)
        if not decision.allowed:
            return self._reply(403, {}, decision.reason)
        return None

    # -- transaction routes -------------------------------------------------

    def _post_nsfp(self, request: ApiRequest, cert: Certificate) -> ApiResponse | None:
        denied = self._check_role(cert, Action.POST_NSFP)
        if denied:
            return denied
        if cert.subject != self.org:
            return self._reply(403, {}, "submit via your own org gateway")
        tax_year = request.body.get("tax_year")
        count = request.body.get("count")
        try:
            chaincode.post_nsfp(self.state, cert, tax_year, count, self.config)
        except chaincode.ChaincodeError as exc:
            self.node.detect(
                "endorsement-reject", {"op": "post_nsfp", "why": type(exc).__name__}
            )
            return self._reply(
                409, {"reasons": [type(exc).__name__]}, str(exc) or type(exc).__name__
            )
        doc = canonical_encode(
            {
                "op": "post_nsfp",
                "requester": self.org,
                "tax_year": tax_year,
                "count": count,
                "request_id": request.request_id,
            }
        )
        address = self.node.cas.put(doc)
        self.node.broadcast_cas(address, doc)
        envelope = self._sign_envelope(
            TxType.POST_NSFP,
            {"tax_year": tax_year, "count": count},
            PayloadAnchor(AnchorKind.CONTENT_ADDRESS, address),
            ledger.broadcast(),
        )
        self._queue_submit(request.request_id, "nsfp", envelope)
        return None

    def _post_faktur(self, request: ApiRequest, cert: Certificate) -> ApiResponse | None:
        denied = self._check_role(cert, Action.POST_FAKTUR)
        if denied:
            return denied
        if cert.subject != self.org:
            return self._reply(403, {}, "submit via your own org gateway")
        try:
            faktur = faktur_from_body(request.body, seller_org=self.org)
        except GatewayError as exc:
            self.node.detect("endorsement-reject", {"op": "post_faktur", "why": "format"})
            return self._reply(409, {"reasons": ["format"]}, str(exc))
        result = chaincode.validate_faktur(self.state, self.org, faktur, self.config)
        if not result.accepted:
            self.node.detect(
                "endorsement-reject",
                {"op": "post_faktur", "why": ",".join(result.reasons)},
            )
            return self._reply(409, {"reasons": list(result.reasons)}, "rejected")
        payload = faktur.payload_bytes()
        self._transfer_counter += 1
        transfer = Transfer(
            transfer_id=f"{self.org}/xfer/{self._transfer_counter}",
            receiver_org=self.config.djp_org,
            payload=payload,
            payload_hash=sha256(payload),
            request_id=request.request_id,
            last_action=self._now(),
        )
        pending = PendingSubmit(
            request_id=request.request_id,
            kind="faktur",
            deadline=self._now() + DEFAULT_BUDGET_TICKS,
            stage="transfer",
            transfer=transfer,
            detail={"nsfp": faktur.nsfp, "year": int(faktur.transaction_date[:4])},
        )
        self.pending[request.request_id] = pending
        self._send_hello(transfer)
        return None

    def _admin_revoke(self, request: ApiRequest, cert: Certificate) -> ApiResponse | None:
        denied = self._check_role(cert, Action.REVOKE)
        if denied:
            return denied
        target = request.body.get("cert_id")
        if not isinstance(target, str) or target not in self.node.certs:
            return self._reply(404, {}, "unknown certificate")
        envelope = self._revoke_envelope(target, str(request.body.get("reason", "")))
        self._queue_submit(request.request_id, "revoke", envelope)
        return None

    def _run_scenario(self, request: ApiRequest, cert: Certificate) -> ApiResponse:
        denied = self._check_role(cert, Action.ADMIN)
        if denied:
            return denied
        name = request.path.rsplit("/", 1)[-1]
        from . import scenarios

        runner = scenarios.RUNNERS.get(name)
        if runner is None:
            return self._reply(404, {}, f"unknown scenario {name}")
        report = runner(self.node.network)
        return self._reply(200, {"report": scenarios.report_to_dict(report)})

    # -- query routes --------------------------------------------------------

    def _get_nsfp(self, request: ApiRequest, cert: Certificate) -> ApiResponse:
        denied = self._check_role(cert, Action.GET_NSFP)
        if denied:
            return denied
        status = None
        if "status" in request.query:
            try:
                status = SerialStatus(request.query["status"])
            except ValueError:
                return self._reply(409, {"reasons": ["bad-status"]}, "bad status filter")
        tax_year = request.query.get("tax_year")
        allocations = chaincode.get_nsfp(
            self.state,
            cert,
            owner=request.query.get("owner"),
            tax_year=int(tax_year) if tax_year is not None else None,
            status=status,
        )
        return self._reply(
            200, {"allocations": [alloc.to_dict() for alloc in allocations]}
        )

    def _get_faktur(self, request: ApiRequest, cert: Certificate) -> ApiResponse:
        denied = self._check_role(cert, Action.GET_FAKTUR)
        if denied:
            return denied
        entries = chaincode.get_faktur(
            self.state,
            cert,
            nsfp=request.query.get("nsfp"),
            seller=request.query.get("seller"),
        )
        out = []
        for entry in entries:
            hash_hex = entry.faktur_hash.hex()
            row: dict = {
                "nsfp": entry.nsfp,
                "faktur_hash": hash_hex,
                "seller_org": entry.seller_org,
                "receiver_org": entry.receiver_org,
                "tx_id": self.anchor_coords.get(hash_hex),
                "block_number": self.tx_coords.get(self.anchor_coords.get(hash_hex, ""), None),
            }
            is_party = cert.role is Role.DJP or cert.subject == entry.seller_org
            if is_party and hash_hex in self.node.offchain.records:
                try:
                    payload = self.node.offchain.get(hash_hex)
                    row["faktur"] = canonical_decode(payload)
                    row["payload_available"] = True
                except dataplane.DataplaneError:
                    row["payload_available"] = False
            else:
                row["payload_available"] = False
            out.append(row)
        return self._reply(200, {"fakturs": out})

    def _get_block(self, request: ApiRequest) -> ApiResponse:
        tail = request.path.rsplit("/", 1)[-1]
        if tail == "latest":
            number = self.chain.height
        elif tail.isdigit():
            number = int(tail)
        else:
            return self._reply(404, {}, "bad block number")
        if number > self.chain.height:
            return self._reply(404, {}, f"no block {number}")
        block = self.chain.blocks[number]
        return self._reply(
            200,
            {
                "block": block.to_dict(),
                "block_hash": block.block_hash(),
                "state_hash": self.chain.state_hashes[number],
            },
        )

    def _get_events(self, request: ApiRequest, cert: Certificate) -> ApiResponse:
        raw = request.query.get("from", "0")
        if not str(raw).lstrip("-").isdigit() or int(raw) < 0:
            return self._reply(400, {}, "bad from sequence")
        start = int(raw)
        visible = [
            ev.to_dict()
            for ev in self.events
            if ev.sequence >= start and self._event_visible(ev, cert)
        ]
        head = self.events[-1].sequence if self.events else -1
        return self._reply(200, {"events": visible, "head_sequence": head})

    def _event_visible(self, event: EventRecord, cert: Certificate) -> bool:
        if cert.role is Role.DJP:
            return True
        if event.visibility.get("kind") == "broadcast":
            return True
        return cert.subject in event.visibility.get("parties", [])

    def _put_profile(self, request: ApiRequest, cert: Certificate) -> ApiResponse:
        if cert.subject != self.org:
            return self._reply(403, {}, "profile belongs to this org's gateway")
        body = request.body
        tax_id = str(body.get("tax_id", ""))
        if not _TAX_ID_RE.match(tax_id):
            return self._reply(
                409, {"reasons": ["tax-id-format"]}, "tax id must be 15-16 digits"
            )
        profile = OrgProfile(
            display_name=str(body.get("display_name", self.org)),
            address=str(body.get("address", "")),
            tax_id=tax_id,
            endpoint=str(body.get("endpoint", "")),
        )
        self.profile = profile
        return self._reply(200, {"profile": profile.to_dict()})

    # -- envelope plumbing ----------------------------------------------------

    def _sign_envelope(
        self,
        tx_type: TxType,
        body: dict,
        anchor: PayloadAnchor,
        visibility: Visibility,
    ) -> TransactionEnvelope:
        return ledger.sign_envelope(
            self.node.keypair,
            self.node.cert,
            tx_type,
            body,
            anchor,
            visibility,
            nonce=self._next_envelope_nonce(),
            created_at=self._now(),
        )

    def _revoke_envelope(self, target_cert_id: str, reason: str) -> TransactionEnvelope:
        body = {"cert_serial": target_cert_id, "reason": reason}
        doc = canonical_encode({"op": "revoke_cert", **body})
        address = self.node.cas.put(doc)
        self.node.broadcast_cas(address, doc)
        return self._sign_envelope(
            TxType.REVOKE_CERT,
            body,
            PayloadAnchor(AnchorKind.CONTENT_ADDRESS, address),
            ledger.broadcast(),
        )

    def _scenario_envelope(self, scenario: str, kind: str, detail: str) -> TransactionEnvelope:
        body = {"scenario": scenario, "kind": kind, "detail": detail}
        doc = canonical_encode({"op": "scenario_event", **body})
        address = self.node.cas.put(doc)
        self.node.broadcast_cas(address, doc)
        return self._sign_envelope(
            TxType.SCENARIO_EVENT,
            body,
            PayloadAnchor(AnchorKind.CONTENT_ADDRESS, address),
            ledger.broadcast(),
        )

    def _queue_submit(
        self, request_id: str, kind: str, envelope: TransactionEnvelope, internal: bool = False
    ) -> PendingSubmit:
        pending = PendingSubmit(
            request_id=request_id,
            kind=kind,
            deadline=self._now() + DEFAULT_BUDGET_TICKS,
            envelope=envelope,
            internal=internal,
        )
        self.pending[request_id] = pending
        self._send_submit(pending)
        return pending

    def submit_admin(self, kind: str, envelope: TransactionEnvelope, note: str) -> str:
        """Gateway-initiated transaction (detection responses, audit records)."""
        self._self_counter += 1
        request_id = f"self/{self.org}/{self._self_counter}"
        self.admin_actions.append(
            {"request_id": request_id, "kind": kind, "note": note, "tx_id": envelope.tx_id.hex()}
        )
        self._queue_submit(request_id, kind, envelope, internal=True)
        return envelope.tx_id.hex()

    def _send_submit(self, pending: PendingSubmit) -> None:
        orderers = self.node.orderers
        target = orderers[pending.target_idx % len(orderers)]
        self.node.send(
            target,
            "submit",
            {
                "request_id": pending.request_id,
                "origin_org": self.org,
                "envelope": pending.envelope.to_dict(),
            },
        )
        pending.next_retry = self._now() + SUBMIT_RETRY_TICKS

    # -- private transfer protocol (sender side) -------------------------------

    def _send_hello(self, transfer: Transfer) -> None:
        transfer.stage = "hello"
        transfer.attempts += 1
        transfer.last_action = self._now()
        auth = self.node.keypair.sign(
            dataplane.private_auth_payload(
                self.org, transfer.receiver_org, transfer.payload_hash, transfer.attempts
            )
        )
        self.node.send(
            transfer.receiver_org,
            "xfer_hello",
            {
                "transfer_id": transfer.transfer_id,
                "sender_org": self.org,
                "sender_cert_id": self.node.cert.cert_id,
                "payload_hash": transfer.payload_hash,
                "nonce": transfer.attempts,
                "auth": auth,
            },
        )

    def _on_hello_ack(self, src: str, body: dict) -> None:
        transfer = self._sender_transfer(body.get("transfer_id"))
        if transfer is None or transfer.stage != "hello":
            return
        receiver_cert = self._org_cert(transfer.receiver_org)
        ack_payload = canonical_encode(
            {
                "transfer_id": transfer.transfer_id,
                "payload_hash": transfer.payload_hash,
                "receiver": transfer.receiver_org,
            }
        )
        if receiver_cert is None or not identity.verify_signature(
            receiver_cert,
            ack_payload,
            body.get("ack", b""),
            self._rl_view(),
            self._now(),
            self.node.root_bundle,
        ):
            self.node.detect("transfer-auth", {"transfer_id": transfer.transfer_id})
            return
        transfer.stage = "payload"
        transfer.last_action = self._now()
        envelope = dataplane.make_private_envelope(
            self._party(), receiver_cert, transfer.payload, transfer.attempts, self.node.rng
        )
        self.node.send(
            transfer.receiver_org,
            "xfer_payload",
            {"transfer_id": transfer.transfer_id, "envelope": envelope.to_dict()},
        )

    def _on_receipt(self, src: str, body: dict) -> None:
        transfer = self._sender_transfer(body.get("transfer_id"))
        if transfer is None:
            return
        pending = self.pending.get(transfer.request_id)
        if pending is None:
            return
        receiver_cert = self._org_cert(transfer.receiver_org)
        receipt_payload = canonical_encode(
            {
                "transfer_id": transfer.transfer_id,
                "payload_hash": transfer.payload_hash,
                "accept": bool(body.get("accept")),
            }
        )
        if receiver_cert is None or not identity.verify_signature(
            receiver_cert,
            receipt_payload,
            body.get("receipt", b""),
            self._rl_view(),
            self._now(),
            self.node.root_bundle,
        ):
            self.node.detect("transfer-auth", {"transfer_id": transfer.transfer_id})
            return
        if not body.get("accept"):
            reasons = [str(r) for r in body.get("reasons", [])]
            self.pending.pop(transfer.request_id, None)
            self._respond(
                transfer.request_id,
                409,
                {"reasons": reasons or ["rejected"]},
                "receiver rejected payload",
            )
            return
        transfer.stage = "done"
        self.node.offchain.put(transfer.payload, counterpart=transfer.receiver_org)
        envelope = self._sign_envelope(
            TxType.POST_FAKTUR,
            {
                "nsfp": pending.detail["nsfp"],
                "faktur_hash": transfer.payload_hash.hex(),
                "year": pending.detail["year"],
            },
            PayloadAnchor(AnchorKind.PAYLOAD_HASH, transfer.payload_hash.hex()),
            ledger.private(self.org, transfer.receiver_org),
        )
        pending.envelope = envelope
        pending.stage = "submit"
        self._send_submit(pending)

    def _on_reject(self, src: str, body: dict) -> None:
        transfer = self._sender_transfer(body.get("transfer_id"))
        if transfer is None:
            return
        # Retry from the top with a fresh envelope; the budget caps attempts.
        transfer.stage = "retry"
        transfer.last_action = self._now()

    def _sender_transfer(self, transfer_id) -> Transfer | None:
        for pending in self.pending.values():
            if pending.transfer and pending.transfer.transfer_id == transfer_id:
                return pending.transfer
        return None

    def _party(self) -> dataplane.Party:
        return dataplane.Party(
            cert=self.node.cert,
            keypair=self.node.keypair,
            offchain=self.node.offchain,
            cas=self.node.cas,
        )

    def _org_cert(self, org: str) -> Certificate | None:
        live = [
            cert
            for cert in self.node.certs.values()
            if cert.subject == org and cert.cert_id not in self.state.cert_revocations
        ]
        return live[-1] if live else None

    # -- private transfer protocol (receiver side) ------------------------------

    def _on_hello(self, src: str, body: dict) -> None:
        transfer_id = body.get("transfer_id")
        sender_cert = self.node.certs.get(body.get("sender_cert_id", ""))
        payload_hash = body.get("payload_hash")
        if (
            not isinstance(transfer_id, str)
            or sender_cert is None
            or not isinstance(payload_hash, bytes)
        ):
            self.node.detect("transfer-auth", {"from": src, "reason": "malformed hello"})
            return
        auth_payload = dataplane.private_auth_payload(
            sender_cert.subject, self.org, payload_hash, body.get("nonce", 0)
        )
        decision = identity.verify_signature(
            sender_cert,
            auth_payload,
            body.get("auth", b""),
            self._rl_view(),
            self._now(),
            self.node.root_bundle,
        )
        if not decision.allowed:
            self.node.detect(
                "transfer-auth", {"from": src, "reason": decision.reason}
            )
            self.node.send(
                sender_cert.subject,
                "xfer_reject",
                {"transfer_id": transfer_id, "reason": "auth"},
            )
            return
        self.incoming[transfer_id] = IncomingTransfer(
            transfer_id=transfer_id,
            sender_org=sender_cert.subject,
            sender_cert_id=sender_cert.cert_id,
            payload_hash=payload_hash,
        )
        ack = self.node.keypair.sign(
            canonical_encode(
                {
                    "transfer_id": transfer_id,
                    "payload_hash": payload_hash,
                    "receiver": self.org,
                }
            )
        )
        self.node.send(
            sender_cert.subject,
            "xfer_hello_ack",
            {"transfer_id": transfer_id, "ack": ack},
        )

    def _on_payload(self, src: str, body: dict) -> None:
        transfer_id = body.get("transfer_id")
        incoming = self.incoming.get(transfer_id)
        if incoming is None:
            return
        sender_cert = self.node.certs.get(incoming.sender_cert_id)
        try:
            envelope = PrivateEnvelope.from_dict(body.get("envelope", {}))
            plaintext = dataplane.open_private_envelope(
                self._party(),
                envelope,
                sender_cert,
                self._rl_view(),
                self._now(),
                self.node.root_bundle,
            )
        except dataplane.DecryptFailure:
            self.node.detect("decrypt-failure", {"transfer_id": transfer_id, "from": src})
            self._send_transfer_reject(incoming, "decrypt")
            return
        except (dataplane.AuthFailure, dataplane.IntegrityFailure, dataplane.DataplaneError) as exc:
            self.node.detect(
                "transfer-auth", {"transfer_id": transfer_id, "reason": type(exc).__name__}
            )
            self._send_transfer_reject(incoming, "auth")
            return
        if sha256(plaintext) != incoming.payload_hash:
            self.node.detect("hash-mismatch", {"transfer_id": transfer_id})
            self._send_transfer_reject(incoming, "integrity")
            return
        reasons = self._validate_payload(plaintext, incoming.sender_org)
        accept = not reasons
        if accept:
            self.node.offchain.put(plaintext, counterpart=incoming.sender_org)
        receipt = self.node.keypair.sign(
            canonical_encode(
                {
                    "transfer_id": transfer_id,
                    "payload_hash": incoming.payload_hash,
                    "accept": accept,
                }
            )
        )
        self.node.send(
            incoming.sender_org,
            "xfer_receipt",
            {
                "transfer_id": transfer_id,
                "accept": accept,
                "reasons": reasons,
                "receipt": receipt,
            },
        )
        if accept:
            del self.incoming[transfer_id]

    def _send_transfer_reject(self, incoming: IncomingTransfer, reason: str) -> None:
        self.node.send(
            incoming.sender_org,
            "xfer_reject",
            {"transfer_id": incoming.transfer_id, "reason": reason},
        )

    def _validate_payload(self, plaintext: bytes, sender_org: str) -> list[str]:
        try:
            data = canonical_decode(plaintext)
            faktur = faktur_from_dict(data)
        except (EncodingError, GatewayError):
            return [chaincode.REASON_FORMAT]
        result = chaincode.validate_faktur(self.state, sender_org, faktur, self.config)
        return list(result.reasons)

    # -- ordering-side replies ---------------------------------------------------

    def _on_submit_redirect(self, src: str, body: dict) -> None:
        pending = self.pending.get(body.get("request_id", ""))
        if pending is None or pending.stage != "submit":
            return
        hint = body.get("hint")
        if isinstance(hint, str) and hint in self.node.orderers:
            pending.target_idx = self.node.orderers.index(hint)
            self._send_submit(pending)
        else:
            pending.target_idx += 1
            pending.next_retry = self._now() + 2

    def _on_submit_reject(self, src: str, body: dict) -> None:
        request_id = body.get("request_id", "")
        pending = self.pending.pop(request_id, None)
        if pending is None:
            return
        reason = str(body.get("reason", "rejected"))
        status = 403 if "may not" in reason else 401
        self._respond(request_id, status, {"reasons": [reason]}, reason)

    # -- block ingestion -----------------------------------------------------------

    def _on_block(self, src: str, body: dict) -> None:
        try:
            block = Block.from_dict(body.get("block", {}))
        except ledger.LedgerError:
            self.node.detect("bad-block", {"from": src})
            return
        expected = self.chain.height + 1
        if block.number < expected:
            return
        if block.number > expected:
            self.block_buffer[block.number] = block
            self.node.send(src, "block_request", {"number": expected})
            return
        if not self._ingest(block, src):
            return
        while self.chain.height + 1 in self.block_buffer:
            queued = self.block_buffer.pop(self.chain.height + 1)
            if not self._ingest(queued, src):
                break
        if self.block_buffer and self.chain.height + 1 < min(self.block_buffer):
            self.node.send(src, "block_request", {"number": self.chain.height + 1})

    def _ingest(self, block: Block, src: str) -> bool:
        chain = self.chain
        ok = (
            block.number == chain.height + 1
            and block.prev_hash == chain.head().block_hash()
            and block.data_hash == ledger.data_hash_for(block.txs)
            and all(env.expected_tx_id() == env.tx_id for env in block.txs)
        )
        if ok:
            try:
                for env in block.txs:
                    ledger.check_envelope(env, chain, block.committed_at)
            except UnauthorizedTx:
                ok = False
        if not ok:
            self.node.detect("bad-block", {"from": src, "number": str(block.number)})
            self.node.send(src, "block_request", {"number": chain.height + 1})
            return False
        chain.blocks.append(block)
        chain.state = ledger.apply_committed(chain.state, block, chain.ctx)
        chain.state_hashes.append(chain.state.state_hash())
        self.node.trace("apply", {"node": self.org, "block": str(block.number)})
        self.on_block_applied(block)
        return True

    def on_block_applied(self, block: Block) -> None:
        """Derive events, resolve pendings, and run anti-entropy for one block."""
        new_rejections = self.state.rejections[self._rejection_cursor :]
        self._rejection_cursor = len(self.state.rejections)
        rejected = {r["tx_id"]: r["reasons"] for r in new_rejections}

        for env in block.txs:
            tx_hex = env.tx_id.hex()
            self.tx_coords[tx_hex] = block.number
            if env.tx_type is TxType.POST_FAKTUR:
                self.anchor_coords[env.payload_anchor.value] = tx_hex
                if env.payload_anchor.value in self.node.offchain.records:
                    self.node.offchain.set_tx_id(env.payload_anchor.value, tx_hex)
            reasons = rejected.get(tx_hex)
            self._append_event(block, env, reasons)
            if env.tx_type is TxType.POST_NSFP and env.visibility.kind is ledger.VisibilityKind.BROADCAST:
                address = env.payload_anchor.value
                if address not in self.node.cas.blobs:
                    self.node.request_cas(address)
            self._resolve_pending(env, block, reasons)

    def _append_event(self, block: Block, env: TransactionEnvelope, reasons) -> None:
        tx_hex = env.tx_id.hex()
        detail: dict = {"op": env.tx_type.value}
        if reasons:
            detail["reasons"] = list(reasons)
        if env.tx_type is TxType.POST_NSFP and not reasons:
            alloc = self.state.nsfp_allocations.get(tx_hex)
            if alloc:
                detail["owner"] = alloc.owner_org
                detail["serials"] = list(alloc.serials)
        elif env.tx_type is TxType.POST_FAKTUR:
            detail["nsfp"] = env.body.get("nsfp")
            detail["faktur_hash"] = env.payload_anchor.value
        elif env.tx_type is TxType.REVOKE_CERT:
            detail["cert_id"] = env.body.get("cert_serial")
        elif env.tx_type is TxType.SCENARIO_EVENT:
            detail["scenario"] = env.body.get("scenario")
            detail["event"] = env.body.get("kind")
        self.events.append(
            EventRecord(
                sequence=len(self.events),
                tx_id=tx_hex,
                kind=env.tx_type.value,
                visibility=env.visibility.to_dict(),
                status="rejected" if reasons else "accepted",
                detail=jsonable(detail),
            )
        )

    def _resolve_pending(self, env: TransactionEnvelope, block: Block, reasons) -> None:
        for request_id, pending in list(self.pending.items()):
            if pending.envelope is None or pending.envelope.tx_id != env.tx_id:
                continue
            del self.pending[request_id]
            if pending.internal:
                for action in self.admin_actions:
                    if action["request_id"] == request_id:
                        action["block_number"] = block.number
                        action["status"] = "rejected" if reasons else "committed"
                return
            if reasons:
                self._respond(request_id, 409, {"reasons": list(reasons)}, "rejected at apply")
                return
            body: dict = {"tx_id": env.tx_id.hex(), "block_number": block.number}
            if pending.kind == "nsfp":
                alloc = self.state.nsfp_allocations.get(env.tx_id.hex())
                if alloc:
                    body["serials"] = list(alloc.serials)
                    body["allocation_id"] = alloc.allocation_id
            elif pending.kind == "faktur":
                body["anchored_hash"] = env.payload_anchor.value
                body["nsfp"] = pending.detail.get("nsfp")
            elif pending.kind == "revoke":
                body["cert_id"] = env.body.get("cert_serial")
            self._respond(request_id, 200, body)
            return

    # -- anomaly response (tax authority only) -------------------------------------

    def _on_anomaly_alert(self, src: str, body: dict) -> None:
        if self.node.cert.role is not Role.DJP:
            return
        cert_id = body.get("cert_id")
        if not isinstance(cert_id, str) or cert_id in self.alert_handled:
            return
        if cert_id in self.state.cert_revocations:
            return
        self.alert_handled.add(cert_id)
        origin = str(body.get("origin", "?"))
        self.node.detect("credential-anomaly", {"cert_id": cert_id, "origin": origin})
        self.submit_admin(
            "revoke",
            self._revoke_envelope(cert_id, f"anomalous origin {origin}"),
            f"auto-revoke {cert_id}",
        )
        self.submit_admin(
            "scenario_event",
            self._scenario_envelope(
                "phishing", "detection", f"credential {cert_id} used from {origin}"
            ),
            "anomaly detection record",
        )

    # -- dispatch and timers ----------------------------------------------------------

    def on_message(self, src: str, kind: str, body: dict) -> None:
        handler = {
            "block": self._on_block,
            "cas_announce": self._on_cas_announce,
            "cas_request": self._on_cas_request,
            "cas_response": self._on_cas_announce,
            "xfer_hello": self._on_hello,
            "xfer_hello_ack": self._on_hello_ack,
            "xfer_payload": self._on_payload,
            "xfer_receipt": self._on_receipt,
            "xfer_reject": self._on_reject,
            "submit_redirect": self._on_submit_redirect,
            "submit_reject": self._on_submit_reject,
            "submit_ack": self._on_submit_ack,
            "anomaly_alert": self._on_anomaly_alert,
        }.get(kind)
        if handler is None:
            log.debug("%s: unhandled message kind %s from %s", self.org, kind, src)
            return
        handler(src, body)

    def _on_submit_ack(self, src: str, body: dict) -> None:
        pass

    def _on_cas_announce(self, src: str, body: dict) -> None:
        address = body.get("address")
        payload = body.get("payload")
        if not isinstance(address, str) or not isinstance(payload, bytes) or not payload:
            return
        if dataplane.content_address(payload) != address:
            self.node.detect("cas-mismatch", {"from": src})
            return
        self.node.cas.blobs.setdefault(address, payload)

    def _on_cas_request(self, src: str, body: dict) -> None:
        address = body.get("address")
        payload = self.node.cas.blobs.get(address)
        if payload is not None:
            self.node.send(src, "cas_response", {"address": address, "payload": payload})

    def on_tick(self, now: int) -> None:
        for request_id, pending in list(self.pending.items()):
            if now >= pending.deadline:
                del self.pending[request_id]
                if pending.internal:
                    continue
                self._respond(
                    request_id,
                    503,
                    {"reasons": ["ordering-unavailable"]},
                    "no commit within retry budget",
                )
                continue
            if pending.stage == "submit" and now >= pending.next_retry:
                pending.target_idx += 1
                self._send_submit(pending)
            elif pending.stage == "transfer" and pending.transfer is not None:
                transfer = pending.transfer
                stalled = now - transfer.last_action >= TRANSFER_RETRY_TICKS
                if transfer.stage == "retry" or (transfer.stage != "done" and stalled):
                    self._send_hello(transfer)


# -- faktur body parsing ---------------------------------------------------------


def faktur_from_body(body: dict, seller_org: str) -> Faktur:
    """Build a Faktur from an API request body; the gateway fixes the seller."""
    return faktur_from_dict({**body, "seller_org": seller_org})


def faktur_from_dict(data: dict) -> Faktur:
    try:
        items = tuple(
            LineItem(
                description=item["description"],
                quantity=item["quantity"],
                unit_price=item["unit_price"],
            )
            for item in data["line_items"]
        )
        return chaincode.make_faktur(
            nsfp=data["nsfp"],
            seller_org=data["seller_org"],
            buyer_tax_id=data["buyer_tax_id"],
            transaction_date=data["transaction_date"],
            line_items=items,
            tax_base=data["tax_base"],
            vat_amount=data["vat_amount"],
        )
    except (KeyError, TypeError, EncodingError) as exc:
        raise GatewayError(f"malformed faktur body: {exc}") from exc


def render_efaktur(gateway: Gateway, nsfp: str, caller: Certificate) -> EfakturDocument:
    """Printable invoice document with its verification hash and coordinates."""
    entry = gateway.state.faktur_index.get(nsfp)
    if entry is None:
        raise NotCommitted(nsfp)
    if caller.role is not Role.DJP and caller.subject != entry.seller_org:
        raise Forbidden(f"{caller.subject} is not a party to {nsfp}")
    hash_hex = entry.faktur_hash.hex()
    try:
        payload = gateway.node.offchain.get(hash_hex)
    except dataplane.DataplaneError as exc:
        raise NotCommitted(f"payload for {nsfp} unavailable here") from exc
    data = canonical_decode(payload)
    tx_hex = gateway.anchor_coords.get(hash_hex)
    if tx_hex is None:
        raise NotCommitted(nsfp)
    profile = gateway.profile
    return EfakturDocument(
        nsfp=data["nsfp"],
        seller_org=data["seller_org"],
        seller_name=profile.display_name if profile else entry.seller_org,
        buyer_tax_id=data["buyer_tax_id"],
        transaction_date=data["transaction_date"],
        line_items=data["line_items"],
        tax_base=data["tax_base"],
        vat_amount=data["vat_amount"],
        verification_hash=hash_hex,
        block_number=gateway.tx_coords[tx_hex],
        tx_id=tx_hex,
    )
