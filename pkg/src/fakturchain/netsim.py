"""Deterministic single-process network simulator.

Time is an integer tick. Every message sent at tick T is delivered at T+1
unless a fault rule drops, delays, or tampers with it. All randomness comes
from sub-generators derived from the config seed, so two networks spawned
from equal configs produce identical traces, chains, and states tick for
tick.

Node kinds: orderer nodes run the consensus state machine and seal blocks;
org nodes hold a chain replica, the off-chain stores, and a Gateway; attacker
nodes are inert mailboxes a test or scenario drives by hand.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

from . import consensus, crypto, dataplane, identity, ledger
from .chaincode import VatConfig
from .consensus import NodeRole, RaftNode
from .encoding import EncodingError, canonical_decode, canonical_encode, sha256
from .gateway import ApiRequest, ApiResponse, Gateway, jsonable, make_request
from .identity import CertificateAuthority, Role
from .ledger import Block, TransactionEnvelope, UnauthorizedTx

DELIVERY_DELAY = 1
HEAD_ANNOUNCE_TICKS = 5
CALL_BUDGET_TICKS = 400


class NetsimError(Exception):
    pass


class BadConfig(NetsimError):
    pass


class FaultKind(str, Enum):
    DROP = "drop"
    DELAY = "delay"
    TAMPER = "tamper"
    PARTITION = "partition"
    CRASH = "crash"
    STEAL_CREDENTIAL = "steal_credential"
    ENCRYPT_STORE = "encrypt_store"


@dataclass(frozen=True)
class FaultRule:
    """One fault active over the tick window [start, end).

    Message faults (drop/delay/tamper) match in-flight messages by node and
    kind; empty filters match everything. Partition splits the node set into
    the listed groups plus one implicit group for everyone unlisted. Node
    faults (crash/steal/encrypt) fire at window start against `nodes`/`org`.
    """

    kind: FaultKind
    start: int
    end: int
    nodes: tuple[str, ...] = ()
    message_kinds: tuple[str, ...] = ()
    groups: tuple[tuple[str, ...], ...] = ()
    delay: int = 5
    offset: int | None = None
    mask: int = 0x01
    fraction: float = 0.5
    org: str = ""

    def active(self, tick: int) -> bool:
        return self.start <= tick < self.end

    def matches(self, msg: Message) -> bool:
        if self.nodes and msg.src not in self.nodes and msg.dst not in self.nodes:
            return False
        if self.message_kinds and msg.kind not in self.message_kinds:
            return False
        return True


@dataclass(frozen=True)
class OrgSpec:
    name: str
    role: Role


@dataclass(frozen=True)
class NetworkConfig:
    orgs: tuple[OrgSpec, ...]
    orderers: tuple[str, ...]
    seed: int = 0
    fault_rules: tuple[FaultRule, ...] = ()
    tick_limit: int = 50_000
    vat: VatConfig = VatConfig()


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    seq: int
    kind: str
    subject: tuple[tuple[str, str], ...]
    digest: str = ""

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "seq": self.seq,
            "kind": self.kind,
            "subject": dict(self.subject),
            "digest": self.digest,
        }


@dataclass
class Message:
    seq: int
    src: str
    dst: str
    kind: str
    payload: bytes
    deliver_at: int
    delayed_by: set[int] = field(default_factory=set)


@dataclass(frozen=True)
class WireRecord:
    tick: int
    src: str
    dst: str
    kind: str
    payload: bytes


def _sub_rng(seed: int, label: str) -> random.Random:
    return random.Random(f"{seed}/{label}")


class OrdererNode:
    """Consensus member: orders envelopes, seals blocks, serves catch-up."""

    def __init__(self, node_id: str, network: Network, raft: RaftNode, chain: ledger.Chain):
        self.node_id = node_id
        self.network = network
        self.raft = raft
        self.chain = chain
        self.staged: list[TransactionEnvelope] = []
        self.queued_ids: set[bytes] = set()
        self._was_leader = False

    def send(self, dst: str, kind: str, body: dict) -> None:
        self.network.send(self.node_id, dst, kind, body)

    def _route_raft(self, msgs) -> None:
        for msg in msgs:
            self.send(msg.dst, "raft", consensus.message_to_dict(msg))

    def _note_role(self) -> None:
        is_leader = self.raft.role is NodeRole.LEADER
        if is_leader and not self._was_leader:
            self.network.trace(
                "elect", {"node": self.node_id, "term": str(self.raft.current_term)}
            )
        self._was_leader = is_leader

    def receive(self, src: str, kind: str, body: dict) -> None:
        if kind == "raft":
            try:
                msg = consensus.message_from_dict(body)
                outs, committed = self.raft.handle_message(msg, self.network.tick)
            except (KeyError, TypeError, ValueError, consensus.ConsensusError):
                self.network.detect(self.node_id, "raft-decode", {"from": src})
                return
            self._note_role()
            self._route_raft(outs)
            self._commit(committed)
        elif kind == "submit":
            self._on_submit(src, body)
        elif kind == "block_request":
            number = body.get("number")
            if isinstance(number, int) and 1 <= number <= self.chain.height:
                self.send(src, "block", {"block": self.chain.blocks[number].to_dict()})

    def _on_submit(self, src: str, body: dict) -> None:
        request_id = str(body.get("request_id", ""))
        try:
            env = TransactionEnvelope.from_dict(body.get("envelope", {}))
        except ledger.LedgerError:
            self.network.detect(self.node_id, "bad-envelope", {"from": src})
            return
        cert = self.network.certs.get(env.creator_cert_id)
        if cert is not None and src != cert.subject:
            self.network.detect(
                self.node_id,
                "anomalous-origin",
                {"cert_id": cert.cert_id, "origin": src},
            )
            self.send(
                self.network.djp_org,
                "anomaly_alert",
                {"cert_id": cert.cert_id, "origin": src, "tx_id": env.tx_id},
            )
        if self.raft.role is not NodeRole.LEADER:
            self.send(
                src,
                "submit_redirect",
                {"request_id": request_id, "hint": self.raft.leader_id},
            )
            return
        try:
            ledger.check_envelope(env, self.chain, self.network.tick)
        except UnauthorizedTx as exc:
            self.send(src, "submit_reject", {"request_id": request_id, "reason": str(exc)})
            return
        if env.tx_id.hex() in self.chain.state.seen_tx_ids or env.tx_id in self.queued_ids:
            self.send(src, "submit_ack", {"request_id": request_id, "status": "known"})
            return
        self.queued_ids.add(env.tx_id)
        self.staged.append(env)
        self.send(src, "submit_ack", {"request_id": request_id, "status": "staged"})

    def _commit(self, entries) -> None:
        for entry in entries:
            envs = []
            for item in entry.batch:
                try:
                    envs.append(TransactionEnvelope.from_dict(item))
                except ledger.LedgerError:
                    self.network.detect(self.node_id, "bad-envelope", {"at": "commit"})
            valid = []
            for env in envs:
                self.queued_ids.discard(env.tx_id)
                try:
                    ledger.check_envelope(env, self.chain, entry.created_at)
                except UnauthorizedTx as exc:
                    self.network.trace(
                        "drop_tx",
                        {"node": self.node_id, "tx_id": env.tx_id.hex(), "reason": str(exc)},
                    )
                    continue
                valid.append(env)
            if not valid:
                continue
            block = ledger.append_block(self.chain, valid, entry.term, entry.created_at)
            self.network.trace(
                "commit", {"node": self.node_id, "block": str(block.number)}
            )
            if self.raft.role is NodeRole.LEADER:
                self._broadcast_block(block)

    def _broadcast_block(self, block: Block) -> None:
        payload = {"block": block.to_dict()}
        for org in self.network.org_names():
            self.send(org, "block", payload)

    def on_tick(self, now: int) -> None:
        self._route_raft(self.raft.tick(now))
        self._note_role()
        if self.raft.role is not NodeRole.LEADER:
            return
        if self.staged:
            batch = tuple(env.to_dict() for env in self.staged)
            self.staged = []
            try:
                msgs, committed = self.raft.submit(batch, now)
            except consensus.NotLeader:
                return
            self._route_raft(msgs)
            self._commit(committed)
        elif self.chain.height > 0 and now % HEAD_ANNOUNCE_TICKS == 0:
            self._broadcast_block(self.chain.head())

    def on_revive(self, now: int) -> None:
        self.raft.election_deadline = now + self.raft.rng.randrange(
            consensus.ELECTION_TIMEOUT_MIN, consensus.ELECTION_TIMEOUT_MAX
        )


class OrgNode:
    """Org member: chain replica, off-chain stores, and the gateway."""

    def __init__(
        self,
        org: str,
        network: Network,
        cert: identity.Certificate,
        keypair: crypto.KeyPair,
        chain: ledger.Chain,
    ):
        self.org = org
        self.network = network
        self.cert = cert
        self.keypair = keypair
        self.chain = chain
        self.cas = dataplane.CasStore(org)
        self.offchain = dataplane.OffchainStore(org)
        self.rng = _sub_rng(network.seed, f"org/{org}")
        self.api_nonce = 0
        self.gateway = Gateway(self)

    @property
    def now(self) -> int:
        return self.network.tick

    @property
    def certs(self) -> dict[str, identity.Certificate]:
        return self.network.certs

    @property
    def root_bundle(self) -> bytes:
        return self.network.root_bundle

    @property
    def orderers(self) -> list[str]:
        return list(self.network.config.orderers)

    @property
    def config(self) -> VatConfig:
        return self.network.vat

    def send(self, dst: str, kind: str, body: dict) -> None:
        self.network.send(self.org, dst, kind, body)

    def trace(self, kind: str, subject: dict) -> None:
        self.network.trace(kind, subject)

    def detect(self, reason: str, detail: dict) -> None:
        self.network.detect(self.org, reason, detail)

    def broadcast_cas(self, address: str, payload: bytes) -> None:
        for org in self.network.org_names():
            if org != self.org:
                self.send(org, "cas_announce", {"address": address, "payload": payload})

    def request_cas(self, address: str) -> None:
        for org in self.network.org_names():
            if org != self.org:
                self.send(org, "cas_request", {"address": address})

    def receive(self, src: str, kind: str, body: dict) -> None:
        self.gateway.on_message(src, kind, body)

    def on_tick(self, now: int) -> None:
        self.gateway.on_tick(now)

    def on_revive(self, now: int) -> None:
        pass

    def next_nonce(self) -> int:
        self.api_nonce += 1
        return self.api_nonce


class AttackerNode:
    """A mailbox with a network address; tests and scenarios drive it."""

    def __init__(self, node_id: str, network: Network):
        self.node_id = node_id
        self.network = network
        self.inbox: list[tuple[str, str, dict]] = []

    def send(self, dst: str, kind: str, body: dict) -> None:
        self.network.send(self.node_id, dst, kind, body)

    def receive(self, src: str, kind: str, body: dict) -> None:
        self.inbox.append((src, kind, body))

    def on_tick(self, now: int) -> None:
        pass

    def on_revive(self, now: int) -> None:
        pass


class Network:
    """The simulated network: nodes, queue, clock, faults, and trace."""

    def __init__(self, config: NetworkConfig):
        _validate_config(config)
        self.config = config
        self.seed = config.seed
        self.tick = 0
        self.trace_log: list[TraceEvent] = []
        self.wire_log: list[WireRecord] = []
        self.queue: dict[int, list[Message]] = {}
        self.fault_rules: list[FaultRule] = list(config.fault_rules)
        self.down: set[str] = set()
        self.stolen: dict[str, tuple[crypto.KeyPair, identity.Certificate]] = {}
        self._msg_seq = 0
        self._trace_seq = 0

        djp = [spec.name for spec in config.orgs if spec.role is Role.DJP][0]
        self.djp_org = djp
        self.vat = (
            config.vat
            if config.vat.djp_org == djp
            else replace(config.vat, djp_org=djp)
        )

        self.ca = CertificateAuthority(_sub_rng(config.seed, "ca"))
        self.root_bundle = self.ca.root_bundle
        self.certs: dict[str, identity.Certificate] = {}
        self.keypairs: dict[str, crypto.KeyPair] = {}

        members = [(spec.name, spec.role) for spec in config.orgs]
        members += [(name, Role.ORDERER) for name in config.orderers]
        for name, role in members:
            kp = crypto.generate_keypair(_sub_rng(config.seed, f"key/{name}"))
            cert = identity.issue_certificate(self.ca, name, role, kp.public_bundle)
            self.keypairs[name] = kp
            self.certs[cert.cert_id] = cert

        ctx = ledger.ApplyContext(certs=self.certs, config=self.vat)
        self.ctx = ctx
        self.nodes: dict[str, object] = {}
        self.orderer_nodes: dict[str, OrdererNode] = {}
        self.org_nodes: dict[str, OrgNode] = {}
        for name in config.orderers:
            raft = RaftNode(name, list(config.orderers), _sub_rng(config.seed, f"raft/{name}"))
            node = OrdererNode(name, self, raft, ledger.Chain(ctx))
            self.orderer_nodes[name] = node
            self.nodes[name] = node
        for spec in config.orgs:
            cert = self._cert_for(spec.name)
            node = OrgNode(spec.name, self, cert, self.keypairs[spec.name], ledger.Chain(ctx))
            self.org_nodes[spec.name] = node
            self.nodes[spec.name] = node
        self.trace("spawn", {"orgs": ",".join(self.org_names()), "orderers": ",".join(config.orderers)})

    # -- lookups ---------------------------------------------------------

    def _cert_for(self, subject: str) -> identity.Certificate:
        for cert in self.certs.values():
            if cert.subject == subject:
                return cert
        raise NetsimError(f"no certificate for {subject}")

    def org_names(self) -> list[str]:
        return [spec.name for spec in self.config.orgs]

    def org(self, name: str) -> OrgNode:
        return self.org_nodes[name]

    def orderer(self, name: str) -> OrdererNode:
        return self.orderer_nodes[name]

    def leader(self) -> str | None:
        for name, node in self.orderer_nodes.items():
            if node.raft.role is NodeRole.LEADER and name not in self.down:
                return name
        return None

    def heights(self) -> dict[str, int]:
        out = {name: node.chain.height for name, node in self.orderer_nodes.items()}
        out.update({name: node.chain.height for name, node in self.org_nodes.items()})
        return out

    # -- trace ------------------------------------------------------------

    def trace(self, kind: str, subject: dict, digest: str = "") -> None:
        self._trace_seq += 1
        self.trace_log.append(
            TraceEvent(
                tick=self.tick,
                seq=self._trace_seq,
                kind=kind,
                subject=tuple(sorted((str(k), str(v)) for k, v in subject.items())),
                digest=digest,
            )
        )

    def detect(self, node: str, reason: str, detail: dict) -> None:
        self.trace("detect", {"node": node, "reason": reason, **detail})

    def detections(self, reason: str | None = None) -> list[TraceEvent]:
        out = []
        for ev in self.trace_log:
            if ev.kind != "detect":
                continue
            if reason is not None and dict(ev.subject).get("reason") != reason:
                continue
            out.append(ev)
        return out

    # -- transport ----------------------------------------------------------

    def send(self, src: str, dst: str, kind: str, body: dict) -> None:
        payload = canonical_encode({"kind": kind, "body": body})
        self._msg_seq += 1
        msg = Message(
            seq=self._msg_seq,
            src=src,
            dst=dst,
            kind=kind,
            payload=payload,
            deliver_at=self.tick + DELIVERY_DELAY,
        )
        self.queue.setdefault(msg.deliver_at, []).append(msg)
        self.wire_log.append(WireRecord(self.tick, src, dst, kind, payload))
        self.trace(
            "send",
            {"src": src, "dst": dst, "kind": kind},
            digest=sha256(payload)[:8].hex(),
        )

    def _group_of(self, rule: FaultRule, node: str) -> int:
        for idx, group in enumerate(rule.groups):
            if node in group:
                return idx
        return len(rule.groups)

    def _deliver(self, msg: Message) -> None:
        if msg.dst not in self.nodes:
            self.trace("drop", {"dst": msg.dst, "kind": msg.kind, "reason": "unknown-node"})
            return
        if msg.dst in self.down:
            self.trace("drop", {"dst": msg.dst, "kind": msg.kind, "reason": "crashed"})
            return
        for idx, rule in enumerate(self.fault_rules):
            if not rule.active(self.tick):
                continue
            if rule.kind is FaultKind.DROP and rule.matches(msg):
                self.trace(
                    "drop",
                    {"src": msg.src, "dst": msg.dst, "kind": msg.kind, "reason": "fault"},
                )
                return
            if rule.kind is FaultKind.DELAY and rule.matches(msg) and idx not in msg.delayed_by:
                msg.delayed_by.add(idx)
                msg.deliver_at = self.tick + max(1, rule.delay)
                self.queue.setdefault(msg.deliver_at, []).append(msg)
                self.trace(
                    "delay",
                    {"src": msg.src, "dst": msg.dst, "kind": msg.kind, "until": str(msg.deliver_at)},
                )
                return
            if rule.kind is FaultKind.TAMPER and rule.matches(msg):
                mutated = bytearray(msg.payload)
                offset = rule.offset if rule.offset is not None else len(mutated) // 2
                offset = min(max(offset, 0), len(mutated) - 1)
                mutated[offset] ^= rule.mask or 0x01
                msg.payload = bytes(mutated)
                self.wire_log.append(
                    WireRecord(self.tick, msg.src, msg.dst, msg.kind, msg.payload)
                )
                self.trace(
                    "tamper",
                    {"src": msg.src, "dst": msg.dst, "kind": msg.kind, "offset": str(offset)},
                )
            if rule.kind is FaultKind.PARTITION:
                if self._group_of(rule, msg.src) != self._group_of(rule, msg.dst):
                    self.trace(
                        "drop",
                        {"src": msg.src, "dst": msg.dst, "kind": msg.kind, "reason": "partition"},
                    )
                    return
        try:
            decoded = canonical_decode(msg.payload)
            kind = decoded["kind"]
            body = decoded["body"]
            if not isinstance(kind, str) or not isinstance(body, dict):
                raise EncodingError("malformed frame")
        except (EncodingError, KeyError, TypeError):
            self.detect(msg.dst, "decode-failure", {"from": msg.src, "kind": msg.kind})
            return
        self.trace("deliver", {"src": msg.src, "dst": msg.dst, "kind": kind})
        self.nodes[msg.dst].receive(msg.src, kind, body)

    def _apply_window_faults(self) -> None:
        for idx, rule in enumerate(self.fault_rules):
            if rule.kind is FaultKind.CRASH:
                for node in rule.nodes:
                    if self.tick == rule.start and node not in self.down:
                        self.down.add(node)
                        self.trace("crash", {"node": node})
                    elif self.tick == rule.end and node in self.down:
                        self.down.discard(node)
                        self.nodes[node].on_revive(self.tick)
                        self.trace("revive", {"node": node})
            elif rule.kind is FaultKind.STEAL_CREDENTIAL and self.tick == rule.start:
                self.steal_credential(rule.org)
            elif rule.kind is FaultKind.ENCRYPT_STORE and self.tick == rule.start:
                self._encrypt_store(rule, idx)

    def steal_credential(self, org: str) -> tuple[crypto.KeyPair, identity.Certificate]:
        node = self.org_nodes[org]
        self.stolen[org] = (node.keypair, node.cert)
        self.trace("steal", {"org": org})
        return self.stolen[org]

    def _encrypt_store(self, rule: FaultRule, idx: int) -> None:
        node = self.org_nodes[rule.org]
        rng = _sub_rng(self.seed, f"fault/{idx}/{rule.org}")
        keys = sorted(node.offchain.records)
        count = max(1, int(len(keys) * rule.fraction)) if keys else 0
        hit = rng.sample(keys, min(count, len(keys))) if keys else []
        for key in hit:
            record = node.offchain.records[key]
            keystream = bytes(rng.randrange(1, 256) for _ in record.plaintext)
            record.plaintext = bytes(b ^ k for b, k in zip(record.plaintext, keystream))
        self.trace("encrypt_store", {"org": rule.org, "count": str(len(hit))})

    # -- clock ----------------------------------------------------------------

    def step(self) -> None:
        if self.tick >= self.config.tick_limit:
            raise NetsimError(f"tick limit {self.config.tick_limit} reached")
        self.tick += 1
        self._apply_window_faults()
        for msg in self.queue.pop(self.tick, []):
            if msg.deliver_at != self.tick:
                continue
            self._deliver(msg)
        for name in self.config.orderers:
            if name not in self.down:
                self.orderer_nodes[name].on_tick(self.tick)
        for name in self.org_names():
            if name not in self.down:
                self.org_nodes[name].on_tick(self.tick)

    def run_for(self, ticks: int) -> None:
        for _ in range(ticks):
            self.step()

    def run_until(self, predicate, max_ticks: int = CALL_BUDGET_TICKS) -> bool:
        for _ in range(max_ticks):
            if predicate(self):
                return True
            self.step()
        return predicate(self)

    # -- API convenience ---------------------------------------------------------

    def call(self, org: str, request: ApiRequest, max_ticks: int = CALL_BUDGET_TICKS) -> ApiResponse:
        gateway = self.org_nodes[org].gateway
        response = gateway.handle(request)
        if response is not None:
            return response
        request_id = request.request_id
        self.run_until(lambda net: request_id in gateway.responses, max_ticks)
        if request_id in gateway.responses:
            return gateway.responses.pop(request_id)
        gateway.pending.pop(request_id, None)
        return ApiResponse(503, {}, gateway.chain.height, "no response within budget")

    def call_many(
        self, calls: list[tuple[str, ApiRequest]], max_ticks: int = CALL_BUDGET_TICKS
    ) -> list[ApiResponse]:
        """Dispatch several requests at once and collect every response."""
        results: dict[int, ApiResponse] = {}
        waiting: list[tuple[int, Gateway, str]] = []
        for i, (org, request) in enumerate(calls):
            gateway = self.org_nodes[org].gateway
            response = gateway.handle(request)
            if response is not None:
                results[i] = response
            else:
                waiting.append((i, gateway, request.request_id))
        self.run_until(
            lambda net: all(rid in gw.responses for _, gw, rid in waiting), max_ticks
        )
        for i, gateway, request_id in waiting:
            if request_id in gateway.responses:
                results[i] = gateway.responses.pop(request_id)
            else:
                gateway.pending.pop(request_id, None)
                results[i] = ApiResponse(
                    503, {}, gateway.chain.height, "no response within budget"
                )
        return [results[i] for i in range(len(calls))]

    def build_request(
        self,
        org: str,
        method: str,
        path: str,
        body: dict | None = None,
        query: dict | None = None,
    ) -> ApiRequest:
        node = self.org_nodes[org]
        return make_request(
            node.keypair, node.cert, method, path, node.next_nonce(), body, query
        )

    def api(
        self,
        org: str,
        method: str,
        path: str,
        body: dict | None = None,
        query: dict | None = None,
        caller: str | None = None,
        max_ticks: int = CALL_BUDGET_TICKS,
    ) -> ApiResponse:
        """Sign a request as `caller` (default the org itself) and call `org`."""
        request = self.build_request(caller or org, method, path, body, query)
        return self.call(org, request, max_ticks)

    def ensure_attacker(self, name: str) -> AttackerNode:
        node = self.nodes.get(name)
        if isinstance(node, AttackerNode):
            return node
        if node is not None:
            raise NetsimError(f"{name} already names a member node")
        attacker = AttackerNode(name, self)
        self.nodes[name] = attacker
        return attacker

    def add_fault(self, rule: FaultRule) -> None:
        self.fault_rules.append(rule)

    def export_trace(self) -> list[dict]:
        return [ev.to_dict() for ev in self.trace_log]


def _validate_config(config: NetworkConfig) -> None:
    if not config.orderers:
        raise BadConfig("at least one orderer is required")
    djp = [spec for spec in config.orgs if spec.role is Role.DJP]
    pkp = [spec for spec in config.orgs if spec.role is Role.PKP]
    if len(djp) != 1:
        raise BadConfig(f"exactly one tax-authority org is required, got {len(djp)}")
    if not pkp:
        raise BadConfig("at least one taxable-enterprise org is required")
    if any(spec.role is Role.ORDERER for spec in config.orgs):
        raise BadConfig("orderers are named in config.orderers, not config.orgs")
    names = [spec.name for spec in config.orgs] + list(config.orderers)
    if len(set(names)) != len(names):
        raise BadConfig("node names must be unique")
    for rule in config.fault_rules:
        if rule.start >= rule.end:
            raise BadConfig(f"fault window [{rule.start}, {rule.end}) is empty")


def spawn_network(config: NetworkConfig) -> Network:
    """Build a network from config; deterministic for equal configs."""
    return Network(config)


def default_config(seed: int = 0, pkp_count: int = 3, orderer_count: int = 3) -> NetworkConfig:
    orgs = tuple(
        [OrgSpec(f"pkp-{i:02d}", Role.PKP) for i in range(1, pkp_count + 1)]
        + [OrgSpec("djp", Role.DJP)]
    )
    orderers = tuple(f"orderer-{i}" for i in range(1, orderer_count + 1))
    return NetworkConfig(orgs=orgs, orderers=orderers, seed=seed)


def config_to_dict(config: NetworkConfig) -> dict:
    """JSON-safe form of a network config, inverse of config_from_dict."""
    out = {
        "orgs": [{"name": s.name, "role": s.role.value} for s in config.orgs],
        "orderers": list(config.orderers),
        "seed": config.seed,
        "tick_limit": config.tick_limit,
        "vat": asdict(config.vat),
    }
    if config.fault_rules:
        out["fault_rules"] = [
            {
                "kind": r.kind.value,
                "start": r.start,
                "end": r.end,
                "nodes": list(r.nodes),
                "message_kinds": list(r.message_kinds),
                "groups": [list(g) for g in r.groups],
                "delay": r.delay,
                "offset": r.offset,
                "mask": r.mask,
                "fraction": r.fraction,
                "org": r.org,
            }
            for r in config.fault_rules
        ]
    return out


def config_from_dict(data: dict) -> NetworkConfig:
    try:
        orgs = tuple(OrgSpec(o["name"], Role(o["role"])) for o in data["orgs"])
        rules = tuple(
            FaultRule(
                kind=FaultKind(r["kind"]),
                start=r["start"],
                end=r["end"],
                nodes=tuple(r.get("nodes", ())),
                message_kinds=tuple(r.get("message_kinds", ())),
                groups=tuple(tuple(g) for g in r.get("groups", ())),
                delay=r.get("delay", 5),
                offset=r.get("offset"),
                mask=r.get("mask", 0x01),
                fraction=r.get("fraction", 0.5),
                org=r.get("org", ""),
            )
            for r in data.get("fault_rules", ())
        )
        config = NetworkConfig(
            orgs=orgs,
            orderers=tuple(data["orderers"]),
            seed=data.get("seed", 0),
            fault_rules=rules,
            tick_limit=data.get("tick_limit", 50_000),
            vat=VatConfig(**data.get("vat", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BadConfig(f"malformed network config: {exc}") from exc
    _validate_config(config)
    return config


__all__ = [
    "AttackerNode",
    "BadConfig",
    "CALL_BUDGET_TICKS",
    "FaultKind",
    "FaultRule",
    "Message",
    "NetsimError",
    "Network",
    "NetworkConfig",
    "OrdererNode",
    "OrgNode",
    "OrgSpec",
    "TraceEvent",
    "WireRecord",
    "config_from_dict",
    "config_to_dict",
    "default_config",
    "jsonable",
    "spawn_network",
]
