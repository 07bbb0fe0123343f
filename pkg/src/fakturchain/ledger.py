"""Hash-chained block store and deterministic world-state replay.

Blocks carry signed transaction envelopes; an envelope records only a payload
anchor (a content address for broadcast data or a bare hash for private
exchanges), never payload bytes. The chain plus the apply context is a
complete recipe for the world state: folding committed blocks from genesis is
deterministic, so any two honest nodes agree byte-for-byte on every state
hash.

Persistence is an append-only byte stream of length-prefixed encoded blocks,
each followed by its own digest. The per-record digest localizes corruption:
any single-byte change in the stream is attributable to the record it landed
in, including the newest block, which no successor link covers yet.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from . import chaincode, crypto
from .chaincode import AppliedTx, VatConfig, WorldState
from .encoding import (
    DIGEST_WIDTH,
    ZERO_DIGEST,
    EncodingError,
    canonical_decode,
    canonical_encode,
    sha256,
)
from .identity import Action, Certificate, authorize


class LedgerError(Exception):
    pass


class UnauthorizedTx(LedgerError):
    pass


class EmptyBatch(LedgerError):
    pass


class NotFound(LedgerError):
    pass


class TxType(str, Enum):
    POST_NSFP = "post_nsfp"
    POST_FAKTUR = "post_faktur"
    REVOKE_CERT = "revoke_cert"
    SCENARIO_EVENT = "scenario_event"


_ACTION_FOR_TX: dict[TxType, Action] = {
    TxType.POST_NSFP: Action.POST_NSFP,
    TxType.POST_FAKTUR: Action.POST_FAKTUR,
    TxType.REVOKE_CERT: Action.REVOKE,
    TxType.SCENARIO_EVENT: Action.ADMIN,
}


class AnchorKind(str, Enum):
    CONTENT_ADDRESS = "content_address"
    PAYLOAD_HASH = "payload_hash"


@dataclass(frozen=True)
class PayloadAnchor:
    kind: AnchorKind
    value: str

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "value": self.value}


class VisibilityKind(str, Enum):
    BROADCAST = "broadcast"
    PRIVATE = "private"


@dataclass(frozen=True)
class Visibility:
    kind: VisibilityKind
    parties: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "parties": list(self.parties)}


def broadcast() -> Visibility:
    return Visibility(VisibilityKind.BROADCAST)


def private(sender_org: str, receiver_org: str) -> Visibility:
    return Visibility(VisibilityKind.PRIVATE, (sender_org, receiver_org))


@dataclass(frozen=True)
class TransactionEnvelope:
    tx_id: bytes
    tx_type: TxType
    creator_cert_id: str
    signature: bytes
    payload_anchor: PayloadAnchor
    visibility: Visibility
    nonce: int
    created_at: int
    body: dict

    def _fields_dict(self) -> dict:
        return {
            "tx_type": self.tx_type.value,
            "creator_cert_id": self.creator_cert_id,
            "payload_anchor": self.payload_anchor.to_dict(),
            "visibility": self.visibility.to_dict(),
            "nonce": self.nonce,
            "created_at": self.created_at,
            "body": self.body,
        }

    def signing_payload(self) -> bytes:
        return canonical_encode(self._fields_dict())

    def expected_tx_id(self) -> bytes:
        identified = self._fields_dict()
        identified["signature"] = self.signature
        return sha256(canonical_encode(identified))

    def to_dict(self) -> dict:
        out = self._fields_dict()
        out["signature"] = self.signature
        out["tx_id"] = self.tx_id
        return out

    @staticmethod
    def from_dict(data: dict) -> TransactionEnvelope:
        try:
            return TransactionEnvelope(
                tx_id=data["tx_id"],
                tx_type=TxType(data["tx_type"]),
                creator_cert_id=data["creator_cert_id"],
                signature=data["signature"],
                payload_anchor=PayloadAnchor(
                    AnchorKind(data["payload_anchor"]["kind"]),
                    data["payload_anchor"]["value"],
                ),
                visibility=Visibility(
                    VisibilityKind(data["visibility"]["kind"]),
                    tuple(data["visibility"]["parties"]),
                ),
                nonce=data["nonce"],
                created_at=data["created_at"],
                body=data["body"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LedgerError(f"malformed envelope record: {exc}") from exc


def sign_envelope(
    keypair: crypto.KeyPair,
    cert: Certificate,
    tx_type: TxType,
    body: dict,
    payload_anchor: PayloadAnchor,
    visibility: Visibility,
    nonce: int,
    created_at: int,
) -> TransactionEnvelope:
    env = TransactionEnvelope(
        tx_id=b"",
        tx_type=tx_type,
        creator_cert_id=cert.cert_id,
        signature=b"",
        payload_anchor=payload_anchor,
        visibility=visibility,
        nonce=nonce,
        created_at=created_at,
        body=body,
    )
    env = replace(env, signature=keypair.sign(env.signing_payload()))
    return replace(env, tx_id=env.expected_tx_id())


@dataclass(frozen=True)
class Block:
    number: int
    prev_hash: bytes
    data_hash: bytes
    txs: tuple[TransactionEnvelope, ...]
    committed_term: int
    committed_at: int

    def header_bytes(self) -> bytes:
        return canonical_encode(
            {
                "number": self.number,
                "prev_hash": self.prev_hash,
                "data_hash": self.data_hash,
                "committed_term": self.committed_term,
                "committed_at": self.committed_at,
            }
        )

    def block_hash(self) -> bytes:
        return sha256(self.header_bytes())

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "prev_hash": self.prev_hash,
            "data_hash": self.data_hash,
            "txs": [tx.to_dict() for tx in self.txs],
            "committed_term": self.committed_term,
            "committed_at": self.committed_at,
        }

    @staticmethod
    def from_dict(data: dict) -> Block:
        try:
            return Block(
                number=data["number"],
                prev_hash=data["prev_hash"],
                data_hash=data["data_hash"],
                txs=tuple(TransactionEnvelope.from_dict(t) for t in data["txs"]),
                committed_term=data["committed_term"],
                committed_at=data["committed_at"],
            )
        except (KeyError, TypeError) as exc:
            raise LedgerError(f"malformed block record: {exc}") from exc


def data_hash_for(txs: tuple[TransactionEnvelope, ...] | list[TransactionEnvelope]) -> bytes:
    return sha256(canonical_encode([tx.tx_id for tx in txs]))


def make_genesis() -> Block:
    return Block(
        number=0,
        prev_hash=ZERO_DIGEST,
        data_hash=data_hash_for([]),
        txs=(),
        committed_term=0,
        committed_at=0,
    )


@dataclass
class ApplyContext:
    """Everything replay needs besides the blocks themselves.

    Both fields are fixed at network bootstrap, so two nodes constructed from
    the same bootstrap data replay identically.
    """

    certs: dict[str, Certificate]
    config: VatConfig


@dataclass(frozen=True)
class ChainReport:
    ok: bool
    first_bad_block: int | None = None


@dataclass(frozen=True)
class AnchorInfo:
    tx_id: bytes
    payload_anchor: PayloadAnchor
    visibility: Visibility


class Chain:
    """A node's committed chain plus the world state folded from it."""

    def __init__(self, ctx: ApplyContext):
        self.ctx = ctx
        self.blocks: list[Block] = [make_genesis()]
        self.state: WorldState = WorldState()
        self.state_hashes: list[bytes] = [self.state.state_hash()]

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    def head(self) -> Block:
        return self.blocks[-1]


def check_envelope(env: TransactionEnvelope, chain: Chain, now: int) -> None:
    """Identity and structural gate; raises UnauthorizedTx with the reason."""
    cert = chain.ctx.certs.get(env.creator_cert_id)
    if cert is None:
        raise UnauthorizedTx(f"unknown certificate {env.creator_cert_id}")
    if env.expected_tx_id() != env.tx_id:
        raise UnauthorizedTx("tx_id does not match envelope content")
    if not crypto.verify(cert.verification_key, env.signing_payload(), env.signature):
        raise UnauthorizedTx("envelope signature invalid")
    if not cert.issued_at <= now < cert.expires_at:
        raise UnauthorizedTx("certificate expired")
    if cert.cert_id in chain.state.cert_revocations:
        raise UnauthorizedTx("certificate revoked")
    decision = authorize(cert, _ACTION_FOR_TX[env.tx_type])
    if not decision.allowed:
        raise UnauthorizedTx(decision.reason)
    _check_envelope_shape(env)


def _check_envelope_shape(env: TransactionEnvelope) -> None:
    if env.visibility.kind is VisibilityKind.PRIVATE:
        if len(env.visibility.parties) != 2 or len(set(env.visibility.parties)) != 2:
            raise UnauthorizedTx("private visibility needs two distinct parties")
        if env.payload_anchor.kind is not AnchorKind.PAYLOAD_HASH:
            raise UnauthorizedTx("private envelopes anchor a payload hash")
    else:
        if env.visibility.parties:
            raise UnauthorizedTx("broadcast visibility carries no party names")
        if env.payload_anchor.kind is not AnchorKind.CONTENT_ADDRESS:
            raise UnauthorizedTx("broadcast envelopes anchor a content address")
    if env.tx_type is TxType.POST_FAKTUR:
        if env.visibility.kind is not VisibilityKind.PRIVATE:
            raise UnauthorizedTx("faktur submissions are private exchanges")
        if env.body.get("faktur_hash") != env.payload_anchor.value:
            raise UnauthorizedTx("faktur anchor does not match body hash")
    elif env.visibility.kind is not VisibilityKind.BROADCAST:
        raise UnauthorizedTx(f"{env.tx_type.value} must be broadcast")


def append_block(
    chain: Chain, txs: list[TransactionEnvelope], term: int, now: int
) -> Block:
    """Seal a batch into the next block and fold it into the world state."""
    if not txs:
        raise EmptyBatch("a block must carry at least one transaction")
    for env in txs:
        check_envelope(env, chain, now)
    block = Block(
        number=len(chain.blocks),
        prev_hash=chain.head().block_hash(),
        data_hash=data_hash_for(txs),
        txs=tuple(txs),
        committed_term=term,
        committed_at=now,
    )
    chain.blocks.append(block)
    chain.state = apply_committed(chain.state, block, chain.ctx)
    chain.state_hashes.append(chain.state.state_hash())
    return block


def apply_committed(state: WorldState, block: Block, ctx: ApplyContext) -> WorldState:
    """Replay one committed block; never raises, never skips a transaction."""
    for env in block.txs:
        tx_id = env.tx_id.hex()
        cert = ctx.certs.get(env.creator_cert_id)
        if cert is None:
            state = chaincode.reject_tx(state, tx_id, env.tx_type.value, ["unknown-cert"])
            continue
        body = {"op": env.tx_type.value, **env.body}
        state = chaincode.apply_tx(state, AppliedTx(tx_id, cert, body), ctx.config)
    return state


def replay(blocks: list[Block], ctx: ApplyContext) -> tuple[WorldState, list[bytes]]:
    """Fold a block sequence from genesis; returns final state and per-height hashes."""
    state = WorldState()
    hashes = [state.state_hash()]
    for block in blocks[1:]:
        state = apply_committed(state, block, ctx)
        hashes.append(state.state_hash())
    return state, hashes


def verify_chain(chain: Chain | list[Block]) -> ChainReport:
    """Check hash links, data hashes, and envelope ids over the whole chain."""
    blocks = chain.blocks if isinstance(chain, Chain) else chain
    for n, block in enumerate(blocks):
        if block.number != n:
            return ChainReport(False, n)
        if n == 0:
            if block.prev_hash != ZERO_DIGEST or block.txs:
                return ChainReport(False, 0)
        elif block.prev_hash != blocks[n - 1].block_hash():
            return ChainReport(False, n)
        if block.data_hash != data_hash_for(block.txs):
            return ChainReport(False, n)
        for env in block.txs:
            if env.expected_tx_id() != env.tx_id:
                return ChainReport(False, n)
    return ChainReport(True, None)


def anchor_lookup(chain: Chain | list[Block], tx_id: bytes) -> AnchorInfo:
    blocks = chain.blocks if isinstance(chain, Chain) else chain
    for block in blocks:
        for env in block.txs:
            if env.tx_id == tx_id:
                return AnchorInfo(env.tx_id, env.payload_anchor, env.visibility)
    raise NotFound(tx_id.hex())


# --- Persistence -------------------------------------------------------------

_LEN_WIDTH = 4
_RECORD_LIMIT = 64 * 1024 * 1024


def encode_block_record(block: Block) -> bytes:
    payload = canonical_encode(block.to_dict())
    return len(payload).to_bytes(_LEN_WIDTH, "big") + payload + sha256(payload)


def store_bytes(blocks: list[Block]) -> bytes:
    return b"".join(encode_block_record(block) for block in blocks)


@dataclass
class StoreScan:
    blocks: list[Block] = field(default_factory=list)
    first_bad_record: int | None = None


def scan_store(data: bytes) -> StoreScan:
    """Decode a block stream, stopping at the first corrupt record."""
    scan = StoreScan()
    offset = 0
    index = 0
    while offset < len(data):
        if offset + _LEN_WIDTH > len(data):
            scan.first_bad_record = index
            return scan
        length = int.from_bytes(data[offset : offset + _LEN_WIDTH], "big")
        end = offset + _LEN_WIDTH + length + DIGEST_WIDTH
        if length > _RECORD_LIMIT or end > len(data):
            scan.first_bad_record = index
            return scan
        payload = data[offset + _LEN_WIDTH : offset + _LEN_WIDTH + length]
        digest = data[offset + _LEN_WIDTH + length : end]
        if sha256(payload) != digest:
            scan.first_bad_record = index
            return scan
        try:
            scan.blocks.append(Block.from_dict(canonical_decode(payload)))
        except (EncodingError, LedgerError):
            scan.first_bad_record = index
            return scan
        offset = end
        index += 1
    return scan


def verify_store(data: bytes) -> ChainReport:
    """Full integrity check of a persisted chain: framing, records, links."""
    scan = scan_store(data)
    if scan.first_bad_record is not None:
        return ChainReport(False, scan.first_bad_record)
    return verify_chain(scan.blocks)


def load_store(data: bytes) -> list[Block]:
    scan = scan_store(data)
    if scan.first_bad_record is not None:
        raise LedgerError(f"corrupt block record {scan.first_bad_record}")
    return scan.blocks
