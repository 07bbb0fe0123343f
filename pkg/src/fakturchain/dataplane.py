"""Off-chain payload handling: broadcast CAS, private exchange, backup.

Two kinds of payload never touch the chain itself. Broadcast data (NSFP
request records) lives in a content-addressed store replicated to every
member. Private data (faktur bodies) moves end-to-end encrypted between
exactly two parties, and only its hash is committed. Everything here is
plain data plumbing; delivery timing and loss live in the network simulator.

A backup is a self-contained byte artifact. Restore trusts nothing in it:
every record is re-hashed and checked against the on-chain anchor before it
replaces store contents.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import crypto, ledger
from .crypto import DecryptFailure
from .encoding import EncodingError, canonical_decode, canonical_encode, sha256
from .identity import Certificate, RevocationList, check_certificate, verify_signature

CAS_SCHEME = "cas:sha256:"
FRAGMENT_WIDTH = 16

__all__ = [
    "AuthFailure",
    "CasStore",
    "DecryptFailure",
    "EmptyPayload",
    "IntegrityFailure",
    "MalformedBackup",
    "NotFound",
    "OffchainStore",
    "Party",
    "PrivateEnvelope",
    "RestoreReport",
    "backup",
    "cas_get",
    "cas_put",
    "content_address",
    "make_private_envelope",
    "open_private_envelope",
    "private_send",
    "restore",
    "verify_against_chain",
]


class DataplaneError(Exception):
    pass


class EmptyPayload(DataplaneError):
    pass


class NotFound(DataplaneError):
    pass


class IntegrityFailure(DataplaneError):
    """Stored or received bytes no longer match their hash."""


class AuthFailure(DataplaneError):
    pass


class MalformedBackup(DataplaneError):
    pass


def content_address(payload: bytes) -> str:
    return CAS_SCHEME + sha256(payload).hex()


class CasStore:
    """One member's replica of the broadcast content-addressed store."""

    def __init__(self, org: str):
        self.org = org
        self.blobs: dict[str, bytes] = {}

    def put(self, payload: bytes) -> str:
        return cas_put(self, payload)

    def get(self, address: str) -> bytes:
        return cas_get(self, address)


def cas_put(store: CasStore, payload: bytes) -> str:
    if not payload:
        raise EmptyPayload("content-addressed payloads must be non-empty")
    address = content_address(payload)
    store.blobs.setdefault(address, payload)
    return address


def cas_get(store: CasStore, address: str) -> bytes:
    try:
        payload = store.blobs[address]
    except KeyError:
        raise NotFound(address) from None
    if content_address(payload) != address:
        raise IntegrityFailure(address)
    return payload


@dataclass
class StoredPayload:
    plaintext: bytes
    tx_id: str | None
    counterpart: str


class OffchainStore:
    """Per-org private payload store, keyed by payload hash (hex)."""

    def __init__(self, org: str):
        self.org = org
        self.records: dict[str, StoredPayload] = {}

    def put(self, plaintext: bytes, counterpart: str, tx_id: str | None = None) -> str:
        key = sha256(plaintext).hex()
        self.records[key] = StoredPayload(plaintext, tx_id, counterpart)
        return key

    def get(self, payload_hash: str) -> bytes:
        try:
            record = self.records[payload_hash]
        except KeyError:
            raise NotFound(payload_hash) from None
        if sha256(record.plaintext).hex() != payload_hash:
            raise IntegrityFailure(payload_hash)
        return record.plaintext

    def set_tx_id(self, payload_hash: str, tx_id: str) -> None:
        if payload_hash in self.records:
            self.records[payload_hash].tx_id = tx_id


@dataclass(frozen=True)
class PrivateEnvelope:
    sender_org: str
    receiver_org: str
    ciphertext: bytes
    payload_hash: bytes
    sender_auth: bytes
    transfer_nonce: int

    def auth_payload(self) -> bytes:
        return private_auth_payload(
            self.sender_org, self.receiver_org, self.payload_hash, self.transfer_nonce
        )

    def to_dict(self) -> dict:
        return {
            "sender_org": self.sender_org,
            "receiver_org": self.receiver_org,
            "ciphertext": self.ciphertext,
            "payload_hash": self.payload_hash,
            "sender_auth": self.sender_auth,
            "transfer_nonce": self.transfer_nonce,
        }

    @staticmethod
    def from_dict(data: dict) -> PrivateEnvelope:
        try:
            return PrivateEnvelope(
                sender_org=data["sender_org"],
                receiver_org=data["receiver_org"],
                ciphertext=data["ciphertext"],
                payload_hash=data["payload_hash"],
                sender_auth=data["sender_auth"],
                transfer_nonce=data["transfer_nonce"],
            )
        except (KeyError, TypeError) as exc:
            raise DataplaneError(f"malformed private envelope: {exc}") from exc


def private_auth_payload(
    sender_org: str, receiver_org: str, payload_hash: bytes, transfer_nonce: int
) -> bytes:
    return canonical_encode(
        {
            "sender_org": sender_org,
            "receiver_org": receiver_org,
            "payload_hash": payload_hash,
            "transfer_nonce": transfer_nonce,
        }
    )


@dataclass
class Party:
    """One org's view of the data plane: identity, keys, and both stores."""

    cert: Certificate
    keypair: crypto.KeyPair
    offchain: OffchainStore
    cas: CasStore

    @property
    def org(self) -> str:
        return self.cert.subject


def _check_party_cert(cert: Certificate, rl: RevocationList, now: int, root: bytes) -> None:
    decision = check_certificate(cert, rl, now, root)
    if not decision.allowed:
        raise AuthFailure(f"{cert.subject}: {decision.reason}")


def make_private_envelope(
    sender: Party, receiver_cert: Certificate, payload: bytes, nonce: int, rng: random.Random
) -> PrivateEnvelope:
    if not payload:
        raise EmptyPayload("private payloads must be non-empty")
    payload_hash = sha256(payload)
    auth = sender.keypair.sign(
        private_auth_payload(sender.org, receiver_cert.subject, payload_hash, nonce)
    )
    return PrivateEnvelope(
        sender_org=sender.org,
        receiver_org=receiver_cert.subject,
        ciphertext=crypto.encrypt(receiver_cert.verification_key, payload, rng),
        payload_hash=payload_hash,
        sender_auth=auth,
        transfer_nonce=nonce,
    )


def open_private_envelope(
    receiver: Party,
    envelope: PrivateEnvelope,
    sender_cert: Certificate,
    rl: RevocationList,
    now: int,
    root_bundle: bytes,
) -> bytes:
    """Authenticate, decrypt, and hash-check an incoming private envelope."""
    if envelope.receiver_org != receiver.org:
        raise AuthFailure("envelope addressed to a different org")
    if sender_cert.subject != envelope.sender_org:
        raise AuthFailure("sender certificate does not match envelope")
    decision = verify_signature(
        sender_cert, envelope.auth_payload(), envelope.sender_auth, rl, now, root_bundle
    )
    if not decision.allowed:
        raise AuthFailure(decision.reason)
    plaintext = crypto.decrypt(receiver.keypair, envelope.ciphertext)
    if sha256(plaintext) != envelope.payload_hash:
        raise IntegrityFailure("decrypted payload does not match claimed hash")
    return plaintext


def private_send(
    sender: Party,
    receiver: Party,
    payload: bytes,
    rl: RevocationList,
    now: int,
    root_bundle: bytes,
    rng: random.Random,
    nonce: int = 0,
) -> tuple[PrivateEnvelope, bytes]:
    """Synchronous two-party exchange; both stores gain the plaintext.

    The in-network variant runs the same steps as a message exchange through
    the simulator; this form is the blocking equivalent for direct use.
    """
    _check_party_cert(sender.cert, rl, now, root_bundle)
    _check_party_cert(receiver.cert, rl, now, root_bundle)
    envelope = make_private_envelope(sender, receiver.cert, payload, nonce, rng)
    plaintext = open_private_envelope(receiver, envelope, sender.cert, rl, now, root_bundle)
    sender.offchain.put(payload, counterpart=receiver.org)
    receiver.offchain.put(plaintext, counterpart=sender.org)
    return envelope, envelope.payload_hash


def verify_against_chain(payload: bytes, chain, tx_id: bytes) -> bool:
    """True iff the payload hashes to the committed envelope's anchor."""
    info = ledger.anchor_lookup(chain, tx_id)
    if info.payload_anchor.kind is ledger.AnchorKind.PAYLOAD_HASH:
        return sha256(payload).hex() == info.payload_anchor.value
    return content_address(payload) == info.payload_anchor.value


# --- Backup and restore -------------------------------------------------------

_BACKUP_MAGIC = "offchain-backup-v1"


def backup(store: OffchainStore) -> bytes:
    records = [
        {
            "payload_hash": key,
            "plaintext": record.plaintext,
            "tx_id": record.tx_id or "",
            "counterpart": record.counterpart,
        }
        for key, record in sorted(store.records.items())
    ]
    return canonical_encode(
        {
            "format": _BACKUP_MAGIC,
            "org": store.org,
            "manifest": [[r["payload_hash"], r["tx_id"]] for r in records],
            "records": records,
        }
    )


@dataclass
class RestoreReport:
    """Outcome of a verified restore.

    total counts every payload anchored on-chain for this org;
    total = verified + len(corrupt) + len(missing).
    """

    total: int = 0
    verified: int = 0
    corrupt: list[str] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)


def _anchored_hashes(chain, org: str) -> dict[str, bytes]:
    """payload_hash (hex) -> tx_id for every private anchor naming this org."""
    blocks = chain.blocks if isinstance(chain, ledger.Chain) else chain
    out: dict[str, bytes] = {}
    for block in blocks:
        for env in block.txs:
            if (
                env.visibility.kind is ledger.VisibilityKind.PRIVATE
                and org in env.visibility.parties
            ):
                out[env.payload_anchor.value] = env.tx_id
    return out


def restore(store: OffchainStore, artifact: bytes, chain) -> RestoreReport:
    """Replace store contents with backup records that verify on-chain."""
    try:
        data = canonical_decode(artifact)
        if data.get("format") != _BACKUP_MAGIC:
            raise MalformedBackup("unrecognized backup format")
        by_hash = {r["payload_hash"]: r for r in data["records"]}
    except (EncodingError, KeyError, TypeError, AttributeError) as exc:
        raise MalformedBackup(str(exc)) from exc

    anchored = _anchored_hashes(chain, store.org)
    report = RestoreReport(total=len(anchored))
    restored: dict[str, StoredPayload] = {}
    for payload_hash in sorted(anchored):
        record = by_hash.get(payload_hash)
        if record is None:
            report.missing.append(payload_hash)
            continue
        plaintext = record["plaintext"]
        if not isinstance(plaintext, bytes) or sha256(plaintext).hex() != payload_hash:
            report.corrupt.append(payload_hash)
            continue
        if not verify_against_chain(plaintext, chain, anchored[payload_hash]):
            report.corrupt.append(payload_hash)
            continue
        report.verified += 1
        restored[payload_hash] = StoredPayload(
            plaintext=plaintext,
            tx_id=str(record.get("tx_id") or "") or None,
            counterpart=str(record.get("counterpart", "")),
        )
    store.records = restored
    return report
