"""Off-chain stores, private exchange, anchor checks, and verified restore."""

import random

import pytest

from fakturchain import crypto, identity, ledger
from fakturchain.dataplane import (
    CAS_SCHEME,
    FRAGMENT_WIDTH,
    AuthFailure,
    CasStore,
    DecryptFailure,
    EmptyPayload,
    IntegrityFailure,
    MalformedBackup,
    NotFound,
    OffchainStore,
    Party,
    PrivateEnvelope,
    backup,
    content_address,
    make_private_envelope,
    open_private_envelope,
    private_send,
    restore,
    verify_against_chain,
)
from fakturchain.encoding import canonical_decode, canonical_encode, sha256
from fakturchain.identity import RevocationList

NOW = 50


def _party(ca, subject, role, seed):
    keypair = crypto.generate_keypair(random.Random(seed))
    cert = identity.issue_certificate(ca, subject, role, keypair.public_bundle)
    return Party(cert, keypair, OffchainStore(subject), CasStore(subject))


@pytest.fixture
def seller(ca):
    return _party(ca, "pkp-01", identity.Role.PKP, "seller-key")


@pytest.fixture
def authority(ca):
    return _party(ca, "djp", identity.Role.DJP, "authority-key")


@pytest.fixture
def rl():
    return RevocationList()


# -- content-addressed store -----------------------------------------------------


def test_content_address_format():
    address = content_address(b"hello")
    assert address.startswith(CAS_SCHEME)
    assert len(address) == len(CAS_SCHEME) + 64


def test_cas_round_trip():
    store = CasStore("pkp-01")
    address = store.put(b"record")
    assert store.get(address) == b"record"
    # Re-put of identical bytes lands on the same address.
    assert store.put(b"record") == address


def test_cas_rejects_empty_payload():
    with pytest.raises(EmptyPayload):
        CasStore("pkp-01").put(b"")


def test_cas_missing_address():
    with pytest.raises(NotFound):
        CasStore("pkp-01").get(content_address(b"nothing"))


def test_cas_detects_blob_tampering():
    store = CasStore("pkp-01")
    address = store.put(b"record")
    store.blobs[address] = b"recorD"
    with pytest.raises(IntegrityFailure):
        store.get(address)


# -- private payload store ---------------------------------------------------------


def test_offchain_round_trip_and_tx_binding():
    store = OffchainStore("pkp-01")
    key = store.put(b"invoice body", counterpart="djp")
    assert key == sha256(b"invoice body").hex()
    assert store.get(key) == b"invoice body"
    store.set_tx_id(key, "aa" * 32)
    assert store.records[key].tx_id == "aa" * 32


def test_offchain_detects_tampering():
    store = OffchainStore("pkp-01")
    key = store.put(b"invoice body", counterpart="djp")
    store.records[key].plaintext = b"invoice bodY"
    with pytest.raises(IntegrityFailure):
        store.get(key)
    with pytest.raises(NotFound):
        store.get(sha256(b"other").hex())


# -- private exchange ----------------------------------------------------------------


def test_private_exchange_round_trip(seller, authority, rl, ca):
    rng = random.Random("transfer")
    payload = b"faktur 010.000.25.00000001 base 1000000 vat 110000"
    envelope = make_private_envelope(seller, authority.cert, payload, 1, rng)
    assert envelope.payload_hash == sha256(payload)
    opened = open_private_envelope(authority, envelope, seller.cert, rl, NOW, ca.root_bundle)
    assert opened == payload


def test_ciphertext_leaks_no_plaintext_fragment(seller, authority):
    rng = random.Random("transfer")
    payload = bytes(range(256)) * 4
    envelope = make_private_envelope(seller, authority.cert, payload, 1, rng)
    for start in range(0, len(payload) - FRAGMENT_WIDTH):
        assert payload[start : start + FRAGMENT_WIDTH] not in envelope.ciphertext


def test_empty_private_payload_rejected(seller, authority):
    with pytest.raises(EmptyPayload):
        make_private_envelope(seller, authority.cert, b"", 1, random.Random("x"))


def test_envelope_for_someone_else_rejected(seller, authority, rl, ca):
    envelope = make_private_envelope(
        seller, authority.cert, b"secret", 1, random.Random("t")
    )
    with pytest.raises(AuthFailure, match="different org"):
        open_private_envelope(seller, envelope, seller.cert, rl, NOW, ca.root_bundle)


def test_sender_cert_mismatch_rejected(seller, authority, rl, ca):
    envelope = make_private_envelope(
        seller, authority.cert, b"secret", 1, random.Random("t")
    )
    with pytest.raises(AuthFailure, match="does not match envelope"):
        open_private_envelope(authority, envelope, authority.cert, rl, NOW, ca.root_bundle)


def test_forged_sender_auth_rejected(seller, authority, rl, ca):
    from dataclasses import replace

    envelope = make_private_envelope(
        seller, authority.cert, b"secret", 1, random.Random("t")
    )
    imposter = crypto.generate_keypair(random.Random("imposter"))
    forged = replace(envelope, sender_auth=imposter.sign(envelope.auth_payload()))
    with pytest.raises(AuthFailure):
        open_private_envelope(authority, forged, seller.cert, rl, NOW, ca.root_bundle)


def test_revoked_sender_rejected(seller, authority, rl, ca):
    envelope = make_private_envelope(
        seller, authority.cert, b"secret", 1, random.Random("t")
    )
    identity.revoke(ca, rl, seller.cert.cert_id, "compromised", NOW)
    with pytest.raises(AuthFailure, match="revoked"):
        open_private_envelope(authority, envelope, seller.cert, rl, NOW, ca.root_bundle)


def test_tampered_ciphertext_fails_decrypt(seller, authority, rl, ca):
    from dataclasses import replace

    envelope = make_private_envelope(
        seller, authority.cert, b"secret", 1, random.Random("t")
    )
    mangled = bytearray(envelope.ciphertext)
    mangled[len(mangled) // 2] ^= 0x10
    # Refresh the auth signature so only the ciphertext check can trip.
    forged = replace(envelope, ciphertext=bytes(mangled))
    forged = replace(forged, sender_auth=seller.keypair.sign(forged.auth_payload()))
    with pytest.raises(DecryptFailure):
        open_private_envelope(authority, forged, seller.cert, rl, NOW, ca.root_bundle)


def test_hash_mismatch_after_decrypt(seller, authority, rl, ca):
    rng = random.Random("t")
    claimed_hash = sha256(b"what the sender claims")
    auth = seller.keypair.sign(
        PrivateEnvelope(
            seller.org, authority.org, b"", claimed_hash, b"", 3
        ).auth_payload()
    )
    envelope = PrivateEnvelope(
        sender_org=seller.org,
        receiver_org=authority.org,
        ciphertext=crypto.encrypt(authority.cert.verification_key, b"something else", rng),
        payload_hash=claimed_hash,
        sender_auth=auth,
        transfer_nonce=3,
    )
    with pytest.raises(IntegrityFailure):
        open_private_envelope(authority, envelope, seller.cert, rl, NOW, ca.root_bundle)


def test_private_send_populates_both_stores(seller, authority, rl, ca):
    payload = b"full invoice body"
    _, payload_hash = private_send(
        seller, authority, payload, rl, NOW, ca.root_bundle, random.Random("send")
    )
    key = payload_hash.hex()
    assert seller.offchain.get(key) == payload
    assert authority.offchain.get(key) == payload
    assert seller.offchain.records[key].counterpart == "djp"
    assert authority.offchain.records[key].counterpart == "pkp-01"


def test_envelope_record_round_trip(seller, authority):
    envelope = make_private_envelope(
        seller, authority.cert, b"secret", 1, random.Random("t")
    )
    assert PrivateEnvelope.from_dict(envelope.to_dict()) == envelope


# -- anchors and restore ---------------------------------------------------------------


def _anchored_chain(ca, seller, payloads):
    """A chain with one private faktur envelope per payload, seller -> djp."""
    ctx = ledger.ApplyContext(certs={seller.cert.cert_id: seller.cert}, config=None)
    from fakturchain.chaincode import VatConfig

    ctx.config = VatConfig()
    chain = ledger.Chain(ctx)
    for n, payload in enumerate(payloads):
        body = {
            "nsfp": f"010.000.25.{n + 1:08d}",
            "faktur_hash": sha256(payload).hex(),
            "year": 2025,
        }
        env = ledger.sign_envelope(
            seller.keypair,
            seller.cert,
            ledger.TxType.POST_FAKTUR,
            body,
            ledger.PayloadAnchor(ledger.AnchorKind.PAYLOAD_HASH, body["faktur_hash"]),
            ledger.private(seller.org, "djp"),
            nonce=n,
            created_at=NOW,
        )
        ledger.append_block(chain, [env], term=1, now=NOW)
    return chain


def test_verify_against_chain_private_anchor(ca, seller):
    payload = b"the committed invoice"
    chain = _anchored_chain(ca, seller, [payload])
    tx_id = chain.blocks[1].txs[0].tx_id
    assert verify_against_chain(payload, chain, tx_id)
    assert not verify_against_chain(payload + b"!", chain, tx_id)


def test_verify_against_chain_broadcast_anchor(ca, seller, vat_config):
    ctx = ledger.ApplyContext(certs={seller.cert.cert_id: seller.cert}, config=vat_config)
    chain = ledger.Chain(ctx)
    doc = canonical_encode({"op": "post_nsfp", "tax_year": 25, "count": 1})
    env = ledger.sign_envelope(
        seller.keypair,
        seller.cert,
        ledger.TxType.POST_NSFP,
        {"tax_year": 25, "count": 1},
        ledger.PayloadAnchor(ledger.AnchorKind.CONTENT_ADDRESS, content_address(doc)),
        ledger.broadcast(),
        nonce=0,
        created_at=NOW,
    )
    ledger.append_block(chain, [env], term=1, now=NOW)
    assert verify_against_chain(doc, chain, env.tx_id)
    assert not verify_against_chain(doc + b" ", chain, env.tx_id)


def _stocked(store, payloads, chain):
    for n, payload in enumerate(payloads):
        key = store.put(payload, counterpart="djp")
        store.set_tx_id(key, chain.blocks[n + 1].txs[0].tx_id.hex())


def test_backup_restore_round_trip(ca, seller):
    payloads = [f"invoice {n}".encode() for n in range(4)]
    chain = _anchored_chain(ca, seller, payloads)
    _stocked(seller.offchain, payloads, chain)
    artifact = backup(seller.offchain)

    seller.offchain.records = {}
    report = restore(seller.offchain, artifact, chain)
    assert report.total == 4
    assert report.verified == 4
    assert report.corrupt == [] and report.missing == []
    for payload in payloads:
        assert seller.offchain.get(sha256(payload).hex()) == payload


def test_restore_flags_corrupt_record(ca, seller):
    payloads = [b"invoice 0", b"invoice 1"]
    chain = _anchored_chain(ca, seller, payloads)
    _stocked(seller.offchain, payloads, chain)
    data = canonical_decode(backup(seller.offchain))
    victim = sha256(payloads[0]).hex()
    for record in data["records"]:
        if record["payload_hash"] == victim:
            record["plaintext"] = b"invoice X"
    artifact = canonical_encode(data)

    report = restore(seller.offchain, artifact, chain)
    assert report.verified == 1
    assert report.corrupt == [victim]
    assert victim not in seller.offchain.records


def test_restore_flags_missing_record(ca, seller):
    payloads = [b"invoice 0", b"invoice 1"]
    chain = _anchored_chain(ca, seller, payloads)
    _stocked(seller.offchain, payloads[:1], chain)
    artifact = backup(seller.offchain)
    report = restore(seller.offchain, artifact, chain)
    assert report.verified == 1
    assert report.missing == [sha256(payloads[1]).hex()]


def test_restore_drops_unanchored_records(ca, seller):
    payloads = [b"invoice 0"]
    chain = _anchored_chain(ca, seller, payloads)
    _stocked(seller.offchain, payloads, chain)
    seller.offchain.put(b"never committed", counterpart="djp")
    artifact = backup(seller.offchain)
    report = restore(seller.offchain, artifact, chain)
    assert report.total == 1
    assert report.verified == 1
    assert sha256(b"never committed").hex() not in seller.offchain.records


@pytest.mark.parametrize(
    "artifact",
    [b"", b"not a backup", canonical_encode({"format": "other"}), canonical_encode([1, 2])],
)
def test_restore_rejects_malformed_artifacts(ca, seller, artifact):
    chain = _anchored_chain(ca, seller, [b"invoice 0"])
    with pytest.raises(MalformedBackup):
        restore(seller.offchain, artifact, chain)
