"""Key material, signatures, and hybrid public-key encryption.

Each organization holds one combined key pair: an Ed25519 signing key and an
X25519 key-agreement key, both derived from the same 32-byte seed. The public
half travels as a single 64-byte bundle (signing key first). All randomness is
drawn from caller-supplied ``random.Random`` instances so whole-network runs
are reproducible from one seed.
"""

from __future__ import annotations

import random

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ed25519, x25519
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .encoding import sha256

BUNDLE_WIDTH = 64
_EPH_WIDTH = 32


class CryptoError(Exception):
    pass


class DecryptFailure(CryptoError):
    """Ciphertext failed authentication or is structurally invalid."""


class KeyPair:
    """Combined Ed25519 signing and X25519 exchange key pair."""

    def __init__(self, seed: bytes):
        if len(seed) != 32:
            raise CryptoError("seed must be 32 bytes")
        self._seed = seed
        self._signing = ed25519.Ed25519PrivateKey.from_private_bytes(
            sha256(seed + b"/sign")
        )
        self._exchange = x25519.X25519PrivateKey.from_private_bytes(
            sha256(seed + b"/kem")
        )
        self.public_bundle = _raw_public(self._signing.public_key()) + _raw_public(
            self._exchange.public_key()
        )

    def sign(self, message: bytes) -> bytes:
        return self._signing.sign(message)


def _raw_public(key) -> bytes:
    from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

    return key.public_bytes(Encoding.Raw, PublicFormat.Raw)


def generate_keypair(rng: random.Random) -> KeyPair:
    return KeyPair(rng.randbytes(32))


def signing_key_bytes(bundle: bytes) -> bytes:
    _check_bundle(bundle)
    return bundle[:32]


def exchange_key_bytes(bundle: bytes) -> bytes:
    _check_bundle(bundle)
    return bundle[32:]


def _check_bundle(bundle: bytes) -> None:
    if len(bundle) != BUNDLE_WIDTH:
        raise CryptoError(f"public bundle must be {BUNDLE_WIDTH} bytes")


def verify(bundle: bytes, message: bytes, signature: bytes) -> bool:
    try:
        key = ed25519.Ed25519PublicKey.from_public_bytes(signing_key_bytes(bundle))
        key.verify(signature, message)
        return True
    except (InvalidSignature, CryptoError, ValueError):
        return False


def _derive_aead(shared: bytes, eph_pub: bytes, receiver_pub: bytes) -> tuple[bytes, bytes]:
    material = HKDF(
        algorithm=hashes.SHA256(),
        length=44,
        salt=None,
        info=b"fakturchain/hybrid/v1" + eph_pub + receiver_pub,
    ).derive(shared)
    return material[:32], material[32:]


def encrypt(receiver_bundle: bytes, plaintext: bytes, rng: random.Random) -> bytes:
    """Hybrid encryption to the receiver's exchange key.

    Layout: 32-byte ephemeral X25519 public key followed by the AEAD
    ciphertext. The ephemeral key comes from ``rng`` for reproducibility.
    """
    receiver_pub = exchange_key_bytes(receiver_bundle)
    eph = x25519.X25519PrivateKey.from_private_bytes(rng.randbytes(32))
    eph_pub = _raw_public(eph.public_key())
    shared = eph.exchange(x25519.X25519PublicKey.from_public_bytes(receiver_pub))
    key, nonce = _derive_aead(shared, eph_pub, receiver_pub)
    return eph_pub + ChaCha20Poly1305(key).encrypt(nonce, plaintext, None)


def decrypt(keypair: KeyPair, ciphertext: bytes) -> bytes:
    if len(ciphertext) < _EPH_WIDTH + 16:
        raise DecryptFailure("ciphertext too short")
    eph_pub = ciphertext[:_EPH_WIDTH]
    body = ciphertext[_EPH_WIDTH:]
    try:
        shared = keypair._exchange.exchange(
            x25519.X25519PublicKey.from_public_bytes(eph_pub)
        )
        key, nonce = _derive_aead(
            shared, eph_pub, exchange_key_bytes(keypair.public_bundle)
        )
        return ChaCha20Poly1305(key).decrypt(nonce, body, None)
    except (InvalidTag, ValueError) as exc:
        raise DecryptFailure("authentication failed") from exc
