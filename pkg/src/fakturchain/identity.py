"""Membership service: certificates, revocation, and role-based authorization.

A single root authority enrolls every organization. A certificate binds an
organization name and role to a 64-byte verification-key bundle for a logical
validity window and is signed by the root over a canonical JSON payload, so
any holder of the root's public bundle can verify membership offline.
Authorization is a static matrix from role to permitted actions; signature,
expiry, and revocation checks are a separate decision so callers can tell
"who are you" failures from "you may not" failures.

All timestamps are logical (monotone integers supplied by the caller).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from . import crypto
from .encoding import canonical_json

DEFAULT_VALIDITY_TICKS = 10**9


class IdentityError(Exception):
    pass


class DuplicateSubjectRole(IdentityError):
    """The subject already holds a live certificate for this role."""


class UnknownCert(IdentityError):
    pass


class AlreadyRevoked(IdentityError):
    pass


class Role(str, Enum):
    PKP = "pkp"
    DJP = "djp"
    ORDERER = "orderer"


class Action(str, Enum):
    POST_NSFP = "post_nsfp"
    POST_FAKTUR = "post_faktur"
    GET_NSFP = "get_nsfp"
    GET_FAKTUR = "get_faktur"
    REVOKE = "revoke"
    ADMIN = "admin"


_MATRIX: dict[Role, frozenset[Action]] = {
    Role.PKP: frozenset(
        {Action.POST_NSFP, Action.POST_FAKTUR, Action.GET_NSFP, Action.GET_FAKTUR}
    ),
    Role.DJP: frozenset(
        {Action.GET_NSFP, Action.GET_FAKTUR, Action.REVOKE, Action.ADMIN}
    ),
    Role.ORDERER: frozenset(),
}


@dataclass(frozen=True)
class Certificate:
    cert_id: str
    subject: str
    role: Role
    verification_key: bytes
    issued_at: int
    expires_at: int
    issuer_signature: bytes

    def payload(self) -> bytes:
        return certificate_payload(
            self.cert_id,
            self.subject,
            self.role,
            self.verification_key,
            self.issued_at,
            self.expires_at,
        )


def certificate_payload(
    cert_id: str,
    subject: str,
    role: Role,
    verification_key: bytes,
    issued_at: int,
    expires_at: int,
) -> bytes:
    return canonical_json(
        {
            "cert_id": cert_id,
            "subject": subject,
            "role": role.value,
            "verification_key": verification_key.hex(),
            "issued_at": issued_at,
            "expires_at": expires_at,
        }
    )


@dataclass
class RevocationList:
    """Append-only set of revocations; a cert_id appears at most once."""

    entries: dict[str, tuple[int, str]] = field(default_factory=dict)

    def add(self, cert_id: str, revoked_at: int, reason: str) -> None:
        if cert_id in self.entries:
            raise AlreadyRevoked(cert_id)
        self.entries[cert_id] = (revoked_at, reason)

    def is_revoked(self, cert_id: str) -> bool:
        return cert_id in self.entries


@dataclass(frozen=True)
class AuthzDecision:
    allowed: bool
    reason: str

    def __bool__(self) -> bool:
        return self.allowed


class CertificateAuthority:
    """Root enrollment authority for the network.

    Holds the root key pair, the registry of issued certificates, and the
    network revocation list. One live certificate per (subject, role);
    re-enrollment is allowed once the previous one is revoked or expired.
    """

    def __init__(self, rng: random.Random):
        self._rng = rng
        self._root = crypto.generate_keypair(rng)
        self.root_bundle = self._root.public_bundle
        self.certificates: dict[str, Certificate] = {}
        self.revocations = RevocationList()

    def sign(self, payload: bytes) -> bytes:
        return self._root.sign(payload)

    def fresh_cert_id(self) -> str:
        while True:
            cert_id = self._rng.randbytes(8).hex()
            if cert_id not in self.certificates:
                return cert_id

    def lookup(self, cert_id: str) -> Certificate:
        try:
            return self.certificates[cert_id]
        except KeyError:
            raise UnknownCert(cert_id) from None


def issue_certificate(
    ca: CertificateAuthority,
    subject: str,
    role: Role,
    verification_key: bytes,
    validity: tuple[int, int] | None = None,
) -> Certificate:
    if not subject:
        raise IdentityError("subject must be non-empty")
    issued_at, expires_at = validity if validity else (0, DEFAULT_VALIDITY_TICKS)
    if expires_at <= issued_at:
        raise IdentityError("validity window must be well-ordered")
    for cert in ca.certificates.values():
        if (
            cert.subject == subject
            and cert.role == role
            and not ca.revocations.is_revoked(cert.cert_id)
            and cert.expires_at > issued_at
        ):
            raise DuplicateSubjectRole(f"{subject}/{role.value}")
    cert_id = ca.fresh_cert_id()
    payload = certificate_payload(
        cert_id, subject, role, verification_key, issued_at, expires_at
    )
    cert = Certificate(
        cert_id=cert_id,
        subject=subject,
        role=role,
        verification_key=verification_key,
        issued_at=issued_at,
        expires_at=expires_at,
        issuer_signature=ca.sign(payload),
    )
    ca.certificates[cert_id] = cert
    return cert


def check_certificate(
    cert: Certificate, rl: RevocationList, now: int, root_bundle: bytes
) -> AuthzDecision:
    """Certificate-only check: issuer signature, validity window, revocation."""
    if not crypto.verify(root_bundle, cert.payload(), cert.issuer_signature):
        return AuthzDecision(False, "issuer signature invalid")
    if not cert.issued_at <= now < cert.expires_at:
        return AuthzDecision(False, "certificate expired")
    if rl.is_revoked(cert.cert_id):
        return AuthzDecision(False, "certificate revoked")
    return AuthzDecision(True, "ok")


def verify_signature(
    cert: Certificate,
    message: bytes,
    signature: bytes,
    rl: RevocationList,
    now: int,
    root_bundle: bytes,
) -> AuthzDecision:
    """Full identity check: message signature, cert validity, revocation."""
    cert_ok = check_certificate(cert, rl, now, root_bundle)
    if not cert_ok.allowed:
        return cert_ok
    if not crypto.verify(cert.verification_key, message, signature):
        return AuthzDecision(False, "message signature invalid")
    return AuthzDecision(True, "ok")


def authorize(cert: Certificate, action: Action) -> AuthzDecision:
    """Role matrix check only; pair with verify_signature for a full gate."""
    if action in _MATRIX[cert.role]:
        return AuthzDecision(True, "ok")
    return AuthzDecision(False, f"role {cert.role.value} may not {action.value}")


def revoke(
    ca: CertificateAuthority,
    rl: RevocationList,
    cert_id: str,
    reason: str,
    now: int,
) -> RevocationList:
    if cert_id not in ca.certificates:
        raise UnknownCert(cert_id)
    rl.add(cert_id, now, reason)
    return rl
