"""Application logic for NSFP issuance and Faktur validation.

Everything here is deterministic and pure: each operation takes a world state
and returns a new one, never mutating its input. The ledger replays these
functions against committed blocks, so two nodes folding the same block
sequence from genesis must land on byte-identical state hashes.

Money is integer rupiah with no sub-unit. Quantities are canonical decimal
strings, so a line total can be fractional; an invoice whose exact total is
not a whole rupiah can never match an integer tax base and is rejected as an
arithmetic violation.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal
from enum import Enum

from .encoding import canonical_encode, sha256
from .identity import Certificate, Role

SERIAL_TRANSACTION_CODE = "01"
SERIAL_STATUS_DIGIT = "0"
SERIAL_BLOCK = "000"
MAX_SEQUENCE = 99_999_999
CURRENCY_LIMIT = 10**18

_SERIAL_RE = re.compile(r"^(\d{2})(\d)\.(\d{3})\.(\d{2})\.(\d{8})$")
_QUANTITY_RE = re.compile(r"^(0|[1-9][0-9]*)(?:\.([0-9]*[1-9]))?$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")

REASON_FORMAT = "format"
REASON_ITEMS = "items"
REASON_OWNERSHIP = "ownership"
REASON_DUPLICATE = "duplicate"
REASON_REVOKED = "revoked"
REASON_YEAR = "year"
REASON_ARITHMETIC = "arithmetic"
REASON_HASH = "hash"
REASON_REPLAY = "replay"
REASON_UNKNOWN_OP = "unknown-op"
REASON_ROLE = "role"


class ChaincodeError(Exception):
    pass


class NotEligible(ChaincodeError):
    pass


class BadCount(ChaincodeError):
    pass


class BadYear(ChaincodeError):
    pass


class Overflow(ChaincodeError):
    pass


@dataclass(frozen=True)
class VatConfig:
    """Network-wide validation parameters.

    The VAT rate is an exact rational ``rate_num / rate_den``. Year bounds are
    two-digit allocation-year suffixes.
    """

    rate_num: int = 11
    rate_den: int = 100
    annual_quota: int = 1000
    request_cap: int = 100
    year_min: int = 20
    year_max: int = 40
    djp_org: str = "djp"


class SerialStatus(str, Enum):
    AVAILABLE = "available"
    USED = "used"
    REVOKED = "revoked"


def format_serial(tax_year: int, sequence: int) -> str:
    if not 0 <= tax_year <= 99:
        raise BadYear(str(tax_year))
    if not 1 <= sequence <= MAX_SEQUENCE:
        raise ChaincodeError(f"sequence out of range: {sequence}")
    return (
        f"{SERIAL_TRANSACTION_CODE}{SERIAL_STATUS_DIGIT}"
        f".{SERIAL_BLOCK}.{tax_year:02d}.{sequence:08d}"
    )


def parse_serial(serial: str) -> tuple[int, int]:
    """Return (tax_year, sequence) from a canonical serial string."""
    match = _SERIAL_RE.match(serial)
    if match is None:
        raise ChaincodeError(f"malformed serial: {serial!r}")
    return int(match.group(4)), int(match.group(5))


def serial_digits(serial: str) -> str:
    return serial.replace(".", "")


@dataclass
class NsfpAllocation:
    allocation_id: str
    owner_org: str
    tax_year: int
    serials: list[str]
    status: dict[str, SerialStatus]
    issued_tx_id: str

    def to_dict(self) -> dict:
        return {
            "allocation_id": self.allocation_id,
            "owner_org": self.owner_org,
            "tax_year": self.tax_year,
            "serials": list(self.serials),
            "status": {s: st.value for s, st in self.status.items()},
            "issued_tx_id": self.issued_tx_id,
        }


@dataclass(frozen=True)
class LineItem:
    description: str
    quantity: str
    unit_price: int

    def to_dict(self) -> dict:
        return {
            "description": self.description,
            "quantity": self.quantity,
            "unit_price": self.unit_price,
        }


@dataclass(frozen=True)
class Faktur:
    """A VAT invoice as exchanged privately between seller and tax authority."""

    nsfp: str
    seller_org: str
    buyer_tax_id: str
    transaction_date: str
    line_items: tuple[LineItem, ...]
    tax_base: int
    vat_amount: int
    faktur_hash: bytes

    def body_dict(self) -> dict:
        return faktur_body_dict(
            self.nsfp,
            self.seller_org,
            self.buyer_tax_id,
            self.transaction_date,
            self.line_items,
            self.tax_base,
            self.vat_amount,
        )

    def payload_bytes(self) -> bytes:
        return canonical_encode(self.body_dict())


def faktur_body_dict(
    nsfp: str,
    seller_org: str,
    buyer_tax_id: str,
    transaction_date: str,
    line_items: tuple[LineItem, ...],
    tax_base: int,
    vat_amount: int,
) -> dict:
    return {
        "nsfp": nsfp,
        "seller_org": seller_org,
        "buyer_tax_id": buyer_tax_id,
        "transaction_date": transaction_date,
        "line_items": [item.to_dict() for item in line_items],
        "tax_base": tax_base,
        "vat_amount": vat_amount,
    }


def make_faktur(
    nsfp: str,
    seller_org: str,
    buyer_tax_id: str,
    transaction_date: str,
    line_items: list[LineItem] | tuple[LineItem, ...],
    tax_base: int,
    vat_amount: int,
) -> Faktur:
    items = tuple(line_items)
    body = faktur_body_dict(
        nsfp, seller_org, buyer_tax_id, transaction_date, items, tax_base, vat_amount
    )
    return Faktur(
        nsfp=nsfp,
        seller_org=seller_org,
        buyer_tax_id=buyer_tax_id,
        transaction_date=transaction_date,
        line_items=items,
        tax_base=tax_base,
        vat_amount=vat_amount,
        faktur_hash=sha256(canonical_encode(body)),
    )


@dataclass(frozen=True)
class ValidationResult:
    accepted: bool
    reasons: tuple[str, ...]
    anchored_hash: bytes | None = None


@dataclass(frozen=True)
class FakturEntry:
    """Public index entry for a committed faktur: hash and parties only."""

    nsfp: str
    faktur_hash: bytes
    seller_org: str
    receiver_org: str

    def to_dict(self) -> dict:
        return {
            "nsfp": self.nsfp,
            "faktur_hash": self.faktur_hash,
            "seller_org": self.seller_org,
            "receiver_org": self.receiver_org,
        }


@dataclass
class WorldState:
    """Key-value projection of the committed transaction log.

    All containers are plain dicts/lists/sets of encodable values so the
    state hash is a total function of the content.
    """

    nsfp_allocations: dict[str, NsfpAllocation] = field(default_factory=dict)
    serial_to_allocation: dict[str, str] = field(default_factory=dict)
    faktur_index: dict[str, FakturEntry] = field(default_factory=dict)
    cert_revocations: set[str] = field(default_factory=set)
    next_sequence: int = 1
    seen_tx_ids: set[str] = field(default_factory=set)
    rejections: list[dict] = field(default_factory=list)
    audit_log: list[dict] = field(default_factory=list)

    def clone(self) -> WorldState:
        return copy.deepcopy(self)

    def to_dict(self) -> dict:
        return {
            "nsfp_allocations": {
                key: alloc.to_dict() for key, alloc in self.nsfp_allocations.items()
            },
            "faktur_index": {
                key: entry.to_dict() for key, entry in self.faktur_index.items()
            },
            "cert_revocations": sorted(self.cert_revocations),
            "next_sequence": self.next_sequence,
            "seen_tx_ids": sorted(self.seen_tx_ids),
            "rejections": self.rejections,
            "audit_log": self.audit_log,
        }

    def state_hash(self) -> bytes:
        return sha256(canonical_encode(self.to_dict()))

    def serial_status(self, serial: str) -> SerialStatus | None:
        allocation_id = self.serial_to_allocation.get(serial)
        if allocation_id is None:
            return None
        return self.nsfp_allocations[allocation_id].status[serial]

    def serial_owner(self, serial: str) -> str | None:
        allocation_id = self.serial_to_allocation.get(serial)
        if allocation_id is None:
            return None
        return self.nsfp_allocations[allocation_id].owner_org

    def serials_issued(self, owner_org: str, tax_year: int) -> int:
        return sum(
            len(alloc.serials)
            for alloc in self.nsfp_allocations.values()
            if alloc.owner_org == owner_org and alloc.tax_year == tax_year
        )


def parse_quantity(text: str) -> tuple[int, int]:
    """Parse a canonical decimal string into (numerator, scale).

    The value is numerator / 10**scale. Only the canonical form is accepted:
    no sign, no leading zeros, no trailing fractional zeros.
    """
    if not isinstance(text, str) or len(text) > 24:
        raise ChaincodeError(f"bad quantity: {text!r}")
    match = _QUANTITY_RE.match(text)
    if match is None:
        raise ChaincodeError(f"bad quantity: {text!r}")
    whole, frac = match.group(1), match.group(2) or ""
    return int(whole + frac), len(frac)


def compute_vat(
    line_items: list[LineItem] | tuple[LineItem, ...], config: VatConfig
) -> tuple[Decimal, int]:
    """Exact tax base and half-up-rounded integer VAT for the given items.

    The base is Σ quantity × unit_price carried as scaled integers; no
    floating point anywhere. VAT rounds half-up to whole rupiah.
    """
    total_num = 0
    total_scale = 0
    for item in line_items:
        if not isinstance(item.unit_price, int) or isinstance(item.unit_price, bool):
            raise ChaincodeError(f"bad unit price: {item.unit_price!r}")
        if item.unit_price < 0:
            raise ChaincodeError(f"bad unit price: {item.unit_price!r}")
        if item.unit_price >= CURRENCY_LIMIT:
            raise Overflow(f"unit price {item.unit_price}")
        qty_num, qty_scale = parse_quantity(item.quantity)
        num = qty_num * item.unit_price
        if qty_scale > total_scale:
            total_num *= 10 ** (qty_scale - total_scale)
            total_scale = qty_scale
        total_num += num * 10 ** (total_scale - qty_scale)
    if total_num >= CURRENCY_LIMIT * 10**total_scale:
        raise Overflow("tax base exceeds 18-digit currency magnitude")
    # Exact: Decimal((sign, digits, exponent)) bypasses context rounding.
    tax_base = Decimal((0, tuple(map(int, str(total_num))), -total_scale))
    denominator = config.rate_den * 10**total_scale
    vat = (2 * total_num * config.rate_num + denominator) // (2 * denominator)
    if vat >= CURRENCY_LIMIT:
        raise Overflow("vat exceeds 18-digit currency magnitude")
    return tax_base, vat


def post_nsfp(
    state: WorldState,
    caller: Certificate,
    tax_year: int,
    count: int,
    config: VatConfig,
    tx_id: str = "local",
) -> tuple[WorldState, NsfpAllocation]:
    """Allocate ``count`` fresh serials to the calling PKP for one tax year."""
    if caller.role is not Role.PKP:
        raise NotEligible(f"role {caller.role.value}")
    if caller.cert_id in state.cert_revocations:
        raise NotEligible("certificate revoked")
    if not isinstance(count, int) or isinstance(count, bool):
        raise BadCount(repr(count))
    if not 1 <= count <= config.request_cap:
        raise BadCount(str(count))
    if not isinstance(tax_year, int) or isinstance(tax_year, bool):
        raise BadYear(repr(tax_year))
    if not config.year_min <= tax_year <= config.year_max:
        raise BadYear(str(tax_year))
    if state.serials_issued(caller.subject, tax_year) + count > config.annual_quota:
        raise NotEligible("annual quota exhausted")
    if state.next_sequence + count - 1 > MAX_SEQUENCE:
        raise NotEligible("serial space exhausted")

    new_state = state.clone()
    serials = [
        format_serial(tax_year, new_state.next_sequence + i) for i in range(count)
    ]
    allocation = NsfpAllocation(
        allocation_id=tx_id,
        owner_org=caller.subject,
        tax_year=tax_year,
        serials=serials,
        status={serial: SerialStatus.AVAILABLE for serial in serials},
        issued_tx_id=tx_id,
    )
    new_state.next_sequence += count
    new_state.nsfp_allocations[allocation.allocation_id] = allocation
    for serial in serials:
        new_state.serial_to_allocation[serial] = allocation.allocation_id
    return new_state, allocation


def _faktur_shape_reasons(faktur: Faktur) -> list[str]:
    reasons = []
    well_formed = True
    if _SERIAL_RE.match(faktur.nsfp) is None:
        well_formed = False
    if not isinstance(faktur.buyer_tax_id, str) or not faktur.buyer_tax_id:
        well_formed = False
    if not isinstance(faktur.transaction_date, str) or _DATE_RE.match(
        faktur.transaction_date
    ) is None:
        well_formed = False
    else:
        try:
            date.fromisoformat(faktur.transaction_date)
        except ValueError:
            well_formed = False
    for item in faktur.line_items:
        if not isinstance(item.description, str):
            well_formed = False
    if not well_formed:
        reasons.append(REASON_FORMAT)
    if len(faktur.line_items) == 0:
        reasons.append(REASON_ITEMS)
    return reasons


def validate_faktur(
    state: WorldState, caller_org: str, faktur: Faktur, config: VatConfig
) -> ValidationResult:
    """Run every check; the reasons list names each independent failure."""
    reasons = _faktur_shape_reasons(faktur)
    shape_ok = REASON_FORMAT not in reasons

    if shape_ok:
        status = state.serial_status(faktur.nsfp)
        owner = state.serial_owner(faktur.nsfp)
        if status is None or owner != caller_org or faktur.seller_org != caller_org:
            reasons.append(REASON_OWNERSHIP)
        if status is SerialStatus.USED:
            reasons.append(REASON_DUPLICATE)
        elif status is SerialStatus.REVOKED:
            reasons.append(REASON_REVOKED)
        serial_year, _ = parse_serial(faktur.nsfp)
        if int(faktur.transaction_date[:4]) % 100 != serial_year:
            reasons.append(REASON_YEAR)

    try:
        base, vat = compute_vat(faktur.line_items, config)
        if base != faktur.tax_base or vat != faktur.vat_amount:
            reasons.append(REASON_ARITHMETIC)
        elif not isinstance(faktur.tax_base, int) or not isinstance(
            faktur.vat_amount, int
        ):
            reasons.append(REASON_ARITHMETIC)
    except ChaincodeError:
        reasons.append(REASON_ARITHMETIC)

    if sha256(canonical_encode(faktur.body_dict())) != faktur.faktur_hash:
        reasons.append(REASON_HASH)

    if reasons:
        return ValidationResult(False, tuple(reasons))
    return ValidationResult(True, (), faktur.faktur_hash)


def post_faktur(
    state: WorldState, caller: Certificate, faktur: Faktur, config: VatConfig
) -> tuple[WorldState, ValidationResult]:
    """Validate an invoice and, on acceptance, mark its serial as used."""
    if caller.role is not Role.PKP:
        return state, ValidationResult(False, (REASON_ROLE,))
    result = validate_faktur(state, caller.subject, faktur, config)
    if not result.accepted:
        return state, result
    new_state = state.clone()
    _consume_serial(new_state, faktur.nsfp, faktur.faktur_hash, caller.subject, config)
    return new_state, result


def _consume_serial(
    state: WorldState, serial: str, faktur_hash: bytes, seller_org: str, config: VatConfig
) -> None:
    allocation = state.nsfp_allocations[state.serial_to_allocation[serial]]
    allocation.status[serial] = SerialStatus.USED
    state.faktur_index[serial] = FakturEntry(
        nsfp=serial,
        faktur_hash=faktur_hash,
        seller_org=seller_org,
        receiver_org=config.djp_org,
    )


def get_nsfp(
    state: WorldState,
    caller: Certificate,
    owner: str | None = None,
    tax_year: int | None = None,
    status: SerialStatus | None = None,
) -> list[NsfpAllocation]:
    """All allocations matching the filter; broadcast data, so no owner gate.

    A status filter keeps allocations holding at least one serial in that
    status.
    """
    if caller.role not in (Role.PKP, Role.DJP):
        raise ChaincodeError(f"role {caller.role.value} may not query allocations")
    out = []
    for alloc in state.nsfp_allocations.values():
        if owner is not None and alloc.owner_org != owner:
            continue
        if tax_year is not None and alloc.tax_year != tax_year:
            continue
        if status is not None and status not in alloc.status.values():
            continue
        out.append(alloc)
    out.sort(key=lambda a: (a.serials[0] if a.serials else "", a.allocation_id))
    return out


def get_faktur(
    state: WorldState,
    caller: Certificate,
    nsfp: str | None = None,
    seller: str | None = None,
) -> list[FakturEntry]:
    """Faktur index entries visible to the caller.

    The tax authority sees every entry; a PKP sees only entries where it is
    the seller. Entries outside a PKP's visibility are omitted entirely,
    hash included. Payload retrieval is the data plane's job.
    """
    if caller.role not in (Role.PKP, Role.DJP):
        raise ChaincodeError(f"role {caller.role.value} may not query fakturs")
    out = []
    for serial in sorted(state.faktur_index):
        entry = state.faktur_index[serial]
        if caller.role is Role.PKP and entry.seller_org != caller.subject:
            continue
        if nsfp is not None and entry.nsfp != nsfp:
            continue
        if seller is not None and entry.seller_org != seller:
            continue
        out.append(entry)
    return out


# --- Committed-transaction dispatch -----------------------------------------
#
# The ledger replays committed envelopes through apply_tx. Private payloads
# never appear here: a committed PostFaktur carries only the serial, the
# payload hash, and the claimed invoice year, all already public. Checks that
# need the payload (arithmetic, hash recomputation) run before ordering, on
# the two parties' own gateways; the deterministic subset below is what every
# node re-runs so honest nodes stay in lockstep.


@dataclass(frozen=True)
class AppliedTx:
    tx_id: str
    submitter: Certificate
    body: dict


def apply_tx(state: WorldState, tx: AppliedTx, config: VatConfig) -> WorldState:
    """Replay one committed transaction; rejections are recorded, never raised."""
    if tx.tx_id in state.seen_tx_ids:
        return _reject(state, tx, [REASON_REPLAY])
    op = tx.body.get("op")
    if op == "post_nsfp":
        return _apply_post_nsfp(state, tx, config)
    if op == "post_faktur":
        return _apply_post_faktur(state, tx, config)
    if op == "revoke_cert":
        return _apply_revoke_cert(state, tx)
    if op == "scenario_event":
        return _apply_scenario_event(state, tx)
    return _reject(state, tx, [REASON_UNKNOWN_OP])


def _mark_seen(state: WorldState, tx: AppliedTx) -> WorldState:
    state.seen_tx_ids.add(tx.tx_id)
    return state


def reject_tx(state: WorldState, tx_id: str, op: str, reasons: list[str]) -> WorldState:
    """Record a committed-but-invalid transaction as an inert rejection."""
    new_state = state.clone()
    new_state.rejections.append({"tx_id": tx_id, "op": op, "reasons": list(reasons)})
    new_state.seen_tx_ids.add(tx_id)
    return new_state


def _reject(state: WorldState, tx: AppliedTx, reasons: list[str]) -> WorldState:
    return reject_tx(state, tx.tx_id, str(tx.body.get("op")), reasons)


def _apply_post_nsfp(state: WorldState, tx: AppliedTx, config: VatConfig) -> WorldState:
    try:
        new_state, _ = post_nsfp(
            state,
            tx.submitter,
            tx.body.get("tax_year"),
            tx.body.get("count"),
            config,
            tx_id=tx.tx_id,
        )
    except ChaincodeError as exc:
        return _reject(state, tx, [type(exc).__name__])
    return _mark_seen(new_state, tx)


def _apply_post_faktur(state: WorldState, tx: AppliedTx, config: VatConfig) -> WorldState:
    serial = tx.body.get("nsfp")
    hash_hex = tx.body.get("faktur_hash")
    year = tx.body.get("year")
    reasons = []
    if (
        not isinstance(serial, str)
        or _SERIAL_RE.match(serial) is None
        or not isinstance(hash_hex, str)
        or len(hash_hex) != 64
        or not isinstance(year, int)
        or isinstance(year, bool)
    ):
        return _reject(state, tx, [REASON_FORMAT])
    if tx.submitter.role is not Role.PKP:
        reasons.append(REASON_ROLE)
    status = state.serial_status(serial)
    owner = state.serial_owner(serial)
    if status is None or owner != tx.submitter.subject:
        reasons.append(REASON_OWNERSHIP)
    if status is SerialStatus.USED:
        reasons.append(REASON_DUPLICATE)
    elif status is SerialStatus.REVOKED:
        reasons.append(REASON_REVOKED)
    serial_year, _ = parse_serial(serial)
    if year % 100 != serial_year:
        reasons.append(REASON_YEAR)
    if reasons:
        return _reject(state, tx, reasons)
    new_state = state.clone()
    _consume_serial(
        new_state, serial, bytes.fromhex(hash_hex), tx.submitter.subject, config
    )
    return _mark_seen(new_state, tx)


def _apply_revoke_cert(state: WorldState, tx: AppliedTx) -> WorldState:
    if tx.submitter.role is not Role.DJP:
        return _reject(state, tx, [REASON_ROLE])
    serial = tx.body.get("cert_serial")
    if not isinstance(serial, str) or not serial:
        return _reject(state, tx, [REASON_FORMAT])
    new_state = state.clone()
    new_state.cert_revocations.add(serial)
    new_state.audit_log.append(
        {
            "kind": "revocation",
            "tx_id": tx.tx_id,
            "cert_serial": serial,
            "reason": str(tx.body.get("reason", "")),
        }
    )
    return _mark_seen(new_state, tx)


def _apply_scenario_event(state: WorldState, tx: AppliedTx) -> WorldState:
    if tx.submitter.role is not Role.DJP:
        return _reject(state, tx, [REASON_ROLE])
    scenario = tx.body.get("scenario")
    kind = tx.body.get("kind")
    if not isinstance(scenario, str) or not isinstance(kind, str):
        return _reject(state, tx, [REASON_FORMAT])
    new_state = state.clone()
    new_state.audit_log.append(
        {
            "kind": "scenario_event",
            "tx_id": tx.tx_id,
            "scenario": scenario,
            "event": kind,
            "detail": str(tx.body.get("detail", "")),
        }
    )
    return _mark_seen(new_state, tx)
