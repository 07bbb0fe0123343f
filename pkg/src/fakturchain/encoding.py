"""Canonical byte encodings shared by hashing, signing, and the simulated wire.

Every value that is ever hashed, signed, or byte-compared across nodes goes
through ``canonical_encode``: a type-tagged, length-prefixed binary form with
dict keys sorted, so identical values always produce identical bytes. The
text counterpart ``canonical_json`` (sorted keys, compact separators) is used
where a human-inspectable, byte-stable form is wanted (certificates, API
request signing, exported reports).
"""

from __future__ import annotations

import hashlib
import json
import re
import struct

DIGEST_WIDTH = 32
ZERO_DIGEST = b"\x00" * DIGEST_WIDTH

_U32 = struct.Struct(">I")
_INT_RE = re.compile(rb"^(0|-?[1-9][0-9]*)$")


class EncodingError(ValueError):
    """A value cannot be canonically encoded, or bytes do not decode."""


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def digest_hex(digest: bytes) -> str:
    if len(digest) != DIGEST_WIDTH:
        raise EncodingError(f"digest must be {DIGEST_WIDTH} bytes, got {len(digest)}")
    return digest.hex()


def digest_from_hex(text: str) -> bytes:
    raw = bytes.fromhex(text)
    if len(raw) != DIGEST_WIDTH:
        raise EncodingError(f"digest must be {DIGEST_WIDTH} bytes, got {len(raw)}")
    return raw


def canonical_encode(value) -> bytes:
    out = bytearray()
    _encode_into(value, out)
    return bytes(out)


def _encode_into(value, out: bytearray) -> None:
    if value is None:
        out += b"N"
    elif value is True:
        out += b"T"
    elif value is False:
        out += b"F"
    elif isinstance(value, int):
        text = str(value).encode("ascii")
        out += b"I"
        out += _U32.pack(len(text))
        out += text
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out += b"S"
        out += _U32.pack(len(raw))
        out += raw
    elif isinstance(value, (bytes, bytearray)):
        out += b"B"
        out += _U32.pack(len(value))
        out += bytes(value)
    elif isinstance(value, (list, tuple)):
        out += b"L"
        out += _U32.pack(len(value))
        for item in value:
            _encode_into(item, out)
    elif isinstance(value, dict):
        keys = list(value.keys())
        if not all(isinstance(k, str) for k in keys):
            raise EncodingError("dict keys must be strings")
        ordered = sorted(keys, key=lambda k: k.encode("utf-8"))
        if len(set(ordered)) != len(ordered):
            raise EncodingError("duplicate dict keys")
        out += b"D"
        out += _U32.pack(len(ordered))
        for key in ordered:
            _encode_into(key, out)
            _encode_into(value[key], out)
    else:
        raise EncodingError(f"type {type(value).__name__} has no canonical encoding")


def canonical_decode(data: bytes):
    """Exact inverse of ``canonical_encode``; rejects trailing bytes."""
    value, offset = _decode_from(data, 0)
    if offset != len(data):
        raise EncodingError(f"{len(data) - offset} trailing bytes after value")
    return value


def _decode_from(data: bytes, offset: int):
    if offset >= len(data):
        raise EncodingError("truncated value")
    tag = data[offset : offset + 1]
    offset += 1
    if tag == b"N":
        return None, offset
    if tag == b"T":
        return True, offset
    if tag == b"F":
        return False, offset
    if tag == b"I":
        raw, offset = _read_block(data, offset)
        if not _INT_RE.match(raw):
            raise EncodingError(f"non-canonical integer {raw!r}")
        return int(raw), offset
    if tag == b"S":
        raw, offset = _read_block(data, offset)
        try:
            return raw.decode("utf-8"), offset
        except UnicodeDecodeError as exc:
            raise EncodingError("invalid utf-8 in string") from exc
    if tag == b"B":
        raw, offset = _read_block(data, offset)
        return raw, offset
    if tag == b"L":
        count, offset = _read_count(data, offset)
        items = []
        for _ in range(count):
            item, offset = _decode_from(data, offset)
            items.append(item)
        return items, offset
    if tag == b"D":
        count, offset = _read_count(data, offset)
        result = {}
        prev_key: bytes | None = None
        for _ in range(count):
            key, offset = _decode_from(data, offset)
            if not isinstance(key, str):
                raise EncodingError("dict key is not a string")
            key_bytes = key.encode("utf-8")
            if prev_key is not None and key_bytes <= prev_key:
                raise EncodingError("dict keys not strictly sorted")
            prev_key = key_bytes
            value, offset = _decode_from(data, offset)
            result[key] = value
        return result, offset
    raise EncodingError(f"unknown type tag {tag!r}")


def _read_count(data: bytes, offset: int) -> tuple[int, int]:
    if offset + 4 > len(data):
        raise EncodingError("truncated length prefix")
    (count,) = _U32.unpack_from(data, offset)
    return count, offset + 4


def _read_block(data: bytes, offset: int) -> tuple[bytes, int]:
    length, offset = _read_count(data, offset)
    if offset + length > len(data):
        raise EncodingError("truncated payload")
    return data[offset : offset + length], offset + length


def canonical_json(value) -> bytes:
    """Byte-stable structured text form: sorted keys, compact separators."""
    try:
        text = json.dumps(
            value, sort_keys=True, separators=(",", ":"), ensure_ascii=False,
            allow_nan=False,
        )
    except (TypeError, ValueError) as exc:
        raise EncodingError(str(exc)) from exc
    return text.encode("utf-8")
