"""Byte frames for share submissions.

Ring/field submissions (additive, Shamir, plaintext) use:

    computation_id (16B) | party_index (1B) | value_count (2B) | values (8B each, BE)

where value_count is the number of 8-byte values that follow (vector fields
are flattened in schema order, so the frame is self-delimiting). Additive
shares put the full 64-bit share in each slot; Shamir frames put the share's
y element (the x coordinate is the party index); plaintext submissions use
party index 0.

Homomorphic submissions carry arbitrarily large ciphertexts, so each value is
length-prefixed instead of fixed-width:

    computation_id (16B) | party_index (1B) | value_count (2B) |
    per value: length (4B) | big-endian ciphertext bytes
"""

from __future__ import annotations

import struct

from .errors import ParseError

PARTY_PLAINTEXT = 0


def encode_share_frame(computation_id: bytes, party_index: int, values) -> bytes:
    if len(computation_id) != 16:
        raise ValueError("computation id must be 16 bytes")
    if not 0 <= party_index <= 255:
        raise ValueError("party index must fit one byte")
    out = [computation_id, bytes([party_index]), struct.pack(">H", len(values))]
    for v in values:
        out.append(struct.pack(">Q", v))
    return b"".join(out)


def decode_share_frame(data: bytes) -> tuple[bytes, int, tuple[int, ...]]:
    if len(data) < 19:
        raise ParseError("share frame too short")
    cid, party = data[:16], data[16]
    (count,) = struct.unpack(">H", data[17:19])
    body = data[19:]
    if len(body) != 8 * count:
        raise ParseError(f"expected {8 * count} value bytes, got {len(body)}")
    values = struct.unpack(f">{count}Q", body) if count else ()
    return cid, party, values


def encode_cipher_frame(computation_id: bytes, party_index: int, ciphertexts) -> bytes:
    if len(computation_id) != 16:
        raise ValueError("computation id must be 16 bytes")
    out = [computation_id, bytes([party_index]), struct.pack(">H", len(ciphertexts))]
    for c in ciphertexts:
        raw = c.to_bytes((c.bit_length() + 7) // 8 or 1, "big")
        out.append(struct.pack(">I", len(raw)))
        out.append(raw)
    return b"".join(out)


def decode_cipher_frame(data: bytes) -> tuple[bytes, int, tuple[int, ...]]:
    if len(data) < 19:
        raise ParseError("cipher frame too short")
    cid, party = data[:16], data[16]
    (count,) = struct.unpack(">H", data[17:19])
    pos = 19
    values = []
    for _ in range(count):
        if pos + 4 > len(data):
            raise ParseError("truncated cipher frame")
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        pos += 4
        if pos + length > len(data):
            raise ParseError("truncated ciphertext")
        values.append(int.from_bytes(data[pos : pos + length], "big"))
        pos += length
    if pos != len(data):
        raise ParseError("trailing bytes in cipher frame")
    return cid, party, tuple(values)
