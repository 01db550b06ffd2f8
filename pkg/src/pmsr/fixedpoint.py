"""Fixed-point encoding bridging real-valued map results into Z_(2^64).

Values are scaled by 2^16 and stored two's-complement in a 64-bit ring, so
additive aggregation of encoded values is exact modular arithmetic.  The
2^16 scale gives ~1.5e-5 resolution while leaving enough integer headroom
for million-participant sums of moderate magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import OutOfRange

SCALE_BITS = 16
SCALE = 1 << SCALE_BITS
MODULUS = 1 << 64
HALF_MODULUS = 1 << 63
# |value| must stay below 2^47 so the scaled magnitude fits the signed ring.
MAX_ABS = 1 << 47


@dataclass(frozen=True)
class FixedPoint:
    """A real number encoded as value * 2^16, two's-complement mod 2^64."""

    raw: int

    def __post_init__(self):
        if not 0 <= self.raw < MODULUS:
            raise OutOfRange(f"raw {self.raw} outside Z_(2^64)")

    def to_float(self) -> float:
        return decode_fixed(self)


def encode_fixed(value: float) -> FixedPoint:
    """Encode a real into fixed point, rounding half to even on the scaled value."""
    if not abs(value) < MAX_ABS:
        raise OutOfRange(f"|{value}| >= 2^47")
    scaled = round(value * SCALE)  # *2^16 is exact in binary float; round() is half-even
    return FixedPoint(scaled % MODULUS)


def decode_fixed(fp: FixedPoint) -> float:
    signed = fp.raw - MODULUS if fp.raw >= HALF_MODULUS else fp.raw
    return signed / SCALE


def decode_raw(raw: int) -> float:
    """Decode a bare ring element without wrapping it in FixedPoint."""
    raw %= MODULUS
    signed = raw - MODULUS if raw >= HALF_MODULUS else raw
    return signed / SCALE


def add_raw(a: int, b: int) -> int:
    return (a + b) % MODULUS
