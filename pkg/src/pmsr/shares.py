"""Secret-sharing backends for the secure reduce phase.

Two schemes are provided:

* additive 3-party sharing over Z_(2^64): a value x splits into x1, x2, x3
  with x1 + x2 + x3 = x (mod 2^64), one share per coordinator;
* Shamir t-of-n sharing over GF(p) with p = 2^61 - 1: a random polynomial of
  degree t-1 with f(0) = secret, share i is (i, f(i)). Any t shares
  reconstruct via Lagrange interpolation at zero; fewer reveal nothing.

Both are linear, so coordinators can fold submissions share-wise and only
ever reconstruct the aggregate.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random

from .errors import (
    DuplicateParty,
    DuplicateX,
    EvaluationPointMismatch,
    InsufficientShares,
    InvalidThreshold,
    MissingParty,
    PartyMismatch,
)

RING_MODULUS = 1 << 64
MERSENNE_61 = (1 << 61) - 1


@dataclass(frozen=True)
class AdditiveShare:
    party_index: int  # 1..3
    raw: int

    def __post_init__(self):
        if self.party_index not in (1, 2, 3):
            raise PartyMismatch(f"party index {self.party_index} not in 1..3")
        if not 0 <= self.raw < RING_MODULUS:
            raise ValueError("share outside Z_(2^64)")


def share_additive(raw: int, rng: Random) -> tuple[AdditiveShare, AdditiveShare, AdditiveShare]:
    """Split a ring element into three shares summing to it mod 2^64."""
    raw %= RING_MODULUS
    x1 = rng.getrandbits(64)
    x2 = rng.getrandbits(64)
    x3 = (raw - x1 - x2) % RING_MODULUS
    return (AdditiveShare(1, x1), AdditiveShare(2, x2), AdditiveShare(3, x3))


def reconstruct_additive(shares) -> int:
    seen = {}
    for s in shares:
        if s.party_index in seen:
            raise DuplicateParty(f"party {s.party_index} appears twice")
        seen[s.party_index] = s.raw
    for p in (1, 2, 3):
        if p not in seen:
            raise MissingParty(f"party {p} missing")
    if len(seen) != 3:
        raise MissingParty("expected exactly three parties")
    return sum(seen.values()) % RING_MODULUS


def add_shares_additive(a: AdditiveShare, b: AdditiveShare) -> AdditiveShare:
    if a.party_index != b.party_index:
        raise PartyMismatch(f"{a.party_index} != {b.party_index}")
    return AdditiveShare(a.party_index, (a.raw + b.raw) % RING_MODULUS)


@dataclass(frozen=True)
class ShamirShare:
    x: int
    y: int


def share_shamir(
    secret: int, t: int, n: int, rng: Random, prime: int = MERSENNE_61
) -> list[ShamirShare]:
    """Shamir-share a field element; any t of the n shares reconstruct it."""
    if not 1 <= t <= n < prime:
        raise InvalidThreshold(f"need 1 <= t <= n < p, got t={t} n={n}")
    secret %= prime
    coeffs = [secret] + [rng.randrange(prime) for _ in range(t - 1)]
    shares = []
    for x in range(1, n + 1):
        y = 0
        for c in reversed(coeffs):  # Horner
            y = (y * x + c) % prime
        shares.append(ShamirShare(x, y))
    return shares


def reconstruct_shamir(shares, t: int, prime: int = MERSENNE_61) -> int:
    """Lagrange interpolation at zero over GF(prime)."""
    shares = list(shares)
    if len(shares) < t:
        raise InsufficientShares(f"{len(shares)} shares, threshold {t}")
    xs = [s.x for s in shares]
    if len(set(xs)) != len(xs):
        raise DuplicateX("duplicate evaluation points")
    total = 0
    for j, sj in enumerate(shares):
        num, den = 1, 1
        for m, sm in enumerate(shares):
            if m == j:
                continue
            num = num * (-sm.x % prime) % prime
            den = den * ((sj.x - sm.x) % prime) % prime
        total = (total + sj.y * num * pow(den, -1, prime)) % prime
    return total


def add_shares_shamir(a: ShamirShare, b: ShamirShare, prime: int = MERSENNE_61) -> ShamirShare:
    if a.x != b.x:
        raise EvaluationPointMismatch(f"{a.x} != {b.x}")
    return ShamirShare(a.x, (a.y + b.y) % prime)


# --- ring <-> field embedding ---------------------------------------------------
# Fixed-point values live two's-complement in Z_(2^64); Shamir secrets live in
# GF(p). The centered embedding below is exact while |signed value| < p/2.

def ring_to_field(raw: int, prime: int = MERSENNE_61) -> int:
    signed = raw - RING_MODULUS if raw >= RING_MODULUS // 2 else raw
    if not -prime // 2 < signed < prime // 2:
        raise ValueError("value too large for the field embedding")
    return signed % prime


def field_to_ring(elem: int, prime: int = MERSENNE_61) -> int:
    signed = elem - prime if elem > prime // 2 else elem
    return signed % RING_MODULUS
