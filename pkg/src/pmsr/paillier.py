"""Paillier cryptosystem: the additively homomorphic aggregation backend.

Multiplying ciphertexts adds plaintexts:

    dec(enc(a) * enc(b) mod n^2) = a + b (mod n)

Key generation is single-dealer: one party produces the keypair and holds the
private part. Encryption uses the g = n + 1 variant, so enc(m) =
(1 + n*m) * r^n mod n^2 with a fresh random r coprime to n, which makes
encryption probabilistic (equal plaintexts yield different ciphertexts).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from random import Random

from .errors import MalformedCiphertext, PlaintextOutOfRange

try:  # big-int modexp is the hot path; gmpy2 speeds it up when present
    import gmpy2

    def _powmod(base: int, exp: int, mod: int) -> int:
        return int(gmpy2.powmod(base, exp, mod))

except ImportError:  # pragma: no cover

    def _powmod(base: int, exp: int, mod: int) -> int:
        return pow(base, exp, mod)


def _is_probable_prime(n: int, rng: Random, rounds: int = 30) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = _powmod(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = _powmod(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: Random) -> int:
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if _is_probable_prime(cand, rng):
            return cand


@dataclass(frozen=True)
class HEPublicKey:
    n: int

    @property
    def n_sq(self) -> int:
        return self.n * self.n


@dataclass(frozen=True)
class HEKeyPair:
    public: HEPublicKey
    lam: int  # phi(n) = (p-1)(q-1)
    mu: int  # phi(n)^-1 mod n


@dataclass(frozen=True)
class HECiphertext:
    c: int


def he_keygen(bits: int, rng: Random) -> HEKeyPair:
    """Generate a keypair with an n of roughly `bits` bits (>= 512)."""
    if bits < 512:
        raise ValueError("modulus below 512 bits is not accepted")
    while True:
        p = _random_prime(bits // 2, rng)
        q = _random_prime(bits - bits // 2, rng)
        if p != q and gcd(p * q, (p - 1) * (q - 1)) == 1:
            break
    n = p * q
    lam = (p - 1) * (q - 1)
    mu = pow(lam, -1, n)
    return HEKeyPair(HEPublicKey(n), lam, mu)


def he_encrypt(key: HEPublicKey, m: int, rng: Random) -> HECiphertext:
    n = key.n
    if not 0 <= m < n:
        raise PlaintextOutOfRange(f"plaintext not in Z_{n}")
    while True:
        r = rng.randrange(1, n)
        if gcd(r, n) == 1:
            break
    c = (1 + n * m) % key.n_sq * _powmod(r, n, key.n_sq) % key.n_sq
    return HECiphertext(c)


def _check_ciphertext(key: HEPublicKey, ct: HECiphertext) -> None:
    if not 0 < ct.c < key.n_sq:
        raise MalformedCiphertext("ciphertext outside Z_(n^2)")
    if gcd(ct.c, key.n) != 1:
        raise MalformedCiphertext("ciphertext shares a factor with n")


def he_add(key: HEPublicKey, c1: HECiphertext, c2: HECiphertext) -> HECiphertext:
    _check_ciphertext(key, c1)
    _check_ciphertext(key, c2)
    return HECiphertext(c1.c * c2.c % key.n_sq)


def he_decrypt(keys: HEKeyPair, ct: HECiphertext) -> int:
    _check_ciphertext(keys.public, ct)
    n = keys.public.n
    u = _powmod(ct.c, keys.lam, keys.public.n_sq)
    return (u - 1) // n * keys.mu % n
