"""Additively homomorphic encryption backend."""

from random import Random

import pytest

from pmsr.errors import MalformedCiphertext, PlaintextOutOfRange
from pmsr.fixedpoint import MODULUS, encode_fixed
from pmsr.paillier import HECiphertext, he_add, he_decrypt, he_encrypt, he_keygen


@pytest.fixture(scope="module")
def keys():
    return he_keygen(512, Random(2024))


def test_decrypt_zero(keys):
    rng = Random(0)
    assert he_decrypt(keys, he_encrypt(keys.public, 0, rng)) == 0


def test_encryption_is_probabilistic(keys):
    rng = Random(1)
    a = he_encrypt(keys.public, 5, rng)
    b = he_encrypt(keys.public, 5, rng)
    assert a != b
    assert he_decrypt(keys, a) == he_decrypt(keys, b) == 5


def test_homomorphic_addition_1000_random_pairs(keys):
    rng = Random(2)
    n = keys.public.n
    for _ in range(1000):
        a, b = rng.randrange(n), rng.randrange(n)
        combined = he_add(keys.public, he_encrypt(keys.public, a, rng), he_encrypt(keys.public, b, rng))
        assert he_decrypt(keys, combined) == (a + b) % n


def test_fold_100_fixed_point_values(keys):
    rng = Random(3)
    values = [rng.uniform(-50, 50) for _ in range(100)]
    raws = [encode_fixed(v).raw for v in values]
    acc = he_encrypt(keys.public, raws[0], rng)
    for raw in raws[1:]:
        acc = he_add(keys.public, acc, he_encrypt(keys.public, raw, rng))
    # raws never wrap the much larger n, so reducing mod 2^64 recovers the
    # ring-domain fixed-point sum
    assert he_decrypt(keys, acc) % MODULUS == sum(raws) % MODULUS


def test_plaintext_out_of_range(keys):
    rng = Random(4)
    with pytest.raises(PlaintextOutOfRange):
        he_encrypt(keys.public, keys.public.n, rng)
    with pytest.raises(PlaintextOutOfRange):
        he_encrypt(keys.public, -1, rng)


def test_malformed_ciphertext(keys):
    with pytest.raises(MalformedCiphertext):
        he_decrypt(keys, HECiphertext(0))
    with pytest.raises(MalformedCiphertext):
        he_decrypt(keys, HECiphertext(keys.public.n))  # shares a factor with n
    with pytest.raises(MalformedCiphertext):
        he_add(keys.public, HECiphertext(keys.public.n_sq), HECiphertext(1))


def test_keygen_deterministic_and_min_size():
    a = he_keygen(512, Random(9))
    b = he_keygen(512, Random(9))
    assert a == b
    assert a.public.n.bit_length() >= 511
    with pytest.raises(ValueError):
        he_keygen(256, Random(0))
