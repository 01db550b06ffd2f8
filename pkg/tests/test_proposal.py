"""Canonical serialization, signatures, and schema validation."""

from random import Random

import pytest

from conftest import make_proposal, random_proposal, random_schema
from pmsr.errors import InvalidProposal, ParseError, SchemaViolation
from pmsr.fixedpoint import FixedPoint, encode_fixed
from pmsr.proposal import (
    SHAMIR,
    TEE_STUB,
    ComputationId,
    OutputSchema,
    SchemaField,
    ThreatModel,
    canonical_serialize,
    decode_signed,
    deserialize,
    dump_fields,
    encode_signed,
    generate_keypair,
    parse_proposal_text,
    sign_proposal,
    validate_output,
    verify_proposal,
)


def test_serialize_deterministic(keypair):
    _, pk = keypair
    p = make_proposal(pk)
    assert canonical_serialize(p) == canonical_serialize(p)


def test_serialize_injective_on_changed_field(keypair):
    _, pk = keypair
    p = make_proposal(pk, min_participants=5)
    q = make_proposal(pk, min_participants=6)
    assert canonical_serialize(p) != canonical_serialize(q)


def test_roundtrip_randomized(keypair):
    # structural-equality oracle over randomized proposals
    _, pk = keypair
    rng = Random(1234)
    for _ in range(300):
        p = random_proposal(rng, pk)
        assert deserialize(canonical_serialize(p)) == p


def test_deserialize_rejects_trailing_bytes(keypair):
    _, pk = keypair
    data = canonical_serialize(make_proposal(pk))
    with pytest.raises(ParseError):
        deserialize(data + b"\x00")


def test_deserialize_rejects_truncation(keypair):
    _, pk = keypair
    data = canonical_serialize(make_proposal(pk))
    with pytest.raises(ParseError):
        deserialize(data[:-3])


def test_computation_id_must_be_16_bytes():
    with pytest.raises(InvalidProposal):
        ComputationId(b"short")


def test_invariants_rejected(keypair):
    _, pk = keypair
    with pytest.raises(InvalidProposal) as e:
        canonical_serialize(make_proposal(pk, min_participants=0))
    assert e.value.field == "min_participants"
    with pytest.raises(InvalidProposal):
        make_proposal(pk, threat_model=ThreatModel(SHAMIR, t=4, n=3))
    with pytest.raises(InvalidProposal) as e:
        canonical_serialize(make_proposal(pk, quorum=(1, 2)))  # 3pc wants 3
    assert e.value.field == "quorum"
    with pytest.raises(InvalidProposal):
        canonical_serialize(make_proposal(pk, epsilon=float("nan")))


def test_schema_invariants():
    with pytest.raises(InvalidProposal):
        OutputSchema((SchemaField("a", "fixed64"), SchemaField("a", "count")))
    with pytest.raises(InvalidProposal):
        SchemaField("v", "fixed64_vector", length=0)
    with pytest.raises(InvalidProposal):
        SchemaField("h", "histogram", bin_edges=(0.0, 1.0, 1.0))
    with pytest.raises(InvalidProposal):
        SchemaField("x", "nope")


def test_threat_model_must_be_in_reduce_compatibility(keypair):
    from pmsr.proposal import ReduceFnSpec, SHAMIR as SH

    _, pk = keypair
    narrow = ReduceFnSpec.make("mean", compatibility={SH})
    p = make_proposal(pk, reduce_spec=narrow)  # threat model is 3pc
    with pytest.raises(InvalidProposal) as e:
        p.validate()
    assert e.value.field == "threat_model"


def test_tee_stub_parses_but_cannot_execute(keypair):
    _, pk = keypair
    p = make_proposal(pk, threat_model=ThreatModel(TEE_STUB), quorum=())
    q = deserialize(canonical_serialize(p))
    assert q.threat_model.kind == TEE_STUB
    with pytest.raises(NotImplementedError):
        q.threat_model.quorum_size()


# --- signatures ---


def test_sign_verify_roundtrip(keypair):
    sk, pk = keypair
    signed = sign_proposal(make_proposal(pk), sk)
    assert verify_proposal(signed)


def test_verify_with_other_key_fails(keypair, other_keypair):
    sk, _ = keypair
    _, other_pk = other_keypair
    # proposer field names a key that did not produce the signature
    signed = sign_proposal(make_proposal(other_pk), sk)
    assert not verify_proposal(signed)


def test_zeroed_signature_fails(keypair):
    sk, pk = keypair
    signed = sign_proposal(make_proposal(pk), sk)
    import dataclasses

    assert not verify_proposal(dataclasses.replace(signed, signature=bytes(64)))


def test_bitflip_fuzz(keypair):
    # flipping any single byte of the canonical form must break verification
    sk, pk = keypair
    p = make_proposal(pk)
    signed = sign_proposal(p, sk)
    data = canonical_serialize(p)
    from cryptography.exceptions import InvalidSignature
    from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

    pub = Ed25519PublicKey.from_public_bytes(pk)
    rng = Random(99)
    for _ in range(100):
        pos = rng.randrange(len(data))
        bit = 1 << rng.randrange(8)
        mutated = bytearray(data)
        mutated[pos] ^= bit
        with pytest.raises(InvalidSignature):
            pub.verify(signed.signature, bytes(mutated))


def test_unforgeability_fuzz_corpus(keypair):
    """10,000 mutated (proposal, signature) pairs; none may verify."""
    sk, pk = keypair
    rng = Random(5150)
    from cryptography.exceptions import InvalidSignature
    from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

    pub = Ed25519PublicKey.from_public_bytes(pk)
    base = random_proposal(rng, pk)
    signed = sign_proposal(base, sk)
    data = canonical_serialize(base)
    import dataclasses

    for i in range(10_000):
        kind = i % 3
        if kind == 0:  # flip a byte of the message
            mutated = bytearray(data)
            mutated[rng.randrange(len(data))] ^= 1 << rng.randrange(8)
            if bytes(mutated) == data:
                continue
            with pytest.raises(InvalidSignature):
                pub.verify(signed.signature, bytes(mutated))
        elif kind == 1:  # flip a byte of the signature
            sig = bytearray(signed.signature)
            sig[rng.randrange(64)] ^= 1 << rng.randrange(8)
            with pytest.raises(InvalidSignature):
                pub.verify(bytes(sig), data)
        else:  # structured field mutation
            mutant = dataclasses.replace(base, min_participants=base.min_participants + 1 + i)
            assert not verify_proposal(dataclasses.replace(signed, proposal=mutant))


def test_signed_file_roundtrip(keypair):
    sk, pk = keypair
    signed = sign_proposal(make_proposal(pk), sk)
    again = decode_signed(encode_signed(signed))
    assert again == signed and verify_proposal(again)


def test_deterministic_keygen():
    a = generate_keypair(bytes(32))
    b = generate_keypair(bytes(32))
    c = generate_keypair(bytes([7] * 32))
    assert a == b and a != c


# --- output validation ---


def _reference_validate(values: dict, schema: OutputSchema) -> bool:
    """Brute-force structural comparison used as the oracle."""
    names = [f.name for f in schema.fields]
    if set(values) != set(names):
        return False
    for f in schema.fields:
        v = values[f.name]
        if f.kind == "fixed64":
            if not isinstance(v, FixedPoint):
                return False
        elif f.kind == "count":
            if not (isinstance(v, int) and not isinstance(v, bool) and v >= 0):
                return False
        elif f.kind == "fixed64_vector":
            if not (
                isinstance(v, (list, tuple))
                and len(v) == f.length
                and all(isinstance(x, FixedPoint) for x in v)
            ):
                return False
        else:
            if not (
                isinstance(v, (list, tuple))
                and len(v) == len(f.bin_edges) - 1
                and all(isinstance(x, int) and not isinstance(x, bool) and x >= 0 for x in v)
            ):
                return False
    return True


def _valid_value_for(f: SchemaField, rng: Random):
    if f.kind == "fixed64":
        return encode_fixed(rng.uniform(-100, 100))
    if f.kind == "count":
        return rng.randint(0, 10_000)
    if f.kind == "fixed64_vector":
        return tuple(encode_fixed(rng.uniform(-5, 5)) for _ in range(f.length))
    return tuple(rng.randint(0, 50) for _ in range(len(f.bin_edges) - 1))


def test_validate_output_basic():
    schema = OutputSchema((SchemaField("mean", "fixed64"),))
    validate_output({"mean": encode_fixed(85.0)}, schema)  # ok

    vec_schema = OutputSchema((SchemaField("v", "fixed64_vector", length=6),))
    with pytest.raises(SchemaViolation) as e:
        validate_output({"v": tuple(encode_fixed(float(i)) for i in range(5))}, vec_schema)
    assert e.value.field == "v"

    with pytest.raises(SchemaViolation):
        validate_output({"mean": encode_fixed(1.0), "extra": 3}, schema)


def test_validate_output_matches_reference_oracle():
    rng = Random(777)
    for _ in range(400):
        schema = random_schema(rng)
        values = {f.name: _valid_value_for(f, rng) for f in schema.fields}
        mutation = rng.randrange(5)
        if mutation == 1 and values:
            values.pop(rng.choice(sorted(values)))
        elif mutation == 2:
            values["zz_extra"] = 1
        elif mutation == 3 and values:
            values[rng.choice(sorted(values))] = "wrong-type"
        elif mutation == 4 and values:
            name = rng.choice(sorted(values))
            v = values[name]
            if isinstance(v, tuple):
                values[name] = v + (v[-1] if v else 0,)
            else:
                values[name] = -1 if isinstance(v, int) else 0.5
        expected = _reference_validate(values, schema)
        if expected:
            validate_output(values, schema)
        else:
            with pytest.raises(SchemaViolation):
                validate_output(values, schema)


# --- authoring format ---

PROPOSAL_TEXT = """
# sample proposal
id 000102030405060708090a0b0c0d0e0f
deadline 50
min_participants 500
budget 12
quorum 1 2 3
map rolling_mean field=sleep_score window=365
output_schema
  sleep_avg fixed64
reduce mean
threat_model 3pc
epsilon 0.5
"""


def test_parse_proposal_text(keypair):
    _, pk = keypair
    p = parse_proposal_text(PROPOSAL_TEXT, proposer=pk)
    p.validate()
    assert p.min_participants == 500
    assert p.map_spec.name == "rolling_mean"
    assert p.map_spec.param("window") == 365
    assert p.epsilon == 0.5
    assert p.quorum == (1, 2, 3)


def test_parse_dump_roundtrip(keypair):
    # the field dump of the parsed file matches the dump after a binary trip
    _, pk = keypair
    p = parse_proposal_text(PROPOSAL_TEXT, proposer=pk)
    q = deserialize(canonical_serialize(p))
    assert dump_fields(p) == dump_fields(q)


def test_parse_errors(keypair):
    _, pk = keypair
    with pytest.raises(ParseError):
        parse_proposal_text("deadline 5\n", proposer=pk)  # missing everything else
    with pytest.raises(ParseError):
        parse_proposal_text(PROPOSAL_TEXT + "\nbogus_field 3\n", proposer=pk)
    with pytest.raises(ParseError):
        parse_proposal_text(PROPOSAL_TEXT.replace("3pc", "quantum"), proposer=pk)
