"""Computation proposals: domain types, canonical bytes, and signatures.

A proposal is the signed, broadcastable object that describes one distributed
computation: what each participant runs locally (map), what the coordinators
aggregate (reduce), the output schema, the participation threshold, the
deadline, and the declared threat model selecting the aggregation backend.

Canonical serialization is a bespoke fixed-order, fixed-width binary layout
(integers big-endian) so that two structurally equal proposals are
byte-identical and signatures are stable across implementations.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature as _BadSig
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import InvalidProposal, ParseError, SchemaViolation
from .fixedpoint import FixedPoint

MAGIC = b"PMSR"
VERSION = 1

# Threat model variants. The TEE stub parses but every runtime path refuses it.
SEMI_HONEST_3PC = "semi_honest_3pc"
SHAMIR = "shamir"
ADDITIVE_HE = "additive_he"
PLAINTEXT_DP = "plaintext_dp"
TEE_STUB = "tee_stub"

THREAT_KINDS = (SEMI_HONEST_3PC, SHAMIR, ADDITIVE_HE, PLAINTEXT_DP, TEE_STUB)
_THREAT_TAG = {k: i for i, k in enumerate(THREAT_KINDS)}

# Closed registries: the protocol vocabulary of executable functions.
MAP_FN_NAMES = (
    "mean_of",
    "count",
    "sum_of",
    "histogram_of",
    "rolling_mean",
    "logprob_vector",
)
REDUCE_FN_NAMES = (
    "sum",
    "mean",
    "histogram_merge",
    "gini",
    "top_decile_share",
    "gac_ensemble",
    "theo_max",
)
MAP_POST_NAMES = ("clamp",)
REDUCE_POST_NAMES = ("clamp_nonneg",)


@dataclass(frozen=True)
class ComputationId:
    """16-byte identifier, unique per proposal within a network run."""

    bytes: bytes

    def __post_init__(self):
        if len(self.bytes) != 16:
            raise InvalidProposal("id", "must be exactly 16 bytes")

    @classmethod
    def random(cls) -> "ComputationId":
        return cls(os.urandom(16))

    @classmethod
    def from_int(cls, n: int) -> "ComputationId":
        return cls(n.to_bytes(16, "big"))

    def hex(self) -> str:
        return self.bytes.hex()

    def __repr__(self):
        return f"ComputationId({self.bytes.hex()})"


@dataclass(frozen=True)
class ThreatModel:
    """Declared adversarial assumption; selects the aggregation backend."""

    kind: str
    t: int | None = None
    n: int | None = None

    def __post_init__(self):
        if self.kind not in THREAT_KINDS:
            raise InvalidProposal("threat_model", f"unknown kind {self.kind!r}")
        if self.kind == SHAMIR:
            if self.t is None or self.n is None or not 1 <= self.t <= self.n:
                raise InvalidProposal("threat_model", "shamir requires 1 <= t <= n")
        elif self.t is not None or self.n is not None:
            raise InvalidProposal("threat_model", f"{self.kind} takes no t/n")

    def quorum_size(self) -> int:
        """Number of coordinator nodes this backend needs."""
        if self.kind == SEMI_HONEST_3PC:
            return 3
        if self.kind == SHAMIR:
            return self.n  # type: ignore[return-value]
        if self.kind in (ADDITIVE_HE, PLAINTEXT_DP):
            return 1
        raise NotImplementedError("TEE backend is a stub and cannot execute")


ALL_THREAT_KINDS = frozenset(THREAT_KINDS)


@dataclass(frozen=True)
class SchemaField:
    """One named slot of the output schema.

    kind is one of fixed64, count, fixed64_vector (with length) or histogram
    (with strictly increasing bin edges).
    """

    name: str
    kind: str
    length: int | None = None
    bin_edges: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("fixed64", "count", "fixed64_vector", "histogram"):
            raise InvalidProposal(self.name, f"unknown field kind {self.kind!r}")
        if self.kind == "fixed64_vector":
            if self.length is None or self.length < 1:
                raise InvalidProposal(self.name, "vector length must be >= 1")
        elif self.kind == "histogram":
            edges = self.bin_edges
            if edges is None or len(edges) < 2:
                raise InvalidProposal(self.name, "histogram needs >= 2 bin edges")
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise InvalidProposal(self.name, "bin edges must strictly increase")
        elif self.length is not None or self.bin_edges is not None:
            raise InvalidProposal(self.name, f"{self.kind} takes no length/edges")

    def component_count(self) -> int:
        """Number of 8-byte values this field contributes to the wire frame."""
        if self.kind == "fixed64_vector":
            return self.length  # type: ignore[return-value]
        if self.kind == "histogram":
            return len(self.bin_edges) - 1  # type: ignore[arg-type]
        return 1


@dataclass(frozen=True)
class OutputSchema:
    fields: tuple[SchemaField, ...]

    def __post_init__(self):
        names = [f.name for f in self.fields]
        if len(names) != len(set(names)):
            raise InvalidProposal("output_schema", "duplicate field names")

    def component_count(self) -> int:
        return sum(f.component_count() for f in self.fields)


@dataclass(frozen=True)
class FnSpec:
    """A named registry function plus its parameters.

    Parameter values may be int, float, str, or a tuple of floats; they are
    serialized in sorted key order so equal specs are byte-equal.
    """

    name: str
    params: tuple[tuple[str, object], ...] = ()

    def param(self, key: str, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    @classmethod
    def make(cls, name: str, **params) -> "FnSpec":
        items = []
        for k in sorted(params):
            v = params[k]
            if isinstance(v, (list, tuple)):
                v = tuple(float(x) for x in v)
            items.append((k, v))
        return cls(name, tuple(items))


class MapFnSpec(FnSpec):
    pass


@dataclass(frozen=True)
class ReduceFnSpec:
    """Reduce registry function plus the threat models it supports in-shares."""

    name: str
    params: tuple[tuple[str, object], ...] = ()
    compatibility: frozenset[str] = field(default=ALL_THREAT_KINDS)

    def param(self, key: str, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    @classmethod
    def make(cls, name: str, compatibility=ALL_THREAT_KINDS, **params) -> "ReduceFnSpec":
        items = []
        for k in sorted(params):
            v = params[k]
            if isinstance(v, (list, tuple)):
                v = tuple(float(x) for x in v)
            items.append((k, v))
        return cls(name, tuple(items), frozenset(compatibility))


@dataclass(frozen=True)
class ComputationProposal:
    id: ComputationId
    deadline: int
    min_participants: int
    budget: int
    targets: frozenset[int]
    map_spec: MapFnSpec
    map_post: str | None
    output_schema: OutputSchema
    reduce_spec: ReduceFnSpec
    reduce_post: str | None
    threat_model: ThreatModel
    proposer: bytes
    epsilon: float | None = None
    quorum: tuple[int, ...] = ()

    def validate(self) -> None:
        """Raise InvalidProposal (naming the offending field) on any breach."""
        if self.min_participants < 1:
            raise InvalidProposal("min_participants", "must be >= 1")
        if self.deadline < 0:
            raise InvalidProposal("deadline", "must be non-negative")
        if self.budget < 0:
            raise InvalidProposal("budget", "must be non-negative")
        if self.map_spec.name not in MAP_FN_NAMES:
            raise InvalidProposal("map_spec", f"unregistered function {self.map_spec.name!r}")
        if self.reduce_spec.name not in REDUCE_FN_NAMES:
            raise InvalidProposal("reduce_spec", f"unregistered function {self.reduce_spec.name!r}")
        if self.map_post is not None and self.map_post not in MAP_POST_NAMES:
            raise InvalidProposal("map_post", f"unregistered post-processor {self.map_post!r}")
        if self.reduce_post is not None and self.reduce_post not in REDUCE_POST_NAMES:
            raise InvalidProposal("reduce_post", f"unregistered post-processor {self.reduce_post!r}")
        if self.threat_model.kind not in self.reduce_spec.compatibility:
            raise InvalidProposal(
                "threat_model",
                f"{self.threat_model.kind} not in reduce compatibility set",
            )
        if self.epsilon is not None and not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise InvalidProposal("epsilon", "must be a finite real >= 0")
        if self.reduce_spec.name == "gac_ensemble":
            weights = self.reduce_spec.param("weights")
            if not weights or any(w <= 0 for w in weights):
                raise InvalidProposal("reduce_spec", "gac_ensemble weights must be positive")
        if self.threat_model.kind != TEE_STUB:
            need = self.threat_model.quorum_size()
            if len(self.quorum) != need:
                raise InvalidProposal(
                    "quorum", f"{self.threat_model.kind} needs exactly {need} coordinators"
                )
        if len(set(self.quorum)) != len(self.quorum):
            raise InvalidProposal("quorum", "duplicate coordinator index")


@dataclass(frozen=True)
class SignedProposal:
    proposal: ComputationProposal
    signature: bytes


# --- canonical binary layout -------------------------------------------------

def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack(">H", len(raw)) + raw


def _pack_float(x: float) -> bytes:
    if not math.isfinite(x):
        raise InvalidProposal("float", "non-finite value in canonical form")
    return struct.pack(">d", x)


def _pack_params(params: tuple[tuple[str, object], ...]) -> bytes:
    out = [struct.pack(">H", len(params))]
    for key, value in sorted(params):
        out.append(_pack_str(key))
        if isinstance(value, bool):
            raise InvalidProposal(key, "bool params are not part of the wire form")
        if isinstance(value, int):
            out.append(b"\x01" + struct.pack(">q", value))
        elif isinstance(value, float):
            out.append(b"\x02" + _pack_float(value))
        elif isinstance(value, str):
            out.append(b"\x03" + _pack_str(value))
        elif isinstance(value, tuple):
            out.append(b"\x04" + struct.pack(">I", len(value)))
            out.extend(_pack_float(float(v)) for v in value)
        else:
            raise InvalidProposal(key, f"unserializable param type {type(value).__name__}")
    return b"".join(out)


def _pack_schema(schema: OutputSchema) -> bytes:
    out = [struct.pack(">H", len(schema.fields))]
    for f in schema.fields:
        out.append(_pack_str(f.name))
        if f.kind == "fixed64":
            out.append(b"\x00")
        elif f.kind == "count":
            out.append(b"\x01")
        elif f.kind == "fixed64_vector":
            out.append(b"\x02" + struct.pack(">I", f.length))
        else:
            out.append(b"\x03" + struct.pack(">I", len(f.bin_edges)))
            out.extend(_pack_float(e) for e in f.bin_edges)
    return b"".join(out)


def canonical_serialize(proposal: ComputationProposal) -> bytes:
    """Deterministic byte form; equal proposals serialize identically."""
    proposal.validate()
    out = [MAGIC, bytes([VERSION])]
    out.append(proposal.id.bytes)
    out.append(struct.pack(">Q", proposal.deadline))
    out.append(struct.pack(">Q", proposal.min_participants))
    out.append(struct.pack(">Q", proposal.budget))
    targets = sorted(proposal.targets)
    out.append(struct.pack(">I", len(targets)))
    out.extend(struct.pack(">I", t) for t in targets)
    out.append(_pack_str(proposal.map_spec.name))
    out.append(_pack_params(proposal.map_spec.params))
    out.append(b"\x01" + _pack_str(proposal.map_post) if proposal.map_post else b"\x00")
    out.append(_pack_schema(proposal.output_schema))
    out.append(_pack_str(proposal.reduce_spec.name))
    out.append(_pack_params(proposal.reduce_spec.params))
    compat = sorted(_THREAT_TAG[k] for k in proposal.reduce_spec.compatibility)
    out.append(struct.pack(">B", len(compat)) + bytes(compat))
    out.append(b"\x01" + _pack_str(proposal.reduce_post) if proposal.reduce_post else b"\x00")
    tm = proposal.threat_model
    out.append(bytes([_THREAT_TAG[tm.kind]]))
    if tm.kind == SHAMIR:
        out.append(struct.pack(">HH", tm.t, tm.n))
    out.append(_pack_str(proposal.proposer.hex()))
    if proposal.epsilon is None:
        out.append(b"\x00")
    else:
        out.append(b"\x01" + _pack_float(proposal.epsilon))
    out.append(struct.pack(">H", len(proposal.quorum)))
    out.extend(struct.pack(">I", q) for q in proposal.quorum)
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ParseError("truncated proposal bytes")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def i64(self) -> int:
        return struct.unpack(">q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack(">d", self.take(8))[0]

    def string(self) -> str:
        return self.take(self.u16()).decode("utf-8")

    def done(self) -> bool:
        return self.pos == len(self.data)


def _read_params(r: _Reader) -> tuple[tuple[str, object], ...]:
    count = r.u16()
    params = []
    for _ in range(count):
        key = r.string()
        tag = r.u8()
        if tag == 0x01:
            params.append((key, r.i64()))
        elif tag == 0x02:
            params.append((key, r.f64()))
        elif tag == 0x03:
            params.append((key, r.string()))
        elif tag == 0x04:
            n = r.u32()
            params.append((key, tuple(r.f64() for _ in range(n))))
        else:
            raise ParseError(f"unknown param tag {tag}")
    return tuple(params)


def _read_schema(r: _Reader) -> OutputSchema:
    count = r.u16()
    fields = []
    for _ in range(count):
        name = r.string()
        tag = r.u8()
        if tag == 0x00:
            fields.append(SchemaField(name, "fixed64"))
        elif tag == 0x01:
            fields.append(SchemaField(name, "count"))
        elif tag == 0x02:
            fields.append(SchemaField(name, "fixed64_vector", length=r.u32()))
        elif tag == 0x03:
            n = r.u32()
            edges = tuple(r.f64() for _ in range(n))
            fields.append(SchemaField(name, "histogram", bin_edges=edges))
        else:
            raise ParseError(f"unknown schema kind tag {tag}")
    return OutputSchema(tuple(fields))


def deserialize(data: bytes) -> ComputationProposal:
    """Inverse of canonical_serialize; rejects trailing or truncated bytes."""
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise ParseError("bad magic")
    if r.u8() != VERSION:
        raise ParseError("unsupported version")
    cid = ComputationId(r.take(16))
    deadline = r.u64()
    min_participants = r.u64()
    budget = r.u64()
    targets = frozenset(r.u32() for _ in range(r.u32()))
    map_name = r.string()
    map_params = _read_params(r)
    map_post = r.string() if r.u8() else None
    schema = _read_schema(r)
    reduce_name = r.string()
    reduce_params = _read_params(r)
    compat = frozenset(THREAT_KINDS[r.u8()] for _ in range(r.u8()))
    reduce_post = r.string() if r.u8() else None
    tag = r.u8()
    if tag >= len(THREAT_KINDS):
        raise ParseError(f"unknown threat model tag {tag}")
    kind = THREAT_KINDS[tag]
    if kind == SHAMIR:
        t, n = r.u16(), r.u16()
        tm = ThreatModel(kind, t=t, n=n)
    else:
        tm = ThreatModel(kind)
    proposer = bytes.fromhex(r.string())
    epsilon = r.f64() if r.u8() else None
    quorum = tuple(r.u32() for _ in range(r.u16()))
    if not r.done():
        raise ParseError("trailing bytes after proposal")
    return ComputationProposal(
        id=cid,
        deadline=deadline,
        min_participants=min_participants,
        budget=budget,
        targets=targets,
        map_spec=MapFnSpec(map_name, map_params),
        map_post=map_post,
        output_schema=schema,
        reduce_spec=ReduceFnSpec(reduce_name, reduce_params, compat),
        reduce_post=reduce_post,
        threat_model=tm,
        proposer=proposer,
        epsilon=epsilon,
        quorum=quorum,
    )


# --- signatures ---------------------------------------------------------------

def generate_keypair(seed: bytes | None = None) -> tuple[bytes, bytes]:
    """Return (secret, public) raw Ed25519 key bytes.

    A 32-byte seed makes the pair reproducible; otherwise keys are random.
    """
    if seed is None:
        sk = Ed25519PrivateKey.generate()
    else:
        if len(seed) != 32:
            raise ValueError("seed must be exactly 32 bytes")
        sk = Ed25519PrivateKey.from_private_bytes(seed)
    from cryptography.hazmat.primitives import serialization as ser

    sk_bytes = sk.private_bytes(
        ser.Encoding.Raw, ser.PrivateFormat.Raw, ser.NoEncryption()
    )
    pk_bytes = sk.public_key().public_bytes(ser.Encoding.Raw, ser.PublicFormat.Raw)
    return sk_bytes, pk_bytes


def public_key_of(secret_key: bytes) -> bytes:
    from cryptography.hazmat.primitives import serialization as ser

    sk = Ed25519PrivateKey.from_private_bytes(secret_key)
    return sk.public_key().public_bytes(ser.Encoding.Raw, ser.PublicFormat.Raw)


def sign_proposal(proposal: ComputationProposal, secret_key: bytes) -> SignedProposal:
    """Sign the canonical bytes; the proposer field must match the key."""
    message = canonical_serialize(proposal)
    sk = Ed25519PrivateKey.from_private_bytes(secret_key)
    return SignedProposal(proposal, sk.sign(message))


def verify_proposal(signed: SignedProposal) -> bool:
    """True iff the signature verifies under the embedded proposer key."""
    try:
        message = canonical_serialize(signed.proposal)
        pk = Ed25519PublicKey.from_public_bytes(signed.proposal.proposer)
        pk.verify(signed.signature, message)
        return True
    except (_BadSig, ValueError, InvalidProposal):
        return False


# Signed proposal file form: canonical bytes followed by the 64-byte signature.

def encode_signed(signed: SignedProposal) -> bytes:
    return canonical_serialize(signed.proposal) + signed.signature


def decode_signed(data: bytes) -> SignedProposal:
    if len(data) < 64:
        raise ParseError("too short for a signed proposal")
    return SignedProposal(deserialize(data[:-64]), data[-64:])


# --- output validation ---------------------------------------------------------

def validate_output(values, schema: OutputSchema) -> None:
    """Check a map output against the schema; raise SchemaViolation naming
    the first offending field.

    Accepts either a MapOutput-like object (with .values) or a plain mapping.
    """
    mapping = getattr(values, "values_by_name", None)
    if mapping is None:
        mapping = values
    for f in schema.fields:
        if f.name not in mapping:
            raise SchemaViolation(f.name, "missing field")
        v = mapping[f.name]
        if f.kind == "fixed64":
            if not isinstance(v, FixedPoint):
                raise SchemaViolation(f.name, "expected a fixed-point scalar")
        elif f.kind == "count":
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise SchemaViolation(f.name, "expected a non-negative integer")
        elif f.kind == "fixed64_vector":
            if not isinstance(v, (list, tuple)) or len(v) != f.length:
                raise SchemaViolation(f.name, f"expected a vector of length {f.length}")
            if not all(isinstance(x, FixedPoint) for x in v):
                raise SchemaViolation(f.name, "vector entries must be fixed-point")
        else:  # histogram
            expected = len(f.bin_edges) - 1
            if not isinstance(v, (list, tuple)) or len(v) != expected:
                raise SchemaViolation(f.name, f"expected {expected} bin counts")
            if not all(isinstance(x, int) and not isinstance(x, bool) and x >= 0 for x in v):
                raise SchemaViolation(f.name, "bin counts must be non-negative integers")
    declared = {f.name for f in schema.fields}
    for name in sorted(mapping):
        if name not in declared:
            raise SchemaViolation(name, "undeclared field")


# --- authoring format -----------------------------------------------------------
#
# Human-readable key/value file, one field per line; the output schema is a
# nested block of indented lines. Example:
#
#   id 000102030405060708090a0b0c0d0e0f
#   deadline 50
#   min_participants 500
#   budget 0
#   quorum 0 1 2
#   map rolling_mean field=score window=365
#   output_schema
#     score_avg fixed64
#   reduce mean
#   threat_model 3pc
#   epsilon 0.5

_THREAT_TOKENS = {
    "3pc": SEMI_HONEST_3PC,
    "semi_honest_3pc": SEMI_HONEST_3PC,
    "shamir": SHAMIR,
    "he": ADDITIVE_HE,
    "additive_he": ADDITIVE_HE,
    "plaintext_dp": PLAINTEXT_DP,
    "tee": TEE_STUB,
    "tee_stub": TEE_STUB,
}


def _parse_value(tok: str):
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        pass
    if "," in tok:
        try:
            return tuple(float(x) for x in tok.split(","))
        except ValueError:
            pass
    return tok


def _parse_kv(tokens: list[str], where: str) -> dict:
    params = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(f"{where}: expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        params[k] = _parse_value(v)
    return params


def parse_proposal_text(
    text: str,
    *,
    proposer: bytes | None = None,
    id_bytes: bytes | None = None,
) -> ComputationProposal:
    """Parse the authoring format into a proposal.

    proposer and id may be supplied by the caller (the signing command fills
    the proposer from the key file and generates an id when absent).
    """
    fields: dict[str, object] = {}
    schema_fields: list[SchemaField] = []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = lines[i]
        line = raw.split("#", 1)[0].rstrip()
        i += 1
        if not line.strip():
            continue
        indented = line[0] in " \t"
        tokens = line.split()
        key = tokens[0]
        if indented:
            raise ParseError(f"unexpected indented line: {line.strip()!r}")
        if key == "output_schema":
            while i < len(lines):
                nxt = lines[i].split("#", 1)[0].rstrip()
                if not nxt.strip():
                    i += 1
                    continue
                if nxt[0] not in " \t":
                    break
                toks = nxt.split()
                i += 1
                if len(toks) < 2:
                    raise ParseError(f"schema line needs name and kind: {nxt.strip()!r}")
                name, kind = toks[0], toks[1]
                if kind == "fixed64_vector":
                    if len(toks) != 3:
                        raise ParseError(f"{name}: fixed64_vector needs a length")
                    schema_fields.append(SchemaField(name, kind, length=int(toks[2])))
                elif kind == "histogram":
                    if len(toks) != 3:
                        raise ParseError(f"{name}: histogram needs comma-separated edges")
                    edges = tuple(float(x) for x in toks[2].split(","))
                    schema_fields.append(SchemaField(name, kind, bin_edges=edges))
                else:
                    schema_fields.append(SchemaField(name, kind))
            continue
        if key in fields:
            raise ParseError(f"duplicate field {key!r}")
        fields[key] = tokens[1:]

    def take(key, default=None):
        return fields.pop(key, default)

    def take_int(key, default=None):
        toks = take(key)
        if toks is None:
            if default is None:
                raise ParseError(f"missing required field {key!r}")
            return default
        if len(toks) != 1:
            raise ParseError(f"{key}: expected one value")
        try:
            return int(toks[0])
        except ValueError as e:
            raise ParseError(f"{key}: not an integer") from e

    id_toks = take("id")
    if id_toks:
        id_bytes = bytes.fromhex(id_toks[0])
    if id_bytes is None:
        raise ParseError("missing required field 'id'")

    deadline = take_int("deadline")
    min_participants = take_int("min_participants")
    budget = take_int("budget", 0)
    targets = frozenset(int(t) for t in take("targets", []))
    quorum = tuple(int(q) for q in take("quorum", []))

    map_toks = take("map")
    if not map_toks:
        raise ParseError("missing required field 'map'")
    map_spec = MapFnSpec.make(map_toks[0], **_parse_kv(map_toks[1:], "map"))

    reduce_toks = take("reduce")
    if not reduce_toks:
        raise ParseError("missing required field 'reduce'")
    reduce_spec = ReduceFnSpec.make(reduce_toks[0], **_parse_kv(reduce_toks[1:], "reduce"))

    map_post_toks = take("map_post")
    map_post = map_post_toks[0] if map_post_toks else None
    reduce_post_toks = take("reduce_post")
    reduce_post = reduce_post_toks[0] if reduce_post_toks else None

    tm_toks = take("threat_model")
    if not tm_toks:
        raise ParseError("missing required field 'threat_model'")
    token = tm_toks[0]
    if token not in _THREAT_TOKENS:
        raise ParseError(f"unknown threat model {token!r}")
    kind = _THREAT_TOKENS[token]
    if kind == SHAMIR:
        kv = _parse_kv(tm_toks[1:], "threat_model")
        tm = ThreatModel(kind, t=int(kv.get("t", 2)), n=int(kv.get("n", 3)))
    else:
        tm = ThreatModel(kind)

    proposer_toks = take("proposer")
    if proposer_toks:
        proposer = bytes.fromhex(proposer_toks[0])
    if proposer is None:
        proposer = b"\x00" * 32

    eps_toks = take("epsilon")
    epsilon = float(eps_toks[0]) if eps_toks else None

    if fields:
        raise ParseError(f"unknown field {sorted(fields)[0]!r}")
    if not schema_fields:
        raise ParseError("missing output_schema block")

    return ComputationProposal(
        id=ComputationId(id_bytes),
        deadline=deadline,
        min_participants=min_participants,
        budget=budget,
        targets=targets,
        map_spec=map_spec,
        map_post=map_post,
        output_schema=OutputSchema(tuple(schema_fields)),
        reduce_spec=reduce_spec,
        reduce_post=reduce_post,
        threat_model=tm,
        proposer=proposer,
        epsilon=epsilon,
        quorum=quorum,
    )


def dump_fields(p: ComputationProposal) -> str:
    """Deterministic flat field dump, used by the inspect command and tests."""
    out = [
        f"id {p.id.hex()}",
        f"deadline {p.deadline}",
        f"min_participants {p.min_participants}",
        f"budget {p.budget}",
        "targets " + " ".join(str(t) for t in sorted(p.targets)),
        "quorum " + " ".join(str(q) for q in p.quorum),
        "map " + p.map_spec.name
        + "".join(f" {k}={v}" for k, v in p.map_spec.params),
        f"map_post {p.map_post or '-'}",
    ]
    for f in p.output_schema.fields:
        if f.kind == "fixed64_vector":
            out.append(f"schema {f.name} {f.kind} {f.length}")
        elif f.kind == "histogram":
            edges = ",".join(repr(e) for e in f.bin_edges)
            out.append(f"schema {f.name} {f.kind} {edges}")
        else:
            out.append(f"schema {f.name} {f.kind}")
    out.append(
        "reduce " + p.reduce_spec.name
        + "".join(f" {k}={v}" for k, v in p.reduce_spec.params)
    )
    out.append(f"reduce_post {p.reduce_post or '-'}")
    tm = p.threat_model
    if tm.kind == SHAMIR:
        out.append(f"threat_model {tm.kind} t={tm.t} n={tm.n}")
    else:
        out.append(f"threat_model {tm.kind}")
    out.append(f"proposer {p.proposer.hex()}")
    out.append(f"epsilon {p.epsilon if p.epsilon is not None else '-'}")
    return "\n".join(out) + "\n"
