"""Shared helpers: deterministic keys and randomized-but-valid proposals."""

from __future__ import annotations

from random import Random

import pytest

from pmsr.proposal import (
    ADDITIVE_HE,
    PLAINTEXT_DP,
    SEMI_HONEST_3PC,
    SHAMIR,
    ComputationId,
    ComputationProposal,
    MapFnSpec,
    OutputSchema,
    ReduceFnSpec,
    SchemaField,
    ThreatModel,
    generate_keypair,
)


@pytest.fixture(scope="session")
def keypair():
    return generate_keypair(bytes(range(32)))


@pytest.fixture(scope="session")
def other_keypair():
    return generate_keypair(bytes(range(1, 33)))


def make_proposal(
    proposer: bytes,
    *,
    cid: int = 1,
    deadline: int = 100,
    min_participants: int = 5,
    budget: int = 0,
    targets=frozenset(),
    map_spec=None,
    schema=None,
    reduce_spec=None,
    threat_model=None,
    epsilon=None,
    quorum=None,
    map_post=None,
    reduce_post=None,
) -> ComputationProposal:
    threat_model = threat_model or ThreatModel(SEMI_HONEST_3PC)
    if quorum is None:
        quorum = tuple(range(1, 1 + threat_model.quorum_size()))
    return ComputationProposal(
        id=ComputationId.from_int(cid),
        deadline=deadline,
        min_participants=min_participants,
        budget=budget,
        targets=frozenset(targets),
        map_spec=map_spec or MapFnSpec.make("mean_of", field="score"),
        map_post=map_post,
        output_schema=schema or OutputSchema((SchemaField("score_mean", "fixed64"),)),
        reduce_spec=reduce_spec or ReduceFnSpec.make("mean"),
        reduce_post=reduce_post,
        threat_model=threat_model,
        proposer=proposer,
        epsilon=epsilon,
        quorum=tuple(quorum),
    )


def random_schema(rng: Random) -> OutputSchema:
    fields = []
    for i in range(rng.randint(1, 4)):
        kind = rng.choice(("fixed64", "count", "fixed64_vector", "histogram"))
        name = f"f{i}"
        if kind == "fixed64_vector":
            fields.append(SchemaField(name, kind, length=rng.randint(1, 8)))
        elif kind == "histogram":
            start = rng.uniform(-10, 10)
            edges = [start]
            for _ in range(rng.randint(1, 6)):
                edges.append(edges[-1] + rng.uniform(0.1, 5.0))
            fields.append(SchemaField(name, kind, bin_edges=tuple(edges)))
        else:
            fields.append(SchemaField(name, kind))
    return OutputSchema(tuple(fields))


def random_proposal(rng: Random, proposer: bytes) -> ComputationProposal:
    tm_kind = rng.choice((SEMI_HONEST_3PC, SHAMIR, ADDITIVE_HE, PLAINTEXT_DP))
    if tm_kind == SHAMIR:
        n = rng.randint(2, 6)
        tm = ThreatModel(SHAMIR, t=rng.randint(1, n), n=n)
    else:
        tm = ThreatModel(tm_kind)
    map_name, map_params = rng.choice(
        (
            ("mean_of", {"field": "score"}),
            ("count", {}),
            ("sum_of", {"field": "x", "lo": 0.0, "hi": 50.0}),
            ("rolling_mean", {"field": "score", "window": rng.randint(1, 400)}),
            ("histogram_of", {"field": "v", "bin_edges": (0.0, 1.0, 2.5)}),
            ("logprob_vector", {"item": rng.randint(0, 1000)}),
        )
    )
    reduce_name = rng.choice(("sum", "mean", "histogram_merge", "gini", "top_decile_share"))
    return make_proposal(
        proposer,
        cid=rng.getrandbits(128),
        deadline=rng.randint(1, 10_000),
        min_participants=rng.randint(1, 1000),
        budget=rng.randint(0, 10_000),
        targets=frozenset(rng.sample(range(100), rng.randint(0, 5))),
        map_spec=MapFnSpec.make(map_name, **map_params),
        schema=random_schema(rng),
        reduce_spec=ReduceFnSpec.make(reduce_name),
        threat_model=tm,
        epsilon=rng.choice((None, round(rng.uniform(0.01, 4.0), 6))),
        quorum=tuple(range(1, 1 + tm.quorum_size())),
        map_post=rng.choice((None, "clamp")),
        reduce_post=rng.choice((None, "clamp_nonneg")),
    )
