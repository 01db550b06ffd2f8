"""Simulated network: determinism, latency, drops, and gossip dissemination."""

import hashlib
import math
from random import Random

import pytest

from conftest import make_proposal
from pmsr.errors import InvalidProposal, InvalidSignature, UnknownAddress
from pmsr.proposal import sign_proposal
from pmsr.transport import (
    Abort,
    Network,
    NetworkConfig,
    NodeAddress,
    ProposalMsg,
    verify_proposal,
)


def _net(n=10, **kw) -> Network:
    defaults = dict(seed=42, latency_ticks=(1, 1), drop_rate=0.0, fanout=4, ttl=8)
    defaults.update(kw)
    return Network(NetworkConfig(**defaults), [NodeAddress(i) for i in range(n)])


def _signed(keypair, **kw):
    sk, pk = keypair
    return sign_proposal(make_proposal(pk, **kw), sk)


def drain(net, max_ticks=500):
    deliveries = []
    ticks = 0
    while net.pending():
        deliveries.extend(net.step())
        ticks += 1
        assert ticks < max_ticks
    return deliveries


def test_ttl_zero_enqueues_exactly_fanout(keypair):
    net = _net(n=10, fanout=3, ttl=0)
    net.broadcast_gossip(0, _signed(keypair))
    assert net.pending() == 3
    delivered = drain(net)
    assert len(delivered) == 3  # receivers do not re-forward at ttl 0
    assert net.pending() == 0


def test_gossip_full_reachability_bfs_oracle(keypair):
    # generous fanout so the epidemic covers everyone; check the delivery log
    # with a breadth-first consistency oracle
    net = _net(n=10, fanout=6, ttl=8)
    net.broadcast_gossip(0, _signed(keypair))
    deliveries = drain(net)
    cid = _signed(keypair).proposal.id.bytes

    first_seen = {0: 0}  # origin saw it at broadcast
    for d in deliveries:
        assert isinstance(d.payload, ProposalMsg)
        assert d.to not in first_seen, "node delivered the same id twice"
        assert d.frm in first_seen, "forwarder had not seen the proposal"
        assert first_seen[d.frm] < d.tick, "forwarded before receipt"
        first_seen[d.to] = d.tick
    assert set(first_seen) == set(range(10)), "gossip did not reach every node"
    for i in range(10):
        assert cid in net.seen[i]


def test_drop_rate_one_only_origin_sees(keypair):
    net = _net(n=10, drop_rate=1.0)
    signed = _signed(keypair)
    net.broadcast_gossip(0, signed)
    drain(net)
    cid = signed.proposal.id.bytes
    assert cid in net.seen[0]
    for i in range(1, 10):
        assert cid not in net.seen[i]


def test_broadcast_requires_valid_signature(keypair):
    import dataclasses

    net = _net()
    bad = dataclasses.replace(_signed(keypair), signature=bytes(64))
    assert not verify_proposal(bad)
    with pytest.raises(InvalidSignature):
        net.broadcast_gossip(0, bad)


def test_broadcast_requires_future_deadline(keypair):
    net = _net()
    for _ in range(5):
        net.step()
    with pytest.raises(InvalidProposal):
        net.broadcast_gossip(0, _signed(keypair, deadline=3))


def test_send_direct_unit_latency():
    net = _net(latency_ticks=(1, 1))
    net.send_direct(0, 1, Abort(bytes(16), "x"))
    out = net.step()
    assert len(out) == 1 and out[0].tick == 1 and out[0].to == 1


def test_send_direct_unknown_address():
    net = _net(n=3)
    with pytest.raises(UnknownAddress):
        net.send_direct(0, 99, Abort(bytes(16), "x"))


def test_same_seed_identical_schedule():
    def run():
        net = _net(latency_ticks=(1, 5), drop_rate=0.2, n=6)
        rng = Random(7)
        for k in range(200):
            net.send_direct(rng.randrange(6), rng.randrange(6), Abort(bytes(16), str(k)))
        drain(net)
        return [(d.tick, d.frm, d.to, d.payload.reason) for d in net.trace]

    assert run() == run()


def test_binomial_drop_bound():
    # 10,000 sends at drop 0.5: delivered count within 3 sigma of 5,000
    net = Network(
        NetworkConfig(seed=42, latency_ticks=(1, 1), drop_rate=0.5, fanout=1, ttl=0),
        [NodeAddress(0), NodeAddress(1)],
    )
    for k in range(10_000):
        net.send_direct(0, 1, Abort(bytes(16), str(k)))
    delivered = len(drain(net))
    sigma = math.sqrt(10_000 * 0.25)
    assert abs(delivered - 5_000) <= 3 * sigma


def test_step_empty_queue_advances_clock():
    net = _net()
    assert net.step() == []
    assert net.clock == 1


def test_same_tick_ordered_by_sequence():
    net = _net(latency_ticks=(2, 2))
    net.send_direct(0, 1, Abort(bytes(16), "first"))
    net.send_direct(0, 2, Abort(bytes(16), "second"))
    net.step()
    out = net.step()
    assert [d.payload.reason for d in out] == ["first", "second"]


def test_trace_hash_identical_across_runs(keypair):
    def trace_hash():
        net = _net(n=12, latency_ticks=(1, 4), fanout=3, ttl=6)
        net.broadcast_gossip(0, _signed(keypair))
        drain(net)
        return hashlib.sha256(net.trace_csv().encode()).hexdigest()

    assert trace_hash() == trace_hash()


def test_no_delivery_before_min_latency():
    rng = Random(31)
    for _ in range(20):
        lo = rng.randint(1, 4)
        hi = lo + rng.randint(0, 4)
        net = _net(n=5, latency_ticks=(lo, hi), seed=rng.randrange(2**32))
        for k in range(50):
            net.send_direct(rng.randrange(5), rng.randrange(5), Abort(bytes(16), str(k)))
        for d in drain(net):
            assert d.tick >= lo


def test_register_rejects_duplicates():
    net = _net(n=3)
    with pytest.raises(ValueError):
        net.register(NodeAddress(2))
