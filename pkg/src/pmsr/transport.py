"""Deterministic simulated network: envelopes, latency, drops, and gossip.

Virtual time is an integer tick counter owned by a single driver. Every
enqueue draws latency and drop decisions from one seeded generator, so a
fixed (seed, config, call sequence) replays to a byte-identical delivery
trace. Proposal payloads gossip epidemically: each first-time receiver
re-forwards to `fanout` random peers while the hop budget (ttl) lasts, and a
per-node seen set suppresses duplicates.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from random import Random

from .errors import InvalidProposal, InvalidSignature, UnknownAddress
from .proposal import SignedProposal, verify_proposal


@dataclass(frozen=True)
class NodeAddress:
    index: int
    pubkey: bytes = b""


@dataclass(frozen=True)
class NetworkConfig:
    seed: int
    latency_ticks: tuple[int, int] = (1, 1)
    drop_rate: float = 0.0
    fanout: int = 4
    ttl: int = 8

    def __post_init__(self):
        lo, hi = self.latency_ticks
        if not 0 <= lo <= hi:
            raise ValueError("latency bounds must satisfy 0 <= min <= max")
        if not 0.0 <= self.drop_rate <= 1.0:
            raise ValueError("drop_rate must be in [0, 1]")
        if self.fanout < 1:
            raise ValueError("fanout must be >= 1")
        if self.ttl < 0:
            raise ValueError("ttl must be >= 0")


# --- payloads -----------------------------------------------------------------------

@dataclass(frozen=True)
class ProposalMsg:
    signed: SignedProposal
    ttl: int

    def __post_init__(self):
        if self.ttl < 0:
            raise ValueError("ttl must be >= 0")

    kind = "proposal"

    @property
    def computation_id(self) -> bytes:
        return self.signed.proposal.id.bytes


@dataclass(frozen=True)
class ShareSubmit:
    computation_id: bytes
    contributor: int
    body: bytes
    # instrumentation, not wire content: how the submission was protected
    shared: bool = True
    noised: bool = False

    kind = "share_submit"


@dataclass(frozen=True)
class ReducePartial:
    computation_id: bytes
    party: int
    values: tuple[int, ...]

    kind = "reduce_partial"


@dataclass(frozen=True)
class AggregateRelease:
    computation_id: bytes
    aggregate: dict

    kind = "aggregate_release"


@dataclass(frozen=True)
class Abort:
    computation_id: bytes
    reason: str

    kind = "abort"


@dataclass(frozen=True)
class Envelope:
    frm: int
    to: int
    payload: object
    send_tick: int
    delivery_tick: int
    seq: int


@dataclass(frozen=True)
class Delivery:
    tick: int
    frm: int
    to: int
    payload: object


class Network:
    """Single-owner message queue over a fixed membership list."""

    def __init__(self, cfg: NetworkConfig, addresses: list[NodeAddress]):
        self.cfg = cfg
        self.clock = 0
        self.rng = Random(cfg.seed)
        self.addresses: dict[int, NodeAddress] = {}
        for a in addresses:
            if a.index in self.addresses:
                raise ValueError(f"duplicate address index {a.index}")
            self.addresses[a.index] = a
        self._members = sorted(self.addresses)
        self._queue: list[tuple[int, int, Envelope]] = []
        self._seq = 0
        self.seen: dict[int, set[bytes]] = {i: set() for i in self._members}
        self.trace: list[Delivery] = []
        self.dropped = 0

    def register(self, address: NodeAddress) -> None:
        """Add a member; only valid before traffic involving it is enqueued."""
        if address.index in self.addresses:
            raise ValueError(f"duplicate address index {address.index}")
        self.addresses[address.index] = address
        self._members.append(address.index)
        self._members.sort()
        self.seen[address.index] = set()

    # -- enqueue paths --

    def _enqueue(self, frm: int, to: int, payload) -> None:
        if to not in self.addresses:
            raise UnknownAddress(f"no node at index {to}")
        if frm not in self.addresses:
            raise UnknownAddress(f"no node at index {frm}")
        if self.cfg.drop_rate > 0 and self.rng.random() < self.cfg.drop_rate:
            self.dropped += 1
            return
        lo, hi = self.cfg.latency_ticks
        latency = lo if lo == hi else self.rng.randint(lo, hi)
        delivery = self.clock + max(1, latency)  # delivery is never same-tick
        env = Envelope(frm, to, payload, self.clock, delivery, self._seq)
        self._seq += 1
        heapq.heappush(self._queue, (delivery, env.seq, env))

    def send_direct(self, frm: NodeAddress | int, to: NodeAddress | int, payload) -> None:
        frm_i = frm.index if isinstance(frm, NodeAddress) else frm
        to_i = to.index if isinstance(to, NodeAddress) else to
        self._enqueue(frm_i, to_i, payload)

    def broadcast_gossip(self, origin: NodeAddress | int, signed: SignedProposal) -> None:
        """Start epidemic dissemination of a signed proposal from `origin`."""
        if not verify_proposal(signed):
            raise InvalidSignature("refusing to gossip an unverifiable proposal")
        if signed.proposal.deadline <= self.clock:
            raise InvalidProposal("deadline", "must be in the future at broadcast time")
        origin_i = origin.index if isinstance(origin, NodeAddress) else origin
        if origin_i not in self.addresses:
            raise UnknownAddress(f"no node at index {origin_i}")
        self.seen[origin_i].add(signed.proposal.id.bytes)
        self._forward(origin_i, ProposalMsg(signed, self.cfg.ttl))

    def _forward(self, frm: int, msg: ProposalMsg) -> None:
        peers = [i for i in self._members if i != frm]
        if not peers:
            return
        k = min(self.cfg.fanout, len(peers))
        for peer in self.rng.sample(peers, k):
            self._enqueue(frm, peer, msg)

    # -- clock --

    def step(self) -> list[Delivery]:
        """Advance one tick and deliver everything due, in (tick, seq) order."""
        self.clock += 1
        out: list[Delivery] = []
        while self._queue and self._queue[0][0] <= self.clock:
            _, _, env = heapq.heappop(self._queue)
            payload = env.payload
            if isinstance(payload, ProposalMsg):
                cid = payload.computation_id
                if cid in self.seen[env.to]:
                    continue  # duplicate: suppressed, not re-forwarded
                self.seen[env.to].add(cid)
                if payload.ttl > 0:
                    self._forward(env.to, ProposalMsg(payload.signed, payload.ttl - 1))
            d = Delivery(self.clock, env.frm, env.to, payload)
            self.trace.append(d)
            out.append(d)
        return out

    def pending(self) -> int:
        return len(self._queue)

    def run_until_quiet(self, on_delivery=None, max_ticks: int = 100000) -> None:
        start = self.clock
        while self._queue:
            if self.clock - start > max_ticks:
                raise RuntimeError("network did not quiesce within the tick budget")
            for d in self.step():
                if on_delivery is not None:
                    on_delivery(d)

    # -- trace export --

    def trace_rows(self) -> list[str]:
        rows = []
        for d in self.trace:
            cid = getattr(d.payload, "computation_id", b"")
            rows.append(f"{d.tick},{d.frm},{d.to},{d.payload.kind},{cid.hex()}")
        return rows

    def trace_csv(self) -> str:
        header = "tick,from,to,payload_kind,computation_id"
        return "\n".join([header] + self.trace_rows()) + "\n"
