"""Node state machines for the three-step computation lifecycle.

Light nodes gate every proposal through their own policy, run the map
locally, protect the result (noise and/or secret sharing), and submit one
share to each coordinator. Heavy nodes accumulate shares until the deadline,
jointly count contributors as the intersection across the quorum, abort below
the participation threshold, and otherwise fold share-wise, exchange only
folded partials, and release a single aggregate.

Rejections are silent: a node that declines a computation sends nothing, so
its policy contents never leak.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from random import Random

from . import shares as sh
from .errors import (
    BudgetExhausted,
    EmptyDataset,
    InvalidEpsilon,
    MissingField,
    OutOfRange,
    ParseError,
    PhaseClosed,
    SchemaViolation,
    UnknownComputation,
)
from .fixedpoint import MODULUS
from .mapper import (
    LocalDataset,
    MapOutput,
    apply_laplace,
    build_map_output,
    clamp,
    decode_aggregate_raws,
    execute_map,
    map_sensitivity,
)
from .paillier import HECiphertext, HEKeyPair, HEPublicKey, he_decrypt, he_encrypt
from .policy import (
    BudgetLedger,
    PendingApproval,
    PrivacyPolicy,
    approve,
    charge,
    evaluate,
)
from .proposal import (
    ADDITIVE_HE,
    PLAINTEXT_DP,
    SEMI_HONEST_3PC,
    SHAMIR,
    TEE_STUB,
    ComputationProposal,
    SignedProposal,
    validate_output,
    verify_proposal,
)
from .reducers import finish_reduce
from .transport import Abort, AggregateRelease, Network, ReducePartial, ShareSubmit
from .wire import (
    PARTY_PLAINTEXT,
    decode_cipher_frame,
    decode_share_frame,
    encode_cipher_frame,
    encode_share_frame,
)

log = logging.getLogger(__name__)

PROPOSED = "proposed"
COLLECTING = "collecting"
REDUCING = "reducing"
RELEASED = "released"
ABORTED = "aborted"

_PHASE_ORDER = {PROPOSED: 0, COLLECTING: 1, REDUCING: 2, RELEASED: 3, ABORTED: 3}

ABORT_INSUFFICIENT = "InsufficientParticipants"
ABORT_QUORUM = "QuorumFailure"


@dataclass
class ComputationRecord:
    """Lifecycle of one computation; phases only ever move forward."""

    proposal: ComputationProposal
    phase: str = PROPOSED
    participants: int = 0
    start_tick: int = 0
    end_tick: int | None = None
    aggregate: dict | None = None
    abort_reason: str | None = None

    @property
    def id_hex(self) -> str:
        return self.proposal.id.hex()

    def terminal(self) -> bool:
        return self.phase in (RELEASED, ABORTED)

    def advance(self, phase: str) -> None:
        if self.terminal():
            raise PhaseClosed(f"{self.id_hex} already {self.phase}")
        if _PHASE_ORDER[phase] < _PHASE_ORDER[self.phase]:
            raise PhaseClosed(f"cannot move {self.phase} -> {phase}")
        self.phase = phase

    def release(self, aggregate: dict, tick: int) -> None:
        self.advance(RELEASED)
        self.aggregate = aggregate
        self.end_tick = tick

    def abort(self, reason: str, tick: int) -> None:
        self.advance(ABORTED)
        self.abort_reason = reason
        self.end_tick = tick

    def outcome_row(self) -> str:
        """computation_id, phase, participants, start_tick, end_tick, aggregate or reason."""
        if self.phase == RELEASED:
            tail = json.dumps(self.aggregate, sort_keys=True)
        elif self.phase == ABORTED:
            tail = self.abort_reason or ""
        else:
            tail = ""
        end = self.end_tick if self.end_tick is not None else ""
        return f"{self.id_hex},{self.phase},{self.participants},{self.start_tick},{end},{tail}"


@dataclass
class Submission:
    """Instrumentation: what one light node handed to the network and how it
    was protected. `raws` is the pre-noise, pre-share encoding."""

    raws: tuple[int, ...]
    shared: bool
    noised: bool


class LightNode:
    """Data-holding participant; responds at most once per computation."""

    def __init__(
        self,
        index: int,
        secret_key: bytes,
        public_key: bytes,
        policy: PrivacyPolicy,
        real_ds: LocalDataset,
        mock_ds: LocalDataset | None = None,
        mock_index: int | None = None,
        rng: Random | None = None,
        directory: dict[bytes, str] | None = None,
        approval_verdict: bool | None = None,
        he_public: HEPublicKey | None = None,
    ):
        self.index = index
        self.secret_key = secret_key
        self.public_key = public_key
        self.policy = policy
        budget = policy.budget_rule()
        self.ledger = BudgetLedger(budget.total_epsilon if budget else float("inf"))
        # the mock twin runs under relaxed constraints: identical pipeline,
        # separate unlimited budget
        self.mock_ledger = BudgetLedger(float("inf"))
        self.real_ds = real_ds
        self.mock_ds = mock_ds
        self.mock_index = mock_index
        self.rng = rng or Random(index)
        self.directory = directory or {}
        self.approval_verdict = approval_verdict
        self.he_public = he_public
        self.muted = False  # dropout injection: node fails to respond
        self.seen: set[bytes] = set()
        self.access_log: list[tuple[str, str]] = []
        self.submitted: dict[bytes, Submission] = {}
        self.charge_log: list[tuple[str, float]] = []

    def addresses(self) -> list[int]:
        out = [self.index]
        if self.mock_index is not None:
            out.append(self.mock_index)
        return out

    def on_proposal(self, signed: SignedProposal, net: Network, via_index: int) -> None:
        light_on_proposal(self, signed, net, via_index)


def light_on_proposal(
    node: LightNode, signed: SignedProposal, net: Network, via_index: int | None = None
) -> None:
    """Full private-map pipeline; every failure path is externally silent."""
    if via_index is None:
        via_index = node.index
    if not verify_proposal(signed):
        return
    proposal = signed.proposal
    cid = proposal.id.bytes
    if cid in node.seen:
        return
    node.seen.add(cid)
    if node.muted:
        return
    if proposal.threat_model.kind == TEE_STUB:
        log.debug("node %d: TEE backend not implemented", node.index)
        return

    use_mock = node.mock_index is not None and via_index == node.mock_index
    ds = node.mock_ds if use_mock else node.real_ds
    ledger = node.mock_ledger if use_mock else node.ledger
    if ds is None:
        return

    identity = node.directory.get(proposal.proposer)
    decision = evaluate(node.policy, proposal, ledger, proposer_identity=identity)
    if decision.kind == "needs_approval":
        if node.approval_verdict is None:
            return
        decision = approve(PendingApproval(decision), node.approval_verdict)
    if decision.kind != "accept":
        log.debug("node %d rejected %s: %s", node.index, proposal.id.hex(), decision.reason)
        return

    # a plaintext submission without noise would hand the coordinator the raw
    # value; refuse to take part
    if proposal.threat_model.kind == PLAINTEXT_DP and proposal.epsilon is None:
        return

    if proposal.epsilon is not None and proposal.epsilon > 0:
        try:
            charge(ledger, proposal.epsilon)
        except BudgetExhausted:
            return
        if not use_mock:
            node.charge_log.append((proposal.id.hex(), ledger.spent_epsilon))

    node.access_log.append((proposal.id.hex(), ds.provenance))
    try:
        raw_result = execute_map(ds, proposal.map_spec)
    except (MissingField, EmptyDataset, KeyError, ValueError):
        return
    map_result = raw_result  # pre-noise, pre-scaling: what must never leak

    noised = False
    if proposal.epsilon is not None and proposal.epsilon > 0:
        try:
            sensitivity = map_sensitivity(ds, proposal.map_spec)
        except InvalidEpsilon:
            return
        raw_result = _map_components(
            raw_result, lambda v: apply_laplace(v, sensitivity, proposal.epsilon, node.rng)
        )
        noised = True

    if proposal.map_post == "clamp":
        lo = proposal.map_spec.param("lo")
        hi = proposal.map_spec.param("hi")
        if lo is None or hi is None:
            return
        raw_result = _map_components(raw_result, lambda v: clamp(v, lo, hi))

    if proposal.reduce_spec.name == "gac_ensemble":
        # weighted averaging is linear, so each contributor scales its vector
        # by its public weight before sharing; weights align with the sorted
        # target list, so these proposals must be targeted
        weights = proposal.reduce_spec.param("weights")
        roster = sorted(proposal.targets)
        if node.index not in roster or weights is None or len(weights) < len(roster):
            return
        w = weights[roster.index(node.index)]
        raw_result = _map_components(raw_result, lambda v: w * v)

    try:
        output = build_map_output(cid, raw_result, proposal.output_schema)
        validate_output(output, proposal.output_schema)
        prenoise = tuple(
            build_map_output(cid, map_result, proposal.output_schema).to_raws(
                proposal.output_schema
            )
        )
    except (SchemaViolation, OutOfRange, KeyError, TypeError, ValueError):
        return

    frames = _protect(node, proposal, output)
    if frames is None:
        return
    shared = proposal.threat_model.kind != PLAINTEXT_DP
    node.submitted[cid] = Submission(prenoise, shared, noised)
    for heavy_index, body in frames:
        net.send_direct(
            node.index,
            heavy_index,
            ShareSubmit(cid, node.index, body, shared=shared, noised=noised),
        )


def _map_components(result, fn):
    if isinstance(result, dict):
        return {k: _map_components(v, fn) for k, v in result.items()}
    if isinstance(result, (list, tuple)):
        return [fn(float(v)) for v in result]
    return fn(float(result))


def _protect(node: LightNode, proposal: ComputationProposal, output: MapOutput):
    """Turn the encoded output into per-coordinator submission frames."""
    cid = proposal.id.bytes
    raws = output.to_raws(proposal.output_schema)
    tm = proposal.threat_model
    quorum = proposal.quorum
    if tm.kind == SEMI_HONEST_3PC:
        per_party: list[list[int]] = [[], [], []]
        for raw in raws:
            for s in sh.share_additive(raw, node.rng):
                per_party[s.party_index - 1].append(s.raw)
        return [
            (quorum[i], encode_share_frame(cid, i + 1, per_party[i])) for i in range(3)
        ]
    if tm.kind == SHAMIR:
        per_x: dict[int, list[int]] = {x: [] for x in range(1, tm.n + 1)}
        for raw in raws:
            elem = sh.ring_to_field(raw)
            for s in sh.share_shamir(elem, tm.t, tm.n, node.rng):
                per_x[s.x].append(s.y)
        return [
            (quorum[x - 1], encode_share_frame(cid, x, per_x[x])) for x in sorted(per_x)
        ]
    if tm.kind == ADDITIVE_HE:
        if node.he_public is None:
            return None
        cts = [he_encrypt(node.he_public, raw, node.rng).c for raw in raws]
        return [(quorum[0], encode_cipher_frame(cid, 1, cts))]
    if tm.kind == PLAINTEXT_DP:
        return [(quorum[0], encode_share_frame(cid, PARTY_PLAINTEXT, raws))]
    return None


# --- heavy nodes ---------------------------------------------------------------------

@dataclass
class _LeaderState:
    required: int
    expected: int
    grace_deadline: int
    partials: dict[int, tuple[int, ...]] = field(default_factory=dict)


class HeavyNode:
    """Aggregation coordinator; holds shares, never raw contributions."""

    def __init__(self, index: int, records: dict[bytes, ComputationRecord]):
        self.index = index
        self.records = records
        self.proposals: dict[bytes, SignedProposal] = {}
        self.inbox: dict[bytes, dict[int, tuple[int, ...]]] = {}
        # shares that raced ahead of their proposal, replayed on arrival
        self.early: dict[bytes, dict[int, ShareSubmit]] = {}
        self.closed: set[bytes] = set()
        self.leader_state: dict[bytes, _LeaderState] = {}
        self.he_keys: HEKeyPair | None = None
        self.released: dict[bytes, str] = {}

    def party_for(self, proposal: ComputationProposal) -> int | None:
        if self.index not in proposal.quorum:
            return None
        if proposal.threat_model.kind == PLAINTEXT_DP:
            return PARTY_PLAINTEXT
        return proposal.quorum.index(self.index) + 1

    def is_leader(self, proposal: ComputationProposal) -> bool:
        return bool(proposal.quorum) and proposal.quorum[0] == self.index

    def on_proposal(self, signed: SignedProposal, net: Network, via_index: int) -> None:
        if not verify_proposal(signed):
            return
        cid = signed.proposal.id.bytes
        if cid in self.proposals:
            return
        self.proposals[cid] = signed
        if self.index in signed.proposal.quorum:
            self.inbox.setdefault(cid, {})
            record = self.records.get(cid)
            if record is not None and self.is_leader(signed.proposal) and record.phase == PROPOSED:
                record.advance(COLLECTING)
        for submit in self.early.pop(cid, {}).values():
            try:
                heavy_on_share(self, submit)
            except (UnknownComputation, PhaseClosed):
                pass

    def buffer_early(self, submit: ShareSubmit) -> None:
        self.early.setdefault(submit.computation_id, {})[submit.contributor] = submit


def heavy_on_share(node: HeavyNode, submit: ShareSubmit) -> None:
    """Accumulate one contributor's share; duplicates replace (last write)."""
    cid = submit.computation_id
    signed = node.proposals.get(cid)
    if signed is None:
        raise UnknownComputation(cid.hex())
    if cid in node.closed:
        raise PhaseClosed(cid.hex())
    proposal = signed.proposal
    expected_party = node.party_for(proposal)
    if expected_party is None:
        return
    try:
        if proposal.threat_model.kind == ADDITIVE_HE:
            frame_cid, party, values = decode_cipher_frame(submit.body)
        else:
            frame_cid, party, values = decode_share_frame(submit.body)
    except ParseError:
        return
    if frame_cid != cid or party != expected_party:
        return
    if len(values) != proposal.output_schema.component_count():
        return
    node.inbox.setdefault(cid, {})[submit.contributor] = values


def _fold(values_list, proposal: ComputationProposal, he_modulus_sq: int | None):
    kind = proposal.threat_model.kind
    width = proposal.output_schema.component_count()
    if kind == SHAMIR:
        acc = [0] * width
        for values in values_list:
            for i, v in enumerate(values):
                acc[i] = (acc[i] + v) % sh.MERSENNE_61
        return tuple(acc)
    if kind == ADDITIVE_HE:
        acc = [1] * width
        for values in values_list:
            for i, v in enumerate(values):
                acc[i] = acc[i] * v % he_modulus_sq
        return tuple(acc)
    acc = [0] * width
    for values in values_list:
        for i, v in enumerate(values):
            acc[i] = (acc[i] + v) % MODULUS
    return tuple(acc)


def heavy_on_deadline(
    quorum_nodes: list[HeavyNode | None],
    record: ComputationRecord,
    net: Network,
    clock: int,
    grace_ticks: int = 16,
) -> str | None:
    """Deadline step for one computation, run jointly across the quorum.

    Counts contributors as the intersection of the quorum's contributor sets,
    aborts below the threshold (discarding all held shares), and otherwise
    folds locally per member and puts the folded partials on the wire to the
    quorum leader. Returns the abort reason when the computation aborts here,
    otherwise None (the leader releases once partials arrive).
    """
    proposal = record.proposal
    if record.phase not in (PROPOSED, COLLECTING):
        return None
    if proposal.threat_model.kind == TEE_STUB:
        raise NotImplementedError("TEE backend is a stub")
    cid = proposal.id.bytes

    if any(n is None for n in quorum_nodes):
        for n in quorum_nodes:
            if n is not None:
                n.closed.add(cid)
                n.inbox.pop(cid, None)
        record.abort(ABORT_QUORUM, clock)
        _notify_abort(net, proposal, record)
        return ABORT_QUORUM

    for n in quorum_nodes:
        n.closed.add(cid)

    contributor_sets = [set(n.inbox.get(cid, {})) for n in quorum_nodes]
    contributors = sorted(set.intersection(*contributor_sets))
    record.participants = len(contributors)

    if len(contributors) < proposal.min_participants:
        for n in quorum_nodes:
            n.inbox.pop(cid, None)
        record.abort(ABORT_INSUFFICIENT, clock)
        _notify_abort(net, proposal, record)
        return ABORT_INSUFFICIENT

    record.advance(REDUCING)
    leader = quorum_nodes[0]
    tm = proposal.threat_model
    required = tm.t if tm.kind == SHAMIR else len(quorum_nodes)
    state = _LeaderState(
        required=required, expected=len(quorum_nodes), grace_deadline=clock + grace_ticks
    )
    leader.leader_state[cid] = state

    he_nsq = leader.he_keys.public.n_sq if tm.kind == ADDITIVE_HE else None
    for n in quorum_nodes:
        folded = _fold(
            [n.inbox[cid][c] for c in contributors], proposal, he_nsq
        )
        party = n.party_for(proposal)
        if n is leader:
            state.partials[party] = folded
        else:
            net.send_direct(n.index, leader.index, ReducePartial(cid, party, folded))
        n.inbox.pop(cid, None)  # fold retained, per-contributor shares dropped

    _maybe_finalize(leader, record, net, clock)
    return None


def run_plaintext_dp_path(
    heavy: HeavyNode, record: ComputationRecord, net: Network, clock: int
) -> str | None:
    """Single-coordinator path: contributions arrive already noised, so the
    one heavy node sums them directly under the same threshold rule."""
    assert record.proposal.threat_model.kind == PLAINTEXT_DP
    return heavy_on_deadline([heavy], record, net, clock)


def heavy_on_partial(node: HeavyNode, partial: ReducePartial, net: Network, clock: int) -> None:
    cid = partial.computation_id
    state = node.leader_state.get(cid)
    if state is None:
        return
    state.partials[partial.party] = partial.values
    record = node.records.get(cid)
    if record is not None:
        _maybe_finalize(node, record, net, clock)


def heavy_on_tick(node: HeavyNode, net: Network, clock: int) -> None:
    """Leader timeout sweep: a quorum member whose partial never arrives
    aborts the computation once the grace window closes."""
    for cid in sorted(node.leader_state):
        record = node.records.get(cid)
        if record is None or record.terminal():
            node.leader_state.pop(cid, None)
            continue
        state = node.leader_state[cid]
        if len(state.partials) >= state.expected:
            continue  # finalized on arrival
        if clock >= state.grace_deadline:
            if len(state.partials) >= state.required:
                _finalize(node, record, net, clock)
            else:
                node.leader_state.pop(cid, None)
                record.abort(ABORT_QUORUM, clock)
                _notify_abort(net, record.proposal, record)


def _maybe_finalize(leader: HeavyNode, record: ComputationRecord, net: Network, clock: int) -> None:
    state = leader.leader_state.get(record.proposal.id.bytes)
    if state is None or record.terminal():
        return
    if len(state.partials) >= state.expected:
        _finalize(leader, record, net, clock)


def _finalize(leader: HeavyNode, record: ComputationRecord, net: Network, clock: int) -> None:
    proposal = record.proposal
    cid = proposal.id.bytes
    state = leader.leader_state.pop(cid)
    tm = proposal.threat_model
    width = proposal.output_schema.component_count()

    if tm.kind == SHAMIR:
        points = sorted(state.partials.items())[: state.required]
        raws = []
        for i in range(width):
            elem = sh.reconstruct_shamir(
                [sh.ShamirShare(x, ys[i]) for x, ys in points], tm.t
            )
            raws.append(sh.field_to_ring(elem))
    elif tm.kind == ADDITIVE_HE:
        (folded,) = state.partials.values()
        raws = [
            he_decrypt(leader.he_keys, HECiphertext(c)) % MODULUS for c in folded
        ]
    else:  # additive 3pc or plaintext
        raws = [0] * width
        for values in state.partials.values():
            for i, v in enumerate(values):
                raws[i] = (raws[i] + v) % MODULUS

    decoded = decode_aggregate_raws(raws, proposal.output_schema)
    aggregate = finish_reduce(
        proposal.reduce_spec.name,
        decoded,
        record.participants,
        proposal.reduce_spec.params,
        proposal.reduce_post,
    )
    record.release(aggregate, clock)
    leader.released[cid] = RELEASED
    net.send_direct(leader.index, _proposer_index(proposal, net), AggregateRelease(cid, aggregate))


def _notify_abort(net: Network, proposal: ComputationProposal, record: ComputationRecord) -> None:
    to = _proposer_index(proposal, net)
    frm = proposal.quorum[0] if proposal.quorum else to
    net.send_direct(frm, to, Abort(proposal.id.bytes, record.abort_reason or "aborted"))


def _proposer_index(proposal: ComputationProposal, net: Network) -> int:
    for idx, addr in net.addresses.items():
        if addr.pubkey == proposal.proposer:
            return idx
    # fall back to the quorum leader so the abort/release still lands somewhere
    return proposal.quorum[0]


class ProposerNode:
    """Originating node: keeps the outcomes it hears back."""

    def __init__(self, index: int, secret_key: bytes, public_key: bytes):
        self.index = index
        self.secret_key = secret_key
        self.public_key = public_key
        self.releases: dict[bytes, dict] = {}
        self.aborts: dict[bytes, str] = {}

    def on_deliver(self, payload) -> None:
        if isinstance(payload, AggregateRelease):
            self.releases[payload.computation_id] = payload.aggregate
        elif isinstance(payload, Abort):
            self.aborts[payload.computation_id] = payload.reason
