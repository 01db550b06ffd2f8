"""Declarative privacy policies gating a node's participation.

Each node evaluates every verified proposal against its own ordered rule
list before doing any work. Rules either pass or fail; the first failure
rejects with that rule's name, a manual-approval rule turns an otherwise
clean pass into a pending decision, and a privacy-budget rule checks the
requested epsilon against the node's ledger.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import BudgetExhausted, InvalidEpsilon, NotPending, ParseError
from .proposal import (
    ADDITIVE_HE,
    PLAINTEXT_DP,
    SEMI_HONEST_3PC,
    SHAMIR,
    TEE_STUB,
    ComputationProposal,
)

ACCEPT = "accept"
REJECT = "reject"
NEEDS_APPROVAL = "needs_approval"


@dataclass(frozen=True)
class Decision:
    kind: str
    reason: str | None = None  # first failing rule's name on reject

    @classmethod
    def accept(cls):
        return cls(ACCEPT)

    @classmethod
    def reject(cls, reason: str):
        return cls(REJECT, reason)

    @classmethod
    def needs_approval(cls):
        return cls(NEEDS_APPROVAL)


# --- rules ------------------------------------------------------------------------

@dataclass(frozen=True)
class RequireMinParticipants:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def check(self, proposal, ctx) -> bool:
        return proposal.min_participants >= self.k


@dataclass(frozen=True)
class RequireThreatModel:
    kinds: frozenset[str]

    def check(self, proposal, ctx) -> bool:
        return proposal.threat_model.kind in self.kinds


@dataclass(frozen=True)
class RequireProposerSuffix:
    suffix: str

    def check(self, proposal, ctx) -> bool:
        identity = ctx.proposer_identity
        return identity is not None and identity.endswith(self.suffix)


@dataclass(frozen=True)
class AllowFunctions:
    names: frozenset[str]

    def check(self, proposal, ctx) -> bool:
        return proposal.map_spec.name in self.names and proposal.reduce_spec.name in self.names


@dataclass(frozen=True)
class BlockOutputFields:
    names: frozenset[str]

    def check(self, proposal, ctx) -> bool:
        return not any(f.name in self.names for f in proposal.output_schema.fields)


@dataclass(frozen=True)
class RequireManualApproval:
    def check(self, proposal, ctx) -> bool:
        return True  # handled by evaluate(): pass turns into NeedsApproval


@dataclass(frozen=True)
class DPBudget:
    total_epsilon: float

    def __post_init__(self):
        if not self.total_epsilon > 0:
            raise ValueError("total_epsilon must be positive")

    def check(self, proposal, ctx) -> bool:
        if proposal.epsilon is None:
            return False
        ledger = ctx.ledger
        return ledger is not None and ledger.spent_epsilon + proposal.epsilon <= ledger.total_epsilon


RULE_TYPES = (
    RequireMinParticipants,
    RequireThreatModel,
    RequireProposerSuffix,
    AllowFunctions,
    BlockOutputFields,
    RequireManualApproval,
    DPBudget,
)


@dataclass(frozen=True)
class PrivacyPolicy:
    rules: tuple = ()

    def __post_init__(self):
        if sum(1 for r in self.rules if isinstance(r, DPBudget)) > 1:
            raise ValueError("at most one DPBudget rule per policy")

    def budget_rule(self) -> DPBudget | None:
        for r in self.rules:
            if isinstance(r, DPBudget):
                return r
        return None


@dataclass
class BudgetLedger:
    """Monotone epsilon accountant: spent never decreases, never exceeds total."""

    total_epsilon: float
    spent_epsilon: float = 0.0

    def remaining(self) -> float:
        return self.total_epsilon - self.spent_epsilon


def charge(ledger: BudgetLedger, epsilon: float) -> None:
    """Spend epsilon from the ledger; on BudgetExhausted the ledger is unchanged."""
    if not epsilon > 0:
        raise InvalidEpsilon(f"charge must be positive, got {epsilon}")
    if ledger.spent_epsilon + epsilon > ledger.total_epsilon:
        raise BudgetExhausted(
            f"spent {ledger.spent_epsilon} + {epsilon} exceeds {ledger.total_epsilon}"
        )
    ledger.spent_epsilon += epsilon


@dataclass
class _EvalContext:
    ledger: BudgetLedger | None
    proposer_identity: str | None


def evaluate(
    policy: PrivacyPolicy,
    proposal: ComputationProposal,
    ledger: BudgetLedger | None = None,
    proposer_identity: str | None = None,
) -> Decision:
    """Evaluate rules in order; first failure rejects with that rule's name.

    A passing rule set containing RequireManualApproval yields NeedsApproval
    instead of Accept. Pure in (policy, proposal, ledger snapshot, identity).
    """
    ctx = _EvalContext(ledger, proposer_identity)
    manual = False
    for rule in policy.rules:
        if isinstance(rule, RequireManualApproval):
            manual = True
            continue
        if not rule.check(proposal, ctx):
            return Decision.reject(type(rule).__name__)
    if manual:
        return Decision.needs_approval()
    return Decision.accept()


@dataclass
class PendingApproval:
    """One outstanding manual-review slot; resolves exactly once."""

    decision: Decision
    resolved: bool = field(default=False)

    def __post_init__(self):
        if self.decision.kind != NEEDS_APPROVAL:
            raise NotPending("prior decision was not NeedsApproval")


def approve(pending: PendingApproval, verdict: bool) -> Decision:
    if pending.resolved:
        raise NotPending("approval already resolved")
    pending.resolved = True
    return Decision.accept() if verdict else Decision.reject("ManualDenial")


# --- policy file format -------------------------------------------------------------
#
# One rule per line, e.g.:
#
#   require_min_participants 100
#   require_threat_model shamir,additive_he
#   require_proposer_suffix @trusted-domain.org
#   allow_functions mean,count,gini
#   block_output_fields email,name
#   manual_approval
#   dp_budget 2.0

_THREAT_ALIASES = {
    "3pc": SEMI_HONEST_3PC,
    "semi_honest_3pc": SEMI_HONEST_3PC,
    "shamir": SHAMIR,
    "he": ADDITIVE_HE,
    "additive_he": ADDITIVE_HE,
    "plaintext_dp": PLAINTEXT_DP,
    "tee": TEE_STUB,
    "tee_stub": TEE_STUB,
}


def parse_policy_text(text: str) -> PrivacyPolicy:
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        name, args = tokens[0], tokens[1:]
        try:
            if name == "require_min_participants":
                rules.append(RequireMinParticipants(int(args[0])))
            elif name == "require_threat_model":
                kinds = set()
                for tok in args[0].split(","):
                    if tok == "dishonest_majority":
                        # no honest-majority assumption: encrypted aggregation
                        # or full-threshold sharing
                        kinds.update({ADDITIVE_HE, SHAMIR})
                    elif tok in _THREAT_ALIASES:
                        kinds.add(_THREAT_ALIASES[tok])
                    else:
                        raise ParseError(f"line {lineno}: unknown threat model {tok!r}")
                rules.append(RequireThreatModel(frozenset(kinds)))
            elif name == "require_proposer_suffix":
                rules.append(RequireProposerSuffix(args[0]))
            elif name == "allow_functions":
                rules.append(AllowFunctions(frozenset(args[0].split(","))))
            elif name == "block_output_fields":
                rules.append(BlockOutputFields(frozenset(args[0].split(","))))
            elif name == "manual_approval":
                rules.append(RequireManualApproval())
            elif name == "dp_budget":
                rules.append(DPBudget(float(args[0])))
            else:
                raise ParseError(f"line {lineno}: unknown rule {name!r}")
        except (IndexError, ValueError) as e:
            raise ParseError(f"line {lineno}: bad arguments for {name!r}") from e
    return PrivacyPolicy(tuple(rules))
