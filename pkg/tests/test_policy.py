"""Policy evaluation, manual approval, and the budget ledger."""

import itertools
from random import Random

import pytest

from conftest import make_proposal
from pmsr.errors import BudgetExhausted, InvalidEpsilon, NotPending, ParseError
from pmsr.policy import (
    AllowFunctions,
    BlockOutputFields,
    BudgetLedger,
    DPBudget,
    PendingApproval,
    PrivacyPolicy,
    RequireManualApproval,
    RequireMinParticipants,
    RequireProposerSuffix,
    RequireThreatModel,
    approve,
    charge,
    evaluate,
    parse_policy_text,
)
from pmsr.proposal import (
    ADDITIVE_HE,
    PLAINTEXT_DP,
    SEMI_HONEST_3PC,
    SHAMIR,
    OutputSchema,
    SchemaField,
    ThreatModel,
)

PK = bytes(32)


def test_min_participants_rule_accepts_larger_threshold():
    policy = PrivacyPolicy((RequireMinParticipants(100),))
    proposal = make_proposal(PK, min_participants=500)
    assert evaluate(policy, proposal).kind == "accept"


def test_empty_policy_accepts_anything():
    proposal = make_proposal(PK)
    assert evaluate(PrivacyPolicy(), proposal).kind == "accept"


def test_threat_model_reject_names_rule():
    policy = PrivacyPolicy((RequireThreatModel(frozenset({SHAMIR})),))
    proposal = make_proposal(PK, threat_model=ThreatModel(PLAINTEXT_DP), quorum=(1,))
    decision = evaluate(policy, proposal)
    assert decision.kind == "reject" and decision.reason == "RequireThreatModel"


def test_rule_matrix_against_truth_table():
    """Exhaustive rule x proposal matrix checked against an independent
    predicate table."""
    schema_pii = OutputSchema((SchemaField("email", "fixed64"),))
    proposals = {
        "big": make_proposal(PK, min_participants=500),
        "small": make_proposal(PK, min_participants=2),
        "shamir": make_proposal(
            PK, threat_model=ThreatModel(SHAMIR, t=2, n=3), quorum=(1, 2, 3)
        ),
        "plain_eps": make_proposal(
            PK, threat_model=ThreatModel(PLAINTEXT_DP), quorum=(1,), epsilon=0.5
        ),
        "pii": make_proposal(PK, schema=schema_pii),
    }
    ledger = BudgetLedger(1.0)
    identity = "auditor@trusted-domain.org"
    rules = {
        "min100": (
            RequireMinParticipants(100),
            lambda p: p.min_participants >= 100,
        ),
        "tm": (
            RequireThreatModel(frozenset({SHAMIR, SEMI_HONEST_3PC})),
            lambda p: p.threat_model.kind in (SHAMIR, SEMI_HONEST_3PC),
        ),
        "suffix": (
            RequireProposerSuffix("@trusted-domain.org"),
            lambda p: True,  # identity fixed below
        ),
        "fns": (
            AllowFunctions(frozenset({"mean_of", "mean", "sum"})),
            lambda p: p.map_spec.name in {"mean_of", "mean", "sum"}
            and p.reduce_spec.name in {"mean_of", "mean", "sum"},
        ),
        "block": (
            BlockOutputFields(frozenset({"email", "ssn"})),
            lambda p: all(f.name not in {"email", "ssn"} for f in p.output_schema.fields),
        ),
        "budget": (
            DPBudget(1.0),
            lambda p: p.epsilon is not None and p.epsilon <= 1.0,
        ),
    }
    for (rname, (rule, ref)), (pname, proposal) in itertools.product(
        rules.items(), proposals.items()
    ):
        decision = evaluate(
            PrivacyPolicy((rule,)), proposal, ledger, proposer_identity=identity
        )
        expected = ref(proposal)
        assert (decision.kind == "accept") == expected, (rname, pname, decision)
        if not expected:
            assert decision.reason == type(rule).__name__


def test_first_failing_rule_wins():
    policy = PrivacyPolicy(
        (RequireMinParticipants(100), RequireThreatModel(frozenset({SHAMIR})))
    )
    decision = evaluate(policy, make_proposal(PK, min_participants=1))
    assert decision.reason == "RequireMinParticipants"


def test_classification_order_independent_without_manual():
    rules = [
        RequireMinParticipants(3),
        RequireThreatModel(frozenset({SEMI_HONEST_3PC})),
        AllowFunctions(frozenset({"mean_of", "mean"})),
        BlockOutputFields(frozenset({"email"})),
    ]
    proposals = [
        make_proposal(PK, min_participants=5),
        make_proposal(PK, min_participants=1),
        make_proposal(PK, schema=OutputSchema((SchemaField("email", "fixed64"),))),
    ]
    for proposal in proposals:
        kinds = {
            evaluate(PrivacyPolicy(tuple(perm)), proposal).kind
            for perm in itertools.permutations(rules)
        }
        assert len(kinds) == 1


def test_manual_approval_flow():
    policy = PrivacyPolicy((RequireManualApproval(),))
    decision = evaluate(policy, make_proposal(PK))
    assert decision.kind == "needs_approval"

    pending = PendingApproval(decision)
    assert approve(pending, True).kind == "accept"
    with pytest.raises(NotPending):
        approve(pending, True)

    pending2 = PendingApproval(evaluate(policy, make_proposal(PK)))
    denied = approve(pending2, False)
    assert denied.kind == "reject" and denied.reason == "ManualDenial"


def test_pending_requires_needs_approval():
    with pytest.raises(NotPending):
        PendingApproval(evaluate(PrivacyPolicy(), make_proposal(PK)))


def test_failing_rule_beats_manual_approval():
    policy = PrivacyPolicy((RequireManualApproval(), RequireMinParticipants(100)))
    decision = evaluate(policy, make_proposal(PK, min_participants=1))
    assert decision.kind == "reject"


def test_dp_budget_rule_requires_epsilon():
    policy = PrivacyPolicy((DPBudget(2.0),))
    ledger = BudgetLedger(2.0)
    no_eps = make_proposal(PK)
    assert evaluate(policy, no_eps, ledger).kind == "reject"
    with_eps = make_proposal(PK, epsilon=0.5)
    assert evaluate(policy, with_eps, ledger).kind == "accept"
    ledger.spent_epsilon = 1.8
    assert evaluate(policy, with_eps, ledger).kind == "reject"


def test_at_most_one_budget_rule():
    with pytest.raises(ValueError):
        PrivacyPolicy((DPBudget(1.0), DPBudget(2.0)))


# --- ledger ---


def test_charge_basic():
    ledger = BudgetLedger(1.0)
    charge(ledger, 0.3)
    assert ledger.spent_epsilon == pytest.approx(0.3)


def test_charge_boundary_leaves_ledger_unchanged():
    ledger = BudgetLedger(1.0, spent_epsilon=0.9)
    with pytest.raises(BudgetExhausted):
        charge(ledger, 0.2)
    assert ledger.spent_epsilon == pytest.approx(0.9)


def test_charge_requires_positive_epsilon():
    ledger = BudgetLedger(1.0)
    with pytest.raises(InvalidEpsilon):
        charge(ledger, 0.0)
    with pytest.raises(InvalidEpsilon):
        charge(ledger, -0.1)


def test_charge_replay_oracle():
    # final spent equals the sum of accepted charges, and never exceeds total
    rng = Random(8)
    ledger = BudgetLedger(10.0)
    accepted = []
    for _ in range(500):
        eps = rng.uniform(0.01, 0.8)
        before = ledger.spent_epsilon
        try:
            charge(ledger, eps)
            accepted.append(eps)
            assert ledger.spent_epsilon == before + eps
        except BudgetExhausted:
            assert ledger.spent_epsilon == before
        assert 0 <= ledger.spent_epsilon <= ledger.total_epsilon
    assert ledger.spent_epsilon == pytest.approx(sum(accepted))


# --- policy file format ---

POLICY_TEXT = """
# health data policy
require_min_participants 100
require_threat_model shamir,3pc
require_proposer_suffix @trusted-domain.org
allow_functions mean_of,mean,count
block_output_fields email,name
manual_approval
dp_budget 2.0
"""


def test_parse_policy_text():
    policy = parse_policy_text(POLICY_TEXT)
    assert len(policy.rules) == 7
    assert policy.budget_rule().total_epsilon == 2.0
    kinds = next(r for r in policy.rules if isinstance(r, RequireThreatModel)).kinds
    assert kinds == frozenset({SHAMIR, SEMI_HONEST_3PC})


def test_parse_policy_dishonest_majority_alias():
    policy = parse_policy_text("require_threat_model dishonest_majority\n")
    (rule,) = policy.rules
    assert rule.kinds == frozenset({ADDITIVE_HE, SHAMIR})


def test_parse_policy_errors():
    with pytest.raises(ParseError):
        parse_policy_text("require_min_participants\n")
    with pytest.raises(ParseError):
        parse_policy_text("no_such_rule 1\n")
    with pytest.raises(ParseError):
        parse_policy_text("require_threat_model warpdrive\n")
