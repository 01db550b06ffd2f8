"""Command-line entry point.

Subcommands: keygen, propose, inspect, policy-check, sim, report. The
environment variable PMSR_SEED supplies the default seed. Exit codes: sim
returns 0 when at least one computation released and 2 when everything
aborted; policy-check returns 0 for accept, 1 for reject, 3 for pending
manual approval; usage and input errors return 4.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import InvalidProposal, ParseError, PMSRError
from .policy import evaluate, parse_policy_text
from .proposal import (
    ComputationId,
    decode_signed,
    dump_fields,
    generate_keypair,
    parse_proposal_text,
    public_key_of,
    sign_proposal,
    verify_proposal,
)

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_ABORTED_ONLY = 2
EXIT_NEEDS_APPROVAL = 3
EXIT_ERROR = 4


def _default_seed() -> int:
    return int(os.environ.get("PMSR_SEED", "0"))


def cmd_keygen(args) -> int:
    from .report import write_atomic

    seed = None
    if args.seed is not None:
        from random import Random

        seed = Random(f"keygen/{args.seed}").randbytes(32)
    sk, pk = generate_keypair(seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_atomic(out.with_suffix(".sk"), sk.hex() + "\n")
    write_atomic(out.with_suffix(".pk"), pk.hex() + "\n")
    print(pk.hex())
    return EXIT_OK


def _read_secret_key(path: str) -> bytes:
    return bytes.fromhex(Path(path).read_text().strip())


def cmd_propose(args) -> int:
    from .report import write_atomic

    sk = _read_secret_key(args.key)
    pk = public_key_of(sk)
    text = Path(args.proposal).read_text()
    if args.id:
        id_bytes = bytes.fromhex(args.id)
    elif any(line.strip().startswith("id ") for line in text.splitlines()):
        id_bytes = None  # the file names its own id
    else:
        id_bytes = ComputationId.random().bytes
    proposal = parse_proposal_text(text, proposer=pk, id_bytes=id_bytes)
    proposal.validate()
    signed = sign_proposal(proposal, sk)
    from .proposal import encode_signed

    write_atomic(Path(args.out), encode_signed(signed))
    print(f"wrote {args.out} ({proposal.id.hex()})")
    return EXIT_OK


def cmd_inspect(args) -> int:
    data = Path(args.file).read_bytes()
    signed = decode_signed(data)
    ok = verify_proposal(signed)
    sys.stdout.write(dump_fields(signed.proposal))
    print(f"signature {'valid' if ok else 'INVALID'}")
    return EXIT_OK if ok else EXIT_ERROR


def cmd_policy_check(args) -> int:
    policy = parse_policy_text(Path(args.policy).read_text())
    proposal = parse_proposal_text(
        Path(args.proposal).read_text(), id_bytes=b"\x00" * 16
    )
    ledger = None
    rule = policy.budget_rule()
    if rule is not None:
        from .policy import BudgetLedger

        ledger = BudgetLedger(rule.total_epsilon)
    decision = evaluate(policy, proposal, ledger, proposer_identity=args.proposer_identity)
    if decision.kind == "accept":
        print("Accept")
        return EXIT_OK
    if decision.kind == "needs_approval":
        print("NeedsApproval")
        return EXIT_NEEDS_APPROVAL
    print(f"Reject({decision.reason})")
    return EXIT_REJECT


def cmd_sim(args) -> int:
    from .proposal import SHAMIR, ThreatModel
    from .report import render_report
    from .sim import ScenarioConfig, run_scenario

    kind = args.threat_model
    if kind == "shamir":
        tm = ThreatModel(SHAMIR, t=args.shamir_t, n=args.shamir_n)
    else:
        from .proposal import _THREAT_TOKENS

        if kind not in _THREAT_TOKENS:
            print(f"unknown threat model {kind!r}", file=sys.stderr)
            return EXIT_ERROR
        tm = ThreatModel(_THREAT_TOKENS[kind])

    cfg = ScenarioConfig(
        name=args.scenario,
        n_light=args.n_light,
        n_heavy=args.n_heavy,
        threat_model=tm,
        min_participants=args.threshold,
        deadline_ticks=args.deadline,
        seed=args.seed,
        dropout_rate=args.dropout,
        drop_rate=args.drop_rate,
        epsilon=args.epsilon,
        n_questions=args.questions,
    )
    report = run_scenario(cfg)
    out_dir = args.out or f"report_{args.scenario}_{args.seed}"
    files = render_report(report, out_dir, ms_per_tick=args.ms_per_tick)
    print(report.summary_line())
    for f in files:
        print(f"  wrote {f}")
    return EXIT_OK if report.released_count > 0 else EXIT_ABORTED_ONLY


def cmd_report(args) -> int:
    from .report import render_report, report_from_json

    report = report_from_json(Path(args.input).read_text())
    files = render_report(report, args.out)
    for f in files:
        print(f"  wrote {f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmsr",
        description="private map / secure reduce runtime and simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a signing keypair")
    p.add_argument("--out", required=True, help="output path prefix (.sk/.pk)")
    p.add_argument("--seed", type=int, default=None, help="deterministic keygen for tests")
    p.set_defaults(fn=cmd_keygen)

    p = sub.add_parser("propose", help="parse, validate, and sign a proposal file")
    p.add_argument("--proposal", required=True)
    p.add_argument("--key", required=True, help="secret key file (.sk)")
    p.add_argument("--out", required=True)
    p.add_argument("--id", default=None, help="computation id as 32 hex chars")
    p.set_defaults(fn=cmd_propose)

    p = sub.add_parser("inspect", help="dump a signed proposal binary")
    p.add_argument("file")
    p.set_defaults(fn=cmd_inspect)

    p = sub.add_parser("policy-check", help="evaluate a policy against a proposal file")
    p.add_argument("--policy", required=True)
    p.add_argument("--proposal", required=True)
    p.add_argument("--proposer-identity", default=None)
    p.set_defaults(fn=cmd_policy_check)

    p = sub.add_parser("sim", help="run a scenario and write its report")
    p.add_argument("scenario", choices=("sleep_stats", "audit", "ensemble", "custom"))
    p.add_argument("--n-light", type=int, default=20)
    p.add_argument("--n-heavy", type=int, default=3)
    p.add_argument("--threshold", type=int, default=1)
    p.add_argument("--deadline", type=int, default=20)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--drop-rate", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--questions", type=int, default=1000)
    p.add_argument("--threat-model", default="3pc")
    p.add_argument("--shamir-t", type=int, default=2)
    p.add_argument("--shamir-n", type=int, default=3)
    p.add_argument("--ms-per-tick", type=float, default=None,
                   help="presentation factor for latency lines in report.txt")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_sim)

    p = sub.add_parser("report", help="re-render report files from report.json")
    p.add_argument("--input", required=True, help="path to report.json")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and args.command in ("sim",):
        args.seed = _default_seed()
    try:
        return args.fn(args)
    except (ParseError, InvalidProposal) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except PMSRError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
