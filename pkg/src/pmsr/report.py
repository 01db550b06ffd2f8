"""Report rendering: structured text, delimited tables, JSON, and figures.

A scenario run writes one directory containing report.txt, report.json,
computations.csv, trace.csv, categories.csv (audit runs), and PNG figures
for whatever the run produced: latency and participation histograms, category
representation ratios, and per-model ensemble accuracy. Text and JSON
rendering is canonical so identical runs produce identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .sim import ScenarioReport
from .stats import SummaryStats


def write_atomic(path: Path, data: bytes | str) -> None:
    """Temp-then-rename write, so readers never observe a partial file."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_to_json(report: ScenarioReport) -> str:
    payload = {
        "scenario": report.scenario,
        "seed": report.seed,
        "config": report.config,
        "computations": report.computations,
        "latency": dataclasses.asdict(report.latency) if report.latency else None,
        "participation": {str(k): v for k, v in report.participation.items()},
        "aggregates": report.aggregates,
        "extras": report.extras,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> ScenarioReport:
    d = json.loads(text)
    latency = SummaryStats(**d["latency"]) if d["latency"] else None
    return ScenarioReport(
        scenario=d["scenario"],
        seed=d["seed"],
        config=d["config"],
        computations=d["computations"],
        latency=latency,
        participation={int(k): v for k, v in sorted(d["participation"].items())},
        aggregates=d["aggregates"],
        extras=d["extras"],
        trace_rows=[],
    )


def computations_csv(report: ScenarioReport) -> str:
    rows = ["computation_id,phase,participants,start_tick,end_tick,aggregate_json_or_reason"]
    for c in report.computations:
        if c["phase"] == "released":
            tail = json.dumps(c["aggregate"], sort_keys=True).replace(",", ";")
        elif c["phase"] == "aborted":
            tail = c["abort_reason"] or ""
        else:
            tail = ""
        end = c["end_tick"] if c["end_tick"] is not None else ""
        rows.append(
            f"{c['id']},{c['phase']},{c['participants']},{c['start_tick']},{end},{tail}"
        )
    return "\n".join(rows) + "\n"


def categories_csv(report: ScenarioReport) -> str | None:
    from .datagen import INDUSTRY_CATEGORIES

    audit = report.extras.get("audit")
    baseline = report.extras.get("baseline")
    if not audit or not baseline:
        return None
    rows = ["phase,category,count,baseline,ratio"]
    for phase in ("mock", "real"):
        industry = (audit.get(phase) or {}).get("industry")
        if not industry:
            continue
        ratios = industry["ratios"]
        for i, cat in enumerate(INDUSTRY_CATEGORIES):
            count = industry["counts"][i]
            rows.append(f"{phase},{cat},{count!r},{baseline[cat]!r},{ratios[cat]!r}")
    return "\n".join(rows) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_to_text(report: ScenarioReport, ms_per_tick: float | None = None) -> str:
    lines = [
        f"scenario: {report.scenario}",
        f"seed: {report.seed}",
        "config:",
    ]
    for k, v in report.config.items():
        lines.append(f"  {k}: {_fmt(v)}")
    lines.append("")
    lines.append(f"computations: {len(report.computations)}")
    lines.append(f"released: {report.released_count}")
    lines.append(f"aborted: {report.aborted_count}")
    if report.latency:
        s = report.latency
        lines.append(
            "latency_ticks: "
            f"mean={_fmt(s.mean)} median={_fmt(s.median)} p95={_fmt(s.p95)} "
            f"min={_fmt(s.min)} max={_fmt(s.max)}"
        )
        if ms_per_tick is not None:
            # presentation only: virtual ticks carry no inherent wall-clock unit
            lines.append(
                "latency_ms: "
                f"mean={_fmt(s.mean * ms_per_tick)} median={_fmt(s.median * ms_per_tick)} "
                f"p95={_fmt(s.p95 * ms_per_tick)}"
            )
    lines.append("participation_histogram:")
    for k, v in report.participation.items():
        lines.append(f"  {k}: {v}")
    if report.aggregates and len(report.aggregates) <= 24:
        lines.append("aggregates:")
        for label in sorted(report.aggregates):
            lines.append(f"  {label}: {json.dumps(report.aggregates[label], sort_keys=True)}")
    if report.extras:
        lines.append("extras:")
        lines.append(
            "\n".join(
                "  " + line
                for line in json.dumps(report.extras, sort_keys=True, indent=2).splitlines()
            )
        )
    lines.append("")
    lines.append("per-computation outcomes (label,phase,participants,start,end):")
    for c in report.computations[:200]:
        end = c["end_tick"] if c["end_tick"] is not None else "-"
        lines.append(
            f"  {c['label']},{c['phase']},{c['participants']},{c['start_tick']},{end}"
        )
    if len(report.computations) > 200:
        lines.append(f"  ... {len(report.computations) - 200} more")
    return "\n".join(lines) + "\n"


# --- figures -------------------------------------------------------------------


def _latency_figure(report: ScenarioReport, path: Path) -> bool:
    values = [
        c["end_tick"] - c["start_tick"]
        for c in report.computations
        if c["phase"] == "released"
    ]
    if not values:
        return False
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(values, bins=min(30, max(5, len(set(values)))), color="#3b6ea5", edgecolor="white")
    ax.set_xlabel("ticks from proposal to release")
    ax.set_ylabel("computations")
    ax.set_title(f"{report.scenario}: latency distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


def _participation_figure(report: ScenarioReport, path: Path) -> bool:
    if not report.participation:
        return False
    keys = list(report.participation)
    vals = [report.participation[k] for k in keys]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([str(k) for k in keys], vals, color="#5a9e6f")
    ax.set_xlabel("participants")
    ax.set_ylabel("computations")
    ax.set_title(f"{report.scenario}: participation")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


def _representation_figure(report: ScenarioReport, path: Path) -> bool:
    audit = report.extras.get("audit")
    if not audit:
        return False
    industry = (audit.get("real") or {}).get("industry")
    if not industry:
        return False
    ratios = industry["ratios"]
    cats = list(ratios)
    vals = [ratios[c] for c in cats]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.bar(range(len(cats)), vals, color="#b3589a")
    ax.axhline(1.0, color="black", linewidth=1, linestyle="--", label="baseline parity")
    ax.set_xticks(range(len(cats)))
    ax.set_xticklabels(cats, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("representation ratio")
    ax.set_title("category representation vs baseline")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


def _ensemble_figure(report: ScenarioReport, path: Path) -> bool:
    per_model = report.extras.get("per_model_accuracy")
    if not per_model:
        return False
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = [f"model {i}" for i in range(len(per_model))]
    ax.bar(labels, per_model, color="#888dc0", label="individual models")
    ens = report.extras.get("ensemble_accuracy")
    theo = report.extras.get("theoretical_max")
    if ens is not None:
        ax.axhline(ens, color="#205b2a", linewidth=2, label=f"ensemble {ens:.3f}")
    if theo is not None:
        ax.axhline(theo, color="#9e3a2f", linewidth=1.5, linestyle=":", label=f"upper bound {theo:.3f}")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.set_title("ensemble vs individual models")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


def render_report(
    report: ScenarioReport, out_dir: str | Path, ms_per_tick: float | None = None
) -> list[Path]:
    """Write the full report bundle; returns the files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    write_atomic(out / "report.json", report_to_json(report))
    written.append(out / "report.json")
    write_atomic(out / "report.txt", report_to_text(report, ms_per_tick))
    written.append(out / "report.txt")
    write_atomic(out / "computations.csv", computations_csv(report))
    written.append(out / "computations.csv")
    if report.trace_rows:
        trace = "tick,from,to,payload_kind,computation_id\n" + "\n".join(report.trace_rows) + "\n"
        write_atomic(out / "trace.csv", trace)
        written.append(out / "trace.csv")
    cats = categories_csv(report)
    if cats:
        write_atomic(out / "categories.csv", cats)
        written.append(out / "categories.csv")

    for name, fn in (
        ("latency_ticks.png", _latency_figure),
        ("participation.png", _participation_figure),
        ("representation.png", _representation_figure),
        ("ensemble_accuracy.png", _ensemble_figure),
    ):
        if fn(report, out / name):
            written.append(out / name)
    return written
