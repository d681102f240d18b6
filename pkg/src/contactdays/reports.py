"""Report files for an experiment: consensus, validation, stability."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path

from . import _io
from .consensus import analyze_swaps, compute_consensus
from .errors import PipelineError
from .evaluation import (
    accuracy_summary,
    complexity_breakdown,
    error_distribution,
    format_accuracy_table,
    format_error_table,
    format_stability_table,
    overall_error,
    stability_records,
    stability_report,
    validation_records,
)
from .extraction import ArmExtraction, RunResult
from .schedule import WINDOWS
from .stats import round_half_up


def _csv(rows, columns=None) -> str:
    rows = list(rows)
    buf = io.StringIO(newline="")
    columns = columns or (list(rows[0]) if rows else [])
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _round_floats(obj, places=6):
    if isinstance(obj, float):
        return round(obj, places)
    if isinstance(obj, dict):
        return {k: _round_floats(v, places) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round_floats(v, places) for v in obj]
    return obj


def write_consensus(exp_dir, runs, two_per_protocol: bool = False) -> dict:
    """Consensus table, detail file and swap report under ``consensus/``.

    ``two_per_protocol`` keeps only position 0 of each intervention type.
    """
    arms = compute_consensus(runs)
    if two_per_protocol:
        arms = [a for a in arms if a.pos_idx == 0]
    swaps = analyze_swaps(runs)
    out = Path(exp_dir) / "consensus"
    _io.atomic_write_text(out / "consensus.csv", _csv(a.to_row() for a in arms) if arms else "")
    _io.write_json(out / "consensus.json", {"schema_version": 1, "arms": [a.to_dict() for a in arms]})
    _io.write_json(out / "swaps.json", swaps.to_dict())
    return {"consensus_arms": len(arms), "swaps": swaps}


def consensus_as_run(arms, protocol_id) -> RunResult:
    """Rounded consensus of one protocol packaged as a run for scoring."""
    return RunResult(
        protocol_id=protocol_id,
        run_index=-1,
        arms=[
            ArmExtraction(
                arm_name=f"{a.intervention_type.value} position {a.pos_idx}",
                intervention_type_raw=a.intervention_type.value,
                contact_days=a.rounded,
            )
            for a in arms
            if a.protocol_id == protocol_id
        ],
    )


def _truths(suite_dir):
    suite_dir = Path(suite_dir)
    truths = {}
    for path in sorted(suite_dir.glob("*/truth.json")):
        doc = _io.read_json(path)
        truths[doc["schedule_id"]] = doc
    if not truths:
        raise PipelineError(f"no truth files under {suite_dir}")
    return truths


def validation(runs, suite_dir) -> dict:
    truths = _truths(suite_dir)
    per_run = defaultdict(list)
    records, missing = [], []
    for run in runs:
        truth = truths.get(run.protocol_id)
        if truth is None:
            continue
        recs, unmatched = validation_records(run, truth["arms"], truth.get("complexity", ""))
        records += recs
        per_run[run.run_index] += recs
        missing += [{"protocol_id": run.protocol_id, "run_index": run.run_index, "arm_id": a} for a in unmatched]
    if not records:
        raise PipelineError("no runs overlap the truth set")

    consensus = compute_consensus(runs)
    cons_records = []
    for pid in sorted({a.protocol_id for a in consensus}):
        if pid in truths:
            cons_records += validation_records(
                consensus_as_run(consensus, pid), truths[pid]["arms"], truths[pid].get("complexity", "")
            )[0]

    return {
        "pooled": accuracy_summary(records),
        "per_run": {str(k): accuracy_summary(v) for k, v in sorted(per_run.items())},
        "consensus": accuracy_summary(cons_records) if cons_records else None,
        "error_distribution": error_distribution(records),
        "overall_error": overall_error(records),
        "complexity": complexity_breakdown(records),
        "missing_arms": missing,
        "records": records,
    }


def write_validation(exp_dir, runs, suite_dir) -> dict:
    result = validation(runs, suite_dir)
    out = Path(exp_dir) / "reports"
    records = result.pop("records")
    _io.write_json(out / "validation.json", _round_floats(result))
    _io.atomic_write_text(out / "signed_errors.csv", _csv(r.to_row() for r in records))
    _io.atomic_write_text(out / "validation.txt", format_validation(result) + "\n")
    result["records"] = records
    return result


def format_validation(result) -> str:
    rows = {"Pooled runs": result["pooled"]}
    for k, s in result["per_run"].items():
        rows[f"Run {k}"] = s
    if result["consensus"]:
        rows["Consensus (rounded median)"] = result["consensus"]
    parts = [
        f"Validation against ground truth ({result['pooled']['comparisons']} pooled comparisons)",
        format_accuracy_table(rows),
        "",
        "Signed error by time window",
        format_error_table(result["error_distribution"] + [result["overall_error"]]),
        "",
        "MAE by complexity",
    ]
    for c, row in result["complexity"].items():
        cells = "  ".join(f"{w}={v:.1f}" for w, v in row["mae_by_window"].items())
        parts.append(f"  {c:<9} MAE {row['mae']:.2f}  overcount {row['pct_overcount']:.1f}%  [{cells}]")
    if result["missing_arms"]:
        parts.append(f"Missing arms (excluded from metrics): {len(result['missing_arms'])}")
    return "\n".join(parts)


def write_stability(exp_dir, runs) -> dict:
    report = stability_report(runs)
    out = Path(exp_dir) / "reports"
    _io.write_json(out / "stability.json", _round_floats(report))
    rows = [
        {
            "protocol_id": r.protocol_id,
            "intervention_type": r.intervention_type,
            "pos_idx": r.pos_idx,
            "values": " ".join(str(v) for v in r.values),
            "iqr": r.iqr,
            "category": r.category,
        }
        for r in stability_records(runs, require_all_runs=False)
    ]
    _io.atomic_write_text(
        out / "stability_arms.csv",
        _csv(rows, ["protocol_id", "intervention_type", "pos_idx", "values", "iqr", "category"]),
    )
    _io.atomic_write_text(out / "stability.txt", format_stability(report) + "\n")
    return report


def format_stability(report) -> str:
    return "\n".join(
        [
            f"Stability of {report['window']} counts over {report['protocols']} protocols "
            f"(up to {report['max_runs_per_protocol']} runs each)",
            "Slots present in every run:",
            format_stability_table(report["all_runs"]),
            "",
            "Slots present in at least two runs:",
            format_stability_table(report["any_run"]),
        ]
    )


def format_swaps(swaps) -> str:
    d = swaps.to_dict()
    return (
        f"Position swaps: {d['groups_total']} (protocol, type) groups, {d['multi_arm_groups']} with >1 arm, "
        f"{d['groups_with_potential_swaps']} with potential swaps; "
        f"{d['adjacent_close_pairs']}/{d['adjacent_pairs']} adjacent pairs within 3 days"
    )


def write_report(exp_dir, runs, suite_dir=None) -> str:
    """Every report plus a combined ``reports/report.txt``."""
    cons = write_consensus(exp_dir, runs)
    sections = [f"Consensus arms: {cons['consensus_arms']}", format_swaps(cons["swaps"]), ""]
    if suite_dir is not None and any(Path(suite_dir).glob("*/truth.json")):
        sections += [format_validation(write_validation(exp_dir, runs, suite_dir)), ""]
    sections.append(format_stability(write_stability(exp_dir, runs)))
    text = "\n".join(sections) + "\n"
    _io.atomic_write_text(Path(exp_dir) / "reports" / "report.txt", text)
    return text


__all__ = [
    "write_consensus",
    "write_validation",
    "write_stability",
    "write_report",
    "validation",
    "consensus_as_run",
    "round_half_up",
    "WINDOWS",
]
