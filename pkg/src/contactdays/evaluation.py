"""Accuracy against ground truth and run-to-run stability."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass

from .consensus import compute_consensus
from .errors import UndefinedMetricError
from .extraction.models import normalize_intervention_type
from .schedule import WINDOWS, Role, Window
from .stats import iqr, median

ACCEPTABLE_DAYS = 3
STABILITY_CATEGORIES = ("perfect", "acceptable", "high_variance")


@dataclass(frozen=True)
class ValidationRecord:
    schedule_id: str
    arm_id: str
    window: Window
    extracted: int
    truth: int
    complexity: str = ""
    run_index: int | None = None

    @property
    def signed_error(self) -> int:
        return self.extracted - self.truth

    def to_row(self) -> dict:
        row = asdict(self)
        row["window"] = self.window.value
        row["signed_error"] = self.signed_error
        return row


def _require(records):
    records = list(records)
    if not records:
        raise UndefinedMetricError("metric undefined for an empty record set")
    return records


def exact_match_rate(records) -> float:
    records = _require(records)
    return sum(r.signed_error == 0 for r in records) / len(records)


def within_k_rate(records, k: int = ACCEPTABLE_DAYS) -> float:
    """Share of records with ``|error| <= k`` (boundary inclusive)."""
    records = _require(records)
    return sum(abs(r.signed_error) <= k for r in records) / len(records)


def mae(records) -> float:
    records = _require(records)
    return sum(abs(r.signed_error) for r in records) / len(records)


def accuracy_summary(records, k: int = ACCEPTABLE_DAYS) -> dict:
    records = _require(records)
    return {
        "comparisons": len(records),
        "exact_match": exact_match_rate(records),
        f"within_{k}": within_k_rate(records, k),
        "mae": mae(records),
    }


def _error_row(errors) -> dict:
    n = len(errors)
    return {
        "n": n,
        "median_error": float(median(errors)),
        "mean_error": sum(errors) / n,
        "mae": sum(abs(e) for e in errors) / n,
        "pct_overcount": 100.0 * sum(e > 0 for e in errors) / n,
        "pct_undercount": 100.0 * sum(e < 0 for e in errors) / n,
        "pct_exact": 100.0 * sum(e == 0 for e in errors) / n,
    }


def error_distribution(records) -> list[dict]:
    """Signed-error table with one row per time window, in window order."""
    by_window = defaultdict(list)
    for r in records:
        by_window[r.window].append(r.signed_error)
    return [{"window": w.value, **_error_row(by_window[w])} for w in WINDOWS if by_window[w]]


def overall_error(records) -> dict:
    records = _require(records)
    return {"window": "overall", **_error_row([r.signed_error for r in records])}


def complexity_breakdown(records) -> dict:
    """Per complexity: overall error row plus MAE for each window."""
    by_c = defaultdict(list)
    for r in records:
        by_c[r.complexity].append(r)
    out = {}
    for c in sorted(by_c):
        recs = by_c[c]
        out[c] = {
            **_error_row([r.signed_error for r in recs]),
            "mae_by_window": {row["window"]: row["mae"] for row in error_distribution(recs)},
        }
    return out


def _match_arms(run, truth_arms):
    """Pair truth arms with extracted arms by intervention type.

    Returns ``(pairs, unmatched_truth_ids)``. When a type has several
    extracted arms, one whose name contains the truth label wins, otherwise
    the lowest 12-month count.
    """
    by_role = defaultdict(list)
    for arm in run.arms:
        by_role[normalize_intervention_type(arm.intervention_type_raw).role].append(arm)
    pairs, unmatched = [], []
    for arm_id, truth in sorted(truth_arms.items()):
        candidates = by_role.get(Role(truth["role"]), [])
        if not candidates:
            unmatched.append(arm_id)
            continue
        label = (truth.get("label") or "").lower()
        named = [a for a in candidates if label and label in a.arm_name.lower()]
        pool = named or candidates
        pairs.append((arm_id, min(pool, key=lambda a: (a.contact_days[Window.M12], a.arm_name)), truth))
    return pairs, unmatched


def validation_records(run, truth_arms, complexity: str = "") -> tuple[list[ValidationRecord], list[str]]:
    """Records for every window of every truth arm the run produced.

    ``truth_arms`` is the ``arms`` mapping of a truth file. Arms the run
    missed are returned separately and do not enter the metrics.
    """
    pairs, unmatched = _match_arms(run, truth_arms)
    records = [
        ValidationRecord(
            schedule_id=run.protocol_id,
            arm_id=arm_id,
            window=w,
            extracted=arm.contact_days[w],
            truth=int(truth["counts"][w.value]),
            complexity=complexity,
            run_index=run.run_index,
        )
        for arm_id, arm, truth in pairs
        for w in WINDOWS
    ]
    return records, unmatched


# --------------------------------------------------------------------------
# stability


def classify_stability(values, acceptable_within: int = ACCEPTABLE_DAYS) -> str:
    """``perfect`` (IQR 0), ``acceptable`` (IQR <= 3) or ``high_variance``.

    Reports count perfect arms inside acceptable as well.
    """
    spread = iqr(values)
    if spread == 0:
        return "perfect"
    if spread <= acceptable_within:
        return "acceptable"
    return "high_variance"


@dataclass(frozen=True)
class StabilityRecord:
    protocol_id: str
    intervention_type: str
    pos_idx: int
    values: tuple
    iqr: float
    category: str


def stability_records(runs, window: Window = Window.M12, require_all_runs: bool = True) -> list[StabilityRecord]:
    """One record per consensus slot.

    With ``require_all_runs`` only slots present in every run of their
    protocol are kept; otherwise any slot seen in at least two runs.
    """
    out = []
    for arm in compute_consensus(runs):
        if require_all_runs and arm.supporting_runs < arm.total_runs:
            continue
        values = arm.run_values[window]
        if len(values) < 2:
            continue
        out.append(
            StabilityRecord(
                arm.protocol_id,
                arm.intervention_type.value,
                arm.pos_idx,
                tuple(values),
                iqr(values),
                classify_stability(values),
            )
        )
    return out


def stability_table(records) -> dict:
    """Nested category counts: perfect arms are also counted as acceptable."""
    records = list(records)
    total = len(records)
    perfect = sum(r.category == "perfect" for r in records)
    acceptable = perfect + sum(r.category == "acceptable" for r in records)
    high = total - acceptable

    def pct(n):
        return 100.0 * n / total if total else 0.0

    return {
        "perfect": {"arms": perfect, "pct": pct(perfect)},
        "acceptable": {"arms": acceptable, "pct": pct(acceptable)},
        "high_variance": {"arms": high, "pct": pct(high)},
        "total": total,
    }


def stability_report(runs, window: Window = Window.M12) -> dict:
    runs = list(runs)
    per_protocol = defaultdict(set)
    for r in runs:
        per_protocol[r.protocol_id].add(r.run_index)
    return {
        "window": window.value,
        "protocols": len(per_protocol),
        "max_runs_per_protocol": max(map(len, per_protocol.values()), default=0),
        "all_runs": stability_table(stability_records(runs, window, require_all_runs=True)),
        "any_run": stability_table(stability_records(runs, window, require_all_runs=False)),
    }


# --------------------------------------------------------------------------
# text tables

_WINDOW_TITLES = {
    "screening": "Screening",
    "m1": "1 Month",
    "m3": "3 Months",
    "m6": "6 Months",
    "m9": "9 Months",
    "m12": "12 Months",
    "overall": "Overall",
}


def _signed(x: float) -> str:
    return f"{x:+.1f}" if x else "0.0"


def format_accuracy_table(rows: dict) -> str:
    """``rows`` maps a pipeline label to :func:`accuracy_summary` output."""
    lines = [f"{'Pipeline':<28} {'Exact Match':>12} {'Within ±3d':>12} {'MAE (days)':>11}"]
    for label, s in rows.items():
        lines.append(
            f"{label:<28} {100 * s['exact_match']:>11.1f}% {100 * s['within_3']:>11.1f}% {s['mae']:>11.2f}"
        )
    return "\n".join(lines)


def format_error_table(rows) -> str:
    head = f"{'Time Window':<12} {'Median':>8} {'Mean':>8} {'MAE':>6} {'%Over':>7} {'%Under':>7} {'%Exact':>7}"
    lines = [head]
    for r in rows:
        lines.append(
            f"{_WINDOW_TITLES.get(r['window'], r['window']):<12} {_signed(r['median_error']):>8} "
            f"{_signed(r['mean_error']):>8} {r['mae']:>6.1f} {r['pct_overcount']:>6.1f}% "
            f"{r['pct_undercount']:>6.1f}% {r['pct_exact']:>6.1f}%"
        )
    return "\n".join(lines)


def format_stability_table(table: dict) -> str:
    titles = {
        "perfect": "Perfect Stability (IQR = 0)",
        "acceptable": "Clinically Acceptable (IQR <= 3)",
        "high_variance": "High Variance (IQR > 3)",
    }
    lines = [f"{'Stability Category':<34} {'Arms':>6} {'Percentage':>11}"]
    for key in STABILITY_CATEGORIES:
        lines.append(f"{titles[key]:<34} {table[key]['arms']:>6} {table[key]['pct']:>10.1f}%")
    lines.append(f"{'Total arms analyzed':<34} {table['total']:>6}")
    return "\n".join(lines)
