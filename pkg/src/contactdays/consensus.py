"""Position-based matching of arms across runs and median consensus.

Arm names drift between runs, so arms are never matched by name. Within each
run, arms of one (protocol, intervention type) group are ranked by their
12-month count and matched across runs by that rank.
"""

from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass, field

from .schedule import WINDOWS, Role, Window
from .stats import iqr, median, round_half_up

CLOSE_PAIR_DAYS = 3


@dataclass(frozen=True)
class PositionedArm:
    protocol_id: str
    intervention_type: Role
    pos_idx: int
    run_index: int
    contact_days: dict
    arm_name: str = ""

    @property
    def slot(self) -> tuple:
        return (self.protocol_id, self.intervention_type.value, self.pos_idx)


def _sort_key(arm):
    return (arm.contact_days[Window.M12], arm.contact_days[Window.M6], arm.arm_name)


def assign_positions(run) -> list[PositionedArm]:
    """Rank the arms of one run within their (protocol, intervention type) group.

    Ordering is by 12-month count, then 6-month count, then arm name, so the
    result does not depend on the order the backend listed the arms in.
    """
    groups = defaultdict(list)
    for arm in run.arms:
        groups[arm.intervention_type].append(arm)
    out = []
    for role in sorted(groups, key=lambda r: r.value):
        for pos, arm in enumerate(sorted(groups[role], key=_sort_key)):
            out.append(
                PositionedArm(
                    protocol_id=run.protocol_id,
                    intervention_type=role,
                    pos_idx=pos,
                    run_index=run.run_index,
                    contact_days=dict(arm.contact_days),
                    arm_name=arm.arm_name,
                )
            )
    return out


@dataclass(frozen=True)
class ConsensusArm:
    protocol_id: str
    intervention_type: Role
    pos_idx: int
    counts: dict  # Window -> median (float; halves occur with even support)
    supporting_runs: int
    total_runs: int
    run_values: dict  # Window -> tuple of per-run values ordered by run_index
    arm_names: tuple = ()
    flags: tuple = ()

    @property
    def rounded(self) -> dict:
        return {w: round_half_up(v) for w, v in self.counts.items()}

    def spread(self, window: Window) -> dict:
        values = self.run_values[window]
        return {
            "min": min(values),
            "max": max(values),
            "iqr": iqr(values) if len(values) >= 2 else None,
        }

    def to_dict(self) -> dict:
        return {
            "protocol_id": self.protocol_id,
            "intervention_type": self.intervention_type.value,
            "pos_idx": self.pos_idx,
            "consensus": {w.key: self.counts[w] for w in WINDOWS},
            "consensus_rounded": {w.key: self.rounded[w] for w in WINDOWS},
            "supporting_runs": self.supporting_runs,
            "total_runs": self.total_runs,
            "run_values": {w.key: list(self.run_values[w]) for w in WINDOWS},
            "spread": {w.key: self.spread(w) for w in WINDOWS},
            "arm_names": list(self.arm_names),
            "flags": list(self.flags),
        }

    def to_row(self) -> dict:
        row = {
            "protocol_id": self.protocol_id,
            "intervention_type": self.intervention_type.value,
            "pos_idx": self.pos_idx,
        }
        for w in WINDOWS:
            row[w.key] = self.counts[w]
        for w in WINDOWS:
            row[f"{w.key}_rounded"] = self.rounded[w]
        for w in WINDOWS:
            s = self.spread(w)
            row[f"{w.key}_min"] = s["min"]
            row[f"{w.key}_max"] = s["max"]
            row[f"{w.key}_iqr"] = "" if s["iqr"] is None else s["iqr"]
        row["supporting_runs"] = self.supporting_runs
        row["total_runs"] = self.total_runs
        row["flags"] = ";".join(self.flags)
        return row


def _positioned(runs):
    by_protocol = defaultdict(list)
    for run in runs:
        by_protocol[run.protocol_id].append(run)
    return by_protocol


def compute_consensus(runs) -> list[ConsensusArm]:
    """Median-aggregate every (protocol, type, position) slot across runs.

    Slots that only some runs produced are kept with a reduced supporting
    count and the ``under_supported`` flag. Output is sorted by slot, so it
    does not depend on run order.
    """
    runs = list(runs)
    if not runs:
        warnings.warn("compute_consensus called with no runs; returning no consensus arms", RuntimeWarning)
        return []
    out = []
    for protocol_id, proto_runs in sorted(_positioned(runs).items()):
        run_ids = sorted({r.run_index for r in proto_runs})
        slots = defaultdict(list)
        for run in sorted(proto_runs, key=lambda r: r.run_index):
            for parm in assign_positions(run):
                slots[(parm.intervention_type.value, parm.pos_idx)].append(parm)
        for (itype, pos), members in sorted(slots.items()):
            values = {w: tuple(m.contact_days[w] for m in members) for w in WINDOWS}
            flags = []
            if len(members) < len(run_ids):
                flags.append("under_supported")
            if len(members) % 2 == 0:
                flags.append("even_support")
            out.append(
                ConsensusArm(
                    protocol_id=protocol_id,
                    intervention_type=Role(itype),
                    pos_idx=pos,
                    counts={w: median(v) for w, v in values.items()},
                    supporting_runs=len(members),
                    total_runs=len(run_ids),
                    run_values=values,
                    arm_names=tuple(m.arm_name for m in members),
                    flags=tuple(flags),
                )
            )
    return out


@dataclass
class SwapReport:
    groups_total: int = 0
    multi_arm_groups: int = 0
    groups_with_potential_swaps: int = 0
    adjacent_pairs: int = 0
    adjacent_close_pairs: int = 0
    details: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def pct(a, b):
            return round(100.0 * a / b, 1) if b else None

        return {
            "groups_total": self.groups_total,
            "multi_arm_groups": self.multi_arm_groups,
            "multi_arm_pct": pct(self.multi_arm_groups, self.groups_total),
            "groups_with_potential_swaps": self.groups_with_potential_swaps,
            "swap_pct_of_multi_arm": pct(self.groups_with_potential_swaps, self.multi_arm_groups),
            "adjacent_pairs": self.adjacent_pairs,
            "adjacent_close_pairs": self.adjacent_close_pairs,
            "close_pair_pct": pct(self.adjacent_close_pairs, self.adjacent_pairs),
            "details": self.details,
        }


def analyze_swaps(runs, close_within: int = CLOSE_PAIR_DAYS) -> SwapReport:
    """Flag adjacent same-type positions whose 12-month values overlap across runs.

    Positions i and i+1 are a potential swap when the largest value seen at
    i reaches the smallest value seen at i+1. They are a close pair when their
    median values differ by at most ``close_within`` days.
    """
    groups = defaultdict(lambda: defaultdict(list))
    for run in runs:
        for parm in assign_positions(run):
            key = (parm.protocol_id, parm.intervention_type.value)
            groups[key][parm.pos_idx].append(parm.contact_days[Window.M12])

    report = SwapReport(groups_total=len(groups))
    for (protocol_id, itype), positions in sorted(groups.items()):
        if len(positions) < 2:
            continue
        report.multi_arm_groups += 1
        pairs = []
        for i in range(len(positions) - 1):
            lo, hi = positions[i], positions[i + 1]
            swap = max(lo) >= min(hi)
            gap = median(hi) - median(lo)
            close = abs(gap) <= close_within
            pairs.append(
                {
                    "positions": [i, i + 1],
                    "values": [sorted(lo), sorted(hi)],
                    "potential_swap": swap,
                    "median_gap": gap,
                    "close_pair": close,
                }
            )
            report.adjacent_pairs += 1
            report.adjacent_close_pairs += close
        if any(p["potential_swap"] for p in pairs):
            report.groups_with_potential_swaps += 1
        report.details.append({"protocol_id": protocol_id, "intervention_type": itype, "pairs": pairs})
    return report
