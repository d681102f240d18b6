"""Schedule domain model and contact-day arithmetic.

Everything here is deterministic: a :class:`ScheduleSpec` expands into one
:class:`ContactCalendar` per arm, and counting unique calendar days inside the
six cumulative windows yields the :class:`GroundTruth` that every other part of
the package is checked against.

Day numbering: day 1 is the first treatment day, screening days are <= 0.
Months are 30 days throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import InvalidSpecError

SCHEMA_VERSION = 1
DAYS_PER_MONTH = 30

CYCLE_LENGTHS = (7, 21, 28, 35)
DURATION_RANGE = (2, 12)
STYLE_RANGE = (1, 5)


class Window(str, Enum):
    """Cumulative counting windows.

    ``value`` is the short label used in files; :attr:`key` is the label the
    extraction prompt and model output use.
    """

    SCREENING = "screening"
    M1 = "m1"
    M3 = "m3"
    M6 = "m6"
    M9 = "m9"
    M12 = "m12"

    @property
    def upper_day(self) -> int | None:
        return _UPPER_DAY[self]

    @property
    def key(self) -> str:
        return _OUTPUT_KEY[self]

    @classmethod
    def from_key(cls, key: str) -> "Window":
        try:
            return _FROM_KEY[key]
        except KeyError:
            return cls(key)

    def contains(self, day: int) -> bool:
        if self is Window.SCREENING:
            return day <= 0
        return 1 <= day <= self.upper_day


_UPPER_DAY = {
    Window.SCREENING: None,
    Window.M1: 30,
    Window.M3: 90,
    Window.M6: 180,
    Window.M9: 270,
    Window.M12: 365,
}
_OUTPUT_KEY = {
    Window.SCREENING: "screening",
    Window.M1: "1_month",
    Window.M3: "3_months",
    Window.M6: "6_months",
    Window.M9: "9_months",
    Window.M12: "12_months",
}
_FROM_KEY = {v: k for k, v in _OUTPUT_KEY.items()}

WINDOWS = tuple(Window)
TREATMENT_WINDOWS = WINDOWS[1:]


class Category(str, Enum):
    CORE_TREATMENT = "core_treatment"
    IMAGING = "imaging_diagnostics"
    LABS = "labs"
    CLINIC = "clinic_visits"


CATEGORIES = tuple(Category)

# Tags applied when the calendar is expanded.
TREATMENT_TAGS = frozenset({Category.CORE_TREATMENT, Category.LABS, Category.CLINIC})
IMAGING_TAGS = frozenset({Category.IMAGING})
EOT_TAGS = frozenset({Category.CLINIC})
FOLLOWUP_TAGS = frozenset({Category.CLINIC, Category.IMAGING})
SCREENING_TAGS = frozenset({Category.CLINIC, Category.LABS})


class Complexity(str, Enum):
    SIMPLE = "simple"
    MODERATE = "moderate"
    COMPLEX = "complex"

    @property
    def visit_days(self) -> int:
        return {"simple": 1, "moderate": 2, "complex": 3}[self.value]


class Role(str, Enum):
    INTERVENTION = "intervention"
    CONTROL = "control"


DISEASE_CATEGORIES = (
    "breast",
    "thoracic",
    "gastrointestinal",
    "genitourinary",
    "head_and_neck",
    "melanoma",
    "gynecologic",
    "sarcoma",
)
MODALITIES = ("systemic", "radiation", "surgery")


def total_cycles(duration_months: int, cycle_length_days: int) -> int:
    """Number of complete cycles in the treatment period.

    >>> total_cycles(6, 21)
    8
    """
    if duration_months < 1 or cycle_length_days < 1:
        raise InvalidSpecError(
            f"duration ({duration_months}) and cycle length ({cycle_length_days}) must be positive"
        )
    return (duration_months * DAYS_PER_MONTH) // cycle_length_days


@dataclass(frozen=True)
class ArmSpec:
    arm_id: str
    role: Role
    visit_days_per_cycle: tuple[int, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        days = tuple(sorted(set(int(d) for d in self.visit_days_per_cycle)))
        if not days:
            raise InvalidSpecError(f"arm {self.arm_id!r} has no visit days")
        if len(days) not in (1, 2, 3):
            raise InvalidSpecError(f"arm {self.arm_id!r} has {len(days)} visit days per cycle; expected 1-3")
        object.__setattr__(self, "visit_days_per_cycle", days)

    def to_dict(self) -> dict:
        return {
            "arm_id": self.arm_id,
            "role": self.role.value,
            "visit_days_per_cycle": list(self.visit_days_per_cycle),
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ArmSpec":
        return cls(
            arm_id=d["arm_id"],
            role=d["role"],
            visit_days_per_cycle=tuple(d["visit_days_per_cycle"]),
            label=d.get("label", ""),
        )


@dataclass(frozen=True)
class ScheduleSpec:
    """Full parametric description of one synthetic trial schedule."""

    schedule_id: str
    disease_category: str
    complexity: Complexity
    cycle_length_days: int
    treatment_duration_months: int
    arms: tuple[ArmSpec, ...]
    screening_days: tuple[int, ...] = (-14, -7)
    imaging_interval_days: int = 63
    eot_offset_days: int = 30
    followup_months: tuple[int, ...] = (9, 12)
    style_id: int = 1
    modality: str = "systemic"

    def __post_init__(self):
        object.__setattr__(self, "complexity", Complexity(self.complexity))
        object.__setattr__(self, "arms", tuple(self.arms))
        object.__setattr__(self, "screening_days", tuple(sorted(set(self.screening_days))))
        object.__setattr__(self, "followup_months", tuple(sorted(set(self.followup_months))))
        self._validate()

    def _validate(self):
        sid = self.schedule_id
        if self.disease_category not in DISEASE_CATEGORIES:
            raise InvalidSpecError(f"{sid}: unknown disease category {self.disease_category!r}")
        if self.cycle_length_days not in CYCLE_LENGTHS:
            raise InvalidSpecError(f"{sid}: cycle length {self.cycle_length_days} not in {CYCLE_LENGTHS}")
        lo, hi = DURATION_RANGE
        if not lo <= self.treatment_duration_months <= hi:
            raise InvalidSpecError(f"{sid}: duration {self.treatment_duration_months} outside [{lo}, {hi}] months")
        if len(self.arms) != 2 or {a.role for a in self.arms} != {Role.INTERVENTION, Role.CONTROL}:
            raise InvalidSpecError(f"{sid}: need exactly one intervention and one control arm")
        if len({a.arm_id for a in self.arms}) != len(self.arms):
            raise InvalidSpecError(f"{sid}: duplicate arm ids")
        for arm in self.arms:
            bad = [d for d in arm.visit_days_per_cycle if not 1 <= d <= self.cycle_length_days]
            if bad:
                raise InvalidSpecError(
                    f"{sid}: arm {arm.arm_id!r} offsets {bad} outside cycle of {self.cycle_length_days} days"
                )
            if len(arm.visit_days_per_cycle) != self.complexity.visit_days:
                raise InvalidSpecError(
                    f"{sid}: arm {arm.arm_id!r} has {len(arm.visit_days_per_cycle)} visit days, "
                    f"{self.complexity.value} needs {self.complexity.visit_days}"
                )
        if any(d > 0 for d in self.screening_days):
            raise InvalidSpecError(f"{sid}: screening days must be <= 0")
        if self.imaging_interval_days < 1:
            raise InvalidSpecError(f"{sid}: imaging interval must be positive")
        if self.eot_offset_days < 1:
            raise InvalidSpecError(f"{sid}: EOT offset must be positive")
        if any(m < 1 for m in self.followup_months):
            raise InvalidSpecError(f"{sid}: follow-up months must be positive")
        lo, hi = STYLE_RANGE
        if not lo <= self.style_id <= hi:
            raise InvalidSpecError(f"{sid}: style_id {self.style_id} outside [{lo}, {hi}]")
        if self.modality not in MODALITIES:
            raise InvalidSpecError(f"{sid}: unknown modality {self.modality!r}")

    @property
    def total_cycles(self) -> int:
        return total_cycles(self.treatment_duration_months, self.cycle_length_days)

    def arm(self, arm_id: str) -> ArmSpec:
        for a in self.arms:
            if a.arm_id == arm_id:
                return a
        raise KeyError(arm_id)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "schedule_id": self.schedule_id,
            "disease_category": self.disease_category,
            "complexity": self.complexity.value,
            "cycle_length_days": self.cycle_length_days,
            "treatment_duration_months": self.treatment_duration_months,
            "arms": [a.to_dict() for a in self.arms],
            "screening_days": list(self.screening_days),
            "imaging_interval_days": self.imaging_interval_days,
            "eot_offset_days": self.eot_offset_days,
            "followup_months": list(self.followup_months),
            "style_id": self.style_id,
            "modality": self.modality,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScheduleSpec":
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise InvalidSpecError(f"unsupported spec schema_version {version}")
        return cls(
            schedule_id=d["schedule_id"],
            disease_category=d["disease_category"],
            complexity=d["complexity"],
            cycle_length_days=int(d["cycle_length_days"]),
            treatment_duration_months=int(d["treatment_duration_months"]),
            arms=tuple(ArmSpec.from_dict(a) for a in d["arms"]),
            screening_days=tuple(d.get("screening_days", (-14, -7))),
            imaging_interval_days=int(d.get("imaging_interval_days", 63)),
            eot_offset_days=int(d.get("eot_offset_days", 30)),
            followup_months=tuple(d.get("followup_months", (9, 12))),
            style_id=int(d.get("style_id", 1)),
            modality=d.get("modality", "systemic"),
        )


@dataclass(frozen=True)
class ContactCalendar:
    arm_id: str
    entries: Mapping[int, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        frozen = {int(day): frozenset(Category(c) for c in cats) for day, cats in sorted(self.entries.items())}
        object.__setattr__(self, "entries", MappingProxyType(frozen))

    @property
    def days(self) -> list[int]:
        return sorted(self.entries)

    def with_tags(self, day: int, tags: Iterable) -> "ContactCalendar":
        """Copy with ``tags`` merged into ``day``."""
        merged = dict(self.entries)
        merged[day] = merged.get(day, frozenset()) | frozenset(tags)
        return ContactCalendar(self.arm_id, merged)


@dataclass(frozen=True)
class GroundTruth:
    arm_id: str
    counts: Mapping[Window, int]
    category_counts: Mapping[tuple, int]

    def to_dict(self) -> dict:
        return {
            "counts": {w.value: int(self.counts[w]) for w in WINDOWS},
            "category_counts": {
                w.value: {c.value: int(self.category_counts[(w, c)]) for c in CATEGORIES} for w in WINDOWS
            },
        }

    @classmethod
    def from_dict(cls, arm_id: str, d: Mapping) -> "GroundTruth":
        counts = {w: int(d["counts"][w.value]) for w in WINDOWS}
        cats = {(w, c): int(d["category_counts"][w.value][c.value]) for w in WINDOWS for c in CATEGORIES}
        return cls(arm_id, counts, cats)


def treatment_days(spec: ScheduleSpec, arm: ArmSpec) -> list[int]:
    """Absolute treatment visit days for one arm, cycle by cycle."""
    return _treatment_days(spec.cycle_length_days, spec.total_cycles, arm.visit_days_per_cycle)


def _treatment_days(cycle_length: int, n_cycles: int, offsets) -> list[int]:
    if any(d > cycle_length or d < 1 for d in offsets):
        raise InvalidSpecError(f"visit offsets {sorted(offsets)} exceed cycle length {cycle_length}")
    return [(c - 1) * cycle_length + d for c in range(1, n_cycles + 1) for d in sorted(offsets)]


def last_treatment_day(spec: ScheduleSpec, arm: ArmSpec) -> int:
    days = treatment_days(spec, arm)
    return max(days) if days else 0


def imaging_days(spec: ScheduleSpec, arm: ArmSpec) -> list[int]:
    return list(range(spec.imaging_interval_days, last_treatment_day(spec, arm) + 1, spec.imaging_interval_days))


def eot_day(spec: ScheduleSpec, arm: ArmSpec) -> int:
    return last_treatment_day(spec, arm) + spec.eot_offset_days


def followup_days(spec: ScheduleSpec) -> list[int]:
    return [m * DAYS_PER_MONTH for m in spec.followup_months]


def build_calendar(
    arm_id: str,
    *,
    cycle_length_days: int,
    duration_months: int,
    visit_days_per_cycle,
    screening_days=(),
    imaging_interval_days: int | None = None,
    eot_offset_days: int | None = None,
    followup_months=(),
) -> ContactCalendar:
    """Calendar from raw schedule parameters.

    ``None`` for the imaging interval or EOT offset leaves that source out.
    Days hit by several sources keep one entry holding the union of tags.
    """
    entries: dict[int, set] = {}

    def tag(day, tags):
        entries.setdefault(day, set()).update(tags)

    days = _treatment_days(cycle_length_days, total_cycles(duration_months, cycle_length_days), visit_days_per_cycle)
    last = max(days) if days else 0
    for day in days:
        tag(day, TREATMENT_TAGS)
    if imaging_interval_days:
        for day in range(imaging_interval_days, last + 1, imaging_interval_days):
            tag(day, IMAGING_TAGS)
    if eot_offset_days:
        tag(last + eot_offset_days, EOT_TAGS)
    for m in followup_months:
        tag(m * DAYS_PER_MONTH, FOLLOWUP_TAGS)
    for day in screening_days:
        if day > 0:
            raise InvalidSpecError(f"screening day {day} must be <= 0")
        tag(day, SCREENING_TAGS)
    return ContactCalendar(arm_id, entries)


def expand_arm_calendar(spec: ScheduleSpec, arm: ArmSpec) -> ContactCalendar:
    """Map one arm's cycle-based schedule onto absolute calendar days."""
    if arm not in spec.arms:
        raise InvalidSpecError(f"arm {arm.arm_id!r} does not belong to {spec.schedule_id}")
    return build_calendar(
        arm.arm_id,
        cycle_length_days=spec.cycle_length_days,
        duration_months=spec.treatment_duration_months,
        visit_days_per_cycle=arm.visit_days_per_cycle,
        screening_days=spec.screening_days,
        imaging_interval_days=spec.imaging_interval_days,
        eot_offset_days=spec.eot_offset_days,
        followup_months=spec.followup_months,
    )


def count_contact_days(calendar: ContactCalendar) -> GroundTruth:
    counts = {w: 0 for w in WINDOWS}
    cats = {(w, c): 0 for w in WINDOWS for c in CATEGORIES}
    for day, tags in calendar.entries.items():
        for w in WINDOWS:
            if w.contains(day):
                counts[w] += 1
                for c in tags:
                    cats[(w, c)] += 1
    return GroundTruth(calendar.arm_id, counts, cats)


def ground_truth(spec: ScheduleSpec) -> dict[str, GroundTruth]:
    """Ground truth for every arm of ``spec`` keyed by arm id."""
    return {arm.arm_id: count_contact_days(expand_arm_calendar(spec, arm)) for arm in spec.arms}


def truth_document(spec: ScheduleSpec) -> dict:
    truths = ground_truth(spec)
    return {
        "schema_version": SCHEMA_VERSION,
        "schedule_id": spec.schedule_id,
        "complexity": spec.complexity.value,
        "arms": {
            arm.arm_id: {"role": arm.role.value, "label": arm.label, **truths[arm.arm_id].to_dict()}
            for arm in spec.arms
        },
    }
