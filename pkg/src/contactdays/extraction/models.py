from __future__ import annotations

import mimetypes
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from ..errors import ConfigError, StructureError
from ..schedule import CATEGORIES, WINDOWS, Role, Window

DEFAULT_MODEL = "gemini-3-flash-preview"
DEFAULT_ENDPOINT = "https://generativelanguage.googleapis.com/v1beta/models/{model}:generateContent"
DEFAULT_API_KEY_ENV = "GEMINI_API_KEY"

# Recorded for provenance only; summary extraction itself is not part of this package.
SUMMARY_STAGE = {
    "model_id": "gemini-2.5-Flash-preview-04-17",
    "temperature": 0.0,
    "top_p": 0.95,
    "response_mime_type": "application/json",
}

BACKEND_KINDS = ("remote", "oracle", "perturbed")
ARCHITECTURES = ("vanilla", "two_stage")


@dataclass
class BackendConfig:
    backend_kind: str = "oracle"
    model_id: str = DEFAULT_MODEL
    temperature: float = 0.1
    top_p: float | None = None
    max_retries: int = 3
    backoff_base: float = 2.0
    force_structured_output: bool = False
    endpoint: str = DEFAULT_ENDPOINT
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 600.0
    max_concurrency: int = 4
    # perturbed backend only
    noise: int = 0
    mangle_names: bool = False
    seed: int = 0

    def validate(self):
        if self.backend_kind not in BACKEND_KINDS:
            raise ConfigError(f"backend_kind must be one of {BACKEND_KINDS}, got {self.backend_kind!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError(f"temperature {self.temperature} out of range")
        if self.top_p is not None and not 0.0 < self.top_p <= 1.0:
            raise ConfigError(f"top_p {self.top_p} out of range")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.backoff_base < 0:
            raise ConfigError("backoff_base must be >= 0")
        if self.max_concurrency < 1:
            raise ConfigError("max_concurrency must be >= 1")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")
        return self

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Document:
    path: Path | None
    data: bytes
    mime_type: str

    @classmethod
    def load(cls, path) -> "Document":
        path = Path(path)
        mime = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        return cls(path, path.read_bytes(), mime)

    @classmethod
    def from_text(cls, text: str, mime_type: str = "text/html") -> "Document":
        return cls(None, text.encode("utf-8"), mime_type)

    @property
    def text(self) -> str:
        return self.data.decode("utf-8", errors="replace")

    @property
    def is_text(self) -> bool:
        return self.mime_type.startswith("text/")


class NormalizedType(NamedTuple):
    role: Role
    warning: str | None = None


_CONTROL_TYPES = {
    "placebo",
    "control",
    "comparator_placebo",
    "placebo_comparator",
    "standard_of_care",
    "sham_comparator",
    "no_intervention",
}
_INTERVENTION_TYPES = {"intervention", "active_comparator", "experimental", "treatment"}


def normalize_intervention_type(raw) -> NormalizedType:
    """Map a free-text intervention type onto intervention/control.

    Unrecognised values fall back to intervention and carry a warning.
    """
    key = "_".join(str(raw or "").strip().lower().replace("-", " ").split())
    if key in _CONTROL_TYPES:
        return NormalizedType(Role.CONTROL)
    if key in _INTERVENTION_TYPES:
        return NormalizedType(Role.INTERVENTION)
    return NormalizedType(Role.INTERVENTION, f"unrecognised intervention type {raw!r}; treated as intervention")


@dataclass(frozen=True)
class ArmExtraction:
    arm_name: str
    intervention_type_raw: str
    contact_days: dict
    category_breakdown: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    flags: tuple = ()

    @property
    def intervention_type(self) -> Role:
        return normalize_intervention_type(self.intervention_type_raw).role

    def count(self, window: Window | str) -> int:
        return self.contact_days[Window(window)]

    def to_dict(self) -> dict:
        return {
            "arm_name": self.arm_name,
            "intervention_type": self.intervention_type_raw,
            "healthcare_contact_days": {w.key: self.contact_days[w] for w in WINDOWS},
            "category_breakdown": dict(self.category_breakdown),
            "extraction_notes": dict(self.notes),
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d) -> "ArmExtraction":
        return cls(
            arm_name=d["arm_name"],
            intervention_type_raw=d["intervention_type"],
            contact_days={w: int(d["healthcare_contact_days"][w.key]) for w in WINDOWS},
            category_breakdown=dict(d.get("category_breakdown", {})),
            notes=dict(d.get("extraction_notes", {})),
            flags=tuple(d.get("flags", ())),
        )


@dataclass(frozen=True)
class StructureArm:
    arm_name: str | None = None
    intervention_type: str | None = None
    visit_days_per_cycle: tuple | None = None

    def to_dict(self):
        return {
            "arm_name": self.arm_name,
            "intervention_type": self.intervention_type,
            "visit_days_per_cycle": None if self.visit_days_per_cycle is None else list(self.visit_days_per_cycle),
        }


@dataclass(frozen=True)
class StructureExtraction:
    """Stage-one blueprint. Every field may be ``None``; gaps are reported, not filled."""

    cycle_length_days: int | None = None
    treatment_duration_months: int | None = None
    arms: tuple = ()
    screening_days: tuple | None = None
    eot_offset_days: int | None = None
    followup_months: tuple | None = None
    imaging_interval_days: int | None = None
    disease_type: str | None = None

    def to_dict(self) -> dict:
        return {
            "cycle_length_days": self.cycle_length_days,
            "treatment_duration_months": self.treatment_duration_months,
            "arms": [a.to_dict() for a in self.arms],
            "special_visits": {
                "screening_days": None if self.screening_days is None else list(self.screening_days),
                "eot_offset_days": self.eot_offset_days,
                "followup_months": None if self.followup_months is None else list(self.followup_months),
                "imaging_interval_days": self.imaging_interval_days,
            },
            "disease_type": self.disease_type,
        }

    @classmethod
    def from_dict(cls, d) -> "StructureExtraction":
        if not isinstance(d, dict):
            raise StructureError(f"structure must be a JSON object, got {type(d).__name__}")
        special = d.get("special_visits") or {}

        def opt_int(v, name):
            if v is None:
                return None
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
                raise StructureError(f"{name} must be an integer, got {v!r}")
            return int(v)

        def opt_ints(v, name):
            if v is None:
                return None
            if not isinstance(v, (list, tuple)):
                raise StructureError(f"{name} must be a list of integers")
            return tuple(opt_int(x, name) for x in v)

        arms = tuple(
            StructureArm(
                arm_name=a.get("arm_name"),
                intervention_type=a.get("intervention_type"),
                visit_days_per_cycle=opt_ints(a.get("visit_days_per_cycle"), "visit_days_per_cycle"),
            )
            for a in d.get("arms") or ()
        )
        return cls(
            cycle_length_days=opt_int(d.get("cycle_length_days"), "cycle_length_days"),
            treatment_duration_months=opt_int(d.get("treatment_duration_months"), "treatment_duration_months"),
            arms=arms,
            screening_days=opt_ints(special.get("screening_days"), "screening_days"),
            eot_offset_days=opt_int(special.get("eot_offset_days"), "eot_offset_days"),
            followup_months=opt_ints(special.get("followup_months"), "followup_months"),
            imaging_interval_days=opt_int(special.get("imaging_interval_days"), "imaging_interval_days"),
            disease_type=d.get("disease_type"),
        )

    def missing_fields(self) -> list[str]:
        missing = [
            name
            for name in (
                "cycle_length_days",
                "treatment_duration_months",
                "screening_days",
                "eot_offset_days",
                "followup_months",
                "imaging_interval_days",
                "disease_type",
            )
            if getattr(self, name) is None
        ]
        if not self.arms:
            missing.append("arms")
        for i, arm in enumerate(self.arms):
            for name in ("arm_name", "intervention_type", "visit_days_per_cycle"):
                if getattr(arm, name) is None:
                    missing.append(f"arms[{i}].{name}")
        return missing

    def is_empty(self) -> bool:
        return self == StructureExtraction()


@dataclass
class RunResult:
    protocol_id: str
    run_index: int
    arms: list
    architecture: str = "vanilla"
    backend: dict = field(default_factory=dict)
    prompt_hashes: dict = field(default_factory=dict)
    wall_time: float = 0.0
    attempts: list = field(default_factory=list)
    raw_outputs: dict = field(default_factory=dict)
    structure: dict | None = None
    experiment: str | None = None
    schema_version: int = 1

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "protocol_id": self.protocol_id,
            "run_index": self.run_index,
            "architecture": self.architecture,
            "backend": self.backend,
            "prompt_hashes": self.prompt_hashes,
            "wall_time": self.wall_time,
            "attempts": self.attempts,
            "arms": [a.to_dict() for a in self.arms],
            "structure": self.structure,
            "raw_outputs": self.raw_outputs,
        }

    @classmethod
    def from_dict(cls, d) -> "RunResult":
        return cls(
            protocol_id=d["protocol_id"],
            run_index=int(d["run_index"]),
            arms=[ArmExtraction.from_dict(a) for a in d["arms"]],
            architecture=d.get("architecture", "vanilla"),
            backend=d.get("backend", {}),
            prompt_hashes=d.get("prompt_hashes", {}),
            wall_time=d.get("wall_time", 0.0),
            attempts=d.get("attempts", []),
            raw_outputs=d.get("raw_outputs", {}),
            structure=d.get("structure"),
            experiment=d.get("experiment"),
            schema_version=d.get("schema_version", 1),
        )


CATEGORY_KEYS = tuple(c.value for c in CATEGORIES)
