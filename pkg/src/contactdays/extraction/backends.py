"""Extraction backends.

All backends answer a :class:`BackendRequest` with raw model-style text so the
same parsing and validation path runs regardless of where the text came from.

``remote``
    Generative-model HTTP endpoint with retry and exponential backoff.
``oracle``
    Answers from the schedule spec; its counts are the ground truth.
``perturbed``
    Oracle output with seeded count jitter and/or arm-name mangling.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import httpx

from .. import _io
from ..errors import ConfigError, PipelineError, StructureError, TransportError
from ..schedule import (
    CATEGORIES,
    WINDOWS,
    Role,
    ScheduleSpec,
    Window,
    build_calendar,
    count_contact_days,
    ground_truth,
)
from .models import BackendConfig, Document, StructureArm, StructureExtraction, normalize_intervention_type
from .parsing import load_json_payload
from .prompts import Prompt

log = logging.getLogger(__name__)

RETRYABLE_STATUS = {408, 429, 500, 502, 503, 504}


@dataclass
class BackendRequest:
    prompt: Prompt
    document: Document
    protocol_id: str
    stage: str = "vanilla"  # vanilla | structure | count
    run_index: int = 0
    structure: StructureExtraction | None = None
    json_mode: bool = False
    log_dir: Path | None = None


@dataclass
class Completion:
    text: str
    attempts: list = field(default_factory=list)


def _arm_name(spec_arm) -> str:
    return f"Arm {spec_arm.arm_id}: {spec_arm.label}" if spec_arm.label else f"Arm {spec_arm.arm_id}"


def _arm_payload(name, itype, truth, notes) -> dict:
    return {
        "arm_name": name,
        "intervention_type": itype,
        "healthcare_contact_days": {w.key: truth.counts[w] for w in WINDOWS},
        "category_breakdown": {c.value: truth.category_counts[(Window.M12, c)] for c in CATEGORIES},
        "extraction_notes": notes,
    }


def spec_payload(spec: ScheduleSpec) -> list[dict]:
    """Vanilla-stage answer derived directly from ``spec``."""
    truths = ground_truth(spec)
    return [
        _arm_payload(
            _arm_name(arm),
            arm.role.value,
            truths[arm.arm_id],
            {
                "cycle_length": f"{spec.cycle_length_days} days",
                "treatment_duration": f"{spec.treatment_duration_months} months",
                "visit_pattern": "Days " + ", ".join(map(str, arm.visit_days_per_cycle)) + " of each cycle",
                "disease": spec.disease_category,
            },
        )
        for arm in spec.arms
    ]


def spec_structure(spec: ScheduleSpec) -> StructureExtraction:
    return StructureExtraction(
        cycle_length_days=spec.cycle_length_days,
        treatment_duration_months=spec.treatment_duration_months,
        arms=tuple(StructureArm(_arm_name(a), a.role.value, a.visit_days_per_cycle) for a in spec.arms),
        screening_days=spec.screening_days,
        eot_offset_days=spec.eot_offset_days,
        followup_months=spec.followup_months,
        imaging_interval_days=spec.imaging_interval_days,
        disease_type=spec.disease_category,
    )


def structure_payload(structure: StructureExtraction) -> list[dict]:
    """Counting-stage answer computed from a stage-one structure.

    Unknown optional sources (imaging, EOT, follow-up, screening) are left
    out; unknown cycle length, duration or visit days make counting impossible.
    """
    if structure.cycle_length_days is None or structure.treatment_duration_months is None:
        raise StructureError("cycle length and treatment duration are required to count")
    out = []
    for i, arm in enumerate(structure.arms):
        if not arm.visit_days_per_cycle:
            raise StructureError(f"arm {i} has no visit days")
        cal = build_calendar(
            arm.arm_name or f"arm {i}",
            cycle_length_days=structure.cycle_length_days,
            duration_months=structure.treatment_duration_months,
            visit_days_per_cycle=arm.visit_days_per_cycle,
            screening_days=structure.screening_days or (),
            imaging_interval_days=structure.imaging_interval_days,
            eot_offset_days=structure.eot_offset_days,
            followup_months=structure.followup_months or (),
        )
        out.append(
            _arm_payload(
                arm.arm_name or f"arm {i}",
                arm.intervention_type or "",
                count_contact_days(cal),
                {
                    "cycle_length": f"{structure.cycle_length_days} days",
                    "treatment_duration": f"{structure.treatment_duration_months} months",
                    "visit_pattern": "Days " + ", ".join(map(str, arm.visit_days_per_cycle)) + " of each cycle",
                    "disease": structure.disease_type or "",
                },
            )
        )
    return out


class Backend:
    kind = "base"

    def __init__(self, config: BackendConfig | None = None):
        self.config = config or BackendConfig(backend_kind=self.kind)

    def generate(self, request: BackendRequest) -> Completion:
        raise NotImplementedError

    def metadata(self) -> dict:
        return {"kind": self.kind, "model_id": self.config.model_id, "temperature": self.config.temperature}


class OracleBackend(Backend):
    """Answers from the generating spec.

    ``specs`` maps protocol id to spec; when a protocol is absent the spec is
    read from ``spec.json`` beside the document.
    """

    kind = "oracle"

    def __init__(self, specs: Mapping[str, ScheduleSpec] | None = None, config: BackendConfig | None = None):
        super().__init__(config)
        self.specs = dict(specs or {})

    def spec_for(self, request: BackendRequest) -> ScheduleSpec:
        if request.protocol_id in self.specs:
            return self.specs[request.protocol_id]
        if request.document.path is not None:
            path = Path(request.document.path).with_name("spec.json")
            if path.exists():
                return ScheduleSpec.from_dict(_io.read_json(path))
        raise PipelineError("no schedule spec available for oracle backend", protocol_id=request.protocol_id)

    def payload(self, request: BackendRequest):
        if request.stage == "count":
            if request.structure is None:
                raise StructureError("counting stage needs a structure")
            return structure_payload(request.structure)
        spec = self.spec_for(request)
        if request.stage == "structure":
            return spec_structure(spec).to_dict()
        return spec_payload(spec)

    def generate(self, request: BackendRequest) -> Completion:
        text = json.dumps(self.payload(request), indent=2)
        return Completion(text, [{"attempt": 1, "ok": True}])


_NAME_TEMPLATES = (
    "{label} Arm",
    "Treatment Arm {arm_id}: {label}",
    "ARM {arm_id} ({label})",
    "{label}",
    "Cohort {arm_id} - {label_lower}",
)
_TYPE_SPELLINGS = {
    Role.INTERVENTION: ("intervention", "experimental", "active_comparator", "EXPERIMENTAL", "Intervention"),
    Role.CONTROL: ("control", "placebo", "standard_of_care", "Control", "PLACEBO"),
}


class PerturbedBackend(OracleBackend):
    """Oracle answers with seeded noise.

    ``noise`` jitters each window count uniformly in ``[-noise, noise]``
    (clamped at zero). ``mangle_names`` rewrites arm names, respells the
    intervention type and shuffles arm order without touching any count.
    The random stream depends only on (seed, protocol, run, stage).
    """

    kind = "perturbed"

    def _rng(self, request):
        return random.Random(f"{self.config.seed}:{request.protocol_id}:{request.run_index}:{request.stage}")

    def _mangle(self, arms, rng):
        for arm in arms:
            name = arm["arm_name"]
            arm_id, _, label = name.partition(": ")
            arm_id = arm_id.replace("Arm ", "").strip() or "?"
            label = label or name
            arm["arm_name"] = rng.choice(_NAME_TEMPLATES).format(arm_id=arm_id, label=label, label_lower=label.lower())
            role = normalize_intervention_type(arm["intervention_type"]).role
            arm["intervention_type"] = rng.choice(_TYPE_SPELLINGS[role])
        rng.shuffle(arms)

    def generate(self, request: BackendRequest) -> Completion:
        payload = self.payload(request)
        rng = self._rng(request)
        if request.stage == "structure":
            if self.config.mangle_names:
                for arm in payload["arms"]:
                    arm["arm_name"] = rng.choice(_NAME_TEMPLATES).format(
                        arm_id="?", label=arm["arm_name"], label_lower=arm["arm_name"].lower()
                    )
        else:
            if self.config.noise:
                for arm in payload:
                    days = arm["healthcare_contact_days"]
                    for key in list(days):
                        days[key] = max(0, days[key] + rng.randint(-self.config.noise, self.config.noise))
            if self.config.mangle_names:
                self._mangle(payload, rng)
        return Completion(json.dumps(payload, indent=2), [{"attempt": 1, "ok": True}])


class RemoteBackend(Backend):
    """Generative-model endpoint speaking the ``generateContent`` JSON protocol.

    The document travels as an inline part next to the prompt text. The API
    key is read from the environment variable named in the config and sent
    as a header, so it never appears in logged bodies.
    """

    kind = "remote"

    def __init__(
        self,
        config: BackendConfig | None = None,
        *,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
        api_key: str | None = None,
    ):
        super().__init__(config)
        self.api_key = api_key if api_key is not None else os.environ.get(self.config.api_key_env)
        if not self.api_key:
            raise ConfigError(f"remote backend needs an API key in environment variable {self.config.api_key_env}")
        self.client = client or httpx.Client(timeout=self.config.timeout)
        self.sleep = sleep
        self._slots = threading.BoundedSemaphore(self.config.max_concurrency)

    def url(self) -> str:
        return self.config.endpoint.format(model=self.config.model_id)

    def body(self, request: BackendRequest) -> dict:
        doc = request.document
        gen = {"temperature": self.config.temperature}
        if self.config.top_p is not None:
            gen["topP"] = self.config.top_p
        if request.json_mode or self.config.force_structured_output:
            gen["responseMimeType"] = "application/json"
        return {
            "contents": [
                {
                    "role": "user",
                    "parts": [
                        {"inline_data": {"mime_type": doc.mime_type, "data": base64.b64encode(doc.data).decode("ascii")}},
                        {"text": request.prompt.text},
                    ],
                }
            ],
            "generationConfig": gen,
        }

    @staticmethod
    def response_text(data: dict) -> str:
        try:
            parts = data["candidates"][0]["content"]["parts"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ValueError(f"unexpected response shape: {exc!r}") from exc
        return "".join(p.get("text", "") for p in parts)

    def _log(self, request, name, obj):
        if request.log_dir is None:
            return
        _io.write_json(Path(request.log_dir) / f"{request.stage}.{name}.json", obj)

    def _redacted(self, body):
        redacted = json.loads(json.dumps(body))
        for part in redacted["contents"][0]["parts"]:
            if "inline_data" in part:
                part["inline_data"]["data"] = f"<{len(part['inline_data']['data'])} base64 chars omitted>"
        return {"url": self.url(), "headers": {"x-goog-api-key": "<redacted>"}, "body": redacted}

    def generate(self, request: BackendRequest) -> Completion:
        body = self.body(request)
        self._log(request, "request", self._redacted(body))
        attempts = []
        n_attempts = 1 + self.config.max_retries
        for attempt in range(1, n_attempts + 1):
            started = time.monotonic()
            entry = {"attempt": attempt}
            try:
                with self._slots:
                    resp = self.client.post(
                        self.url(),
                        json=body,
                        headers={"x-goog-api-key": self.api_key, "content-type": "application/json"},
                    )
                entry["status"] = resp.status_code
                if resp.status_code in RETRYABLE_STATUS:
                    raise _Transient(f"HTTP {resp.status_code}")
                if resp.status_code >= 400:
                    entry.update(ok=False, error=f"HTTP {resp.status_code}: {resp.text[:500]}")
                    attempts.append(entry)
                    raise TransportError(
                        f"non-retryable HTTP {resp.status_code}", attempts, protocol_id=request.protocol_id
                    )
                data = resp.json()
                self._log(request, "response", data)
                text = self.response_text(data)
            except (httpx.TransportError, _Transient, ValueError) as exc:
                entry.update(ok=False, error=str(exc) or type(exc).__name__, elapsed=time.monotonic() - started)
                attempts.append(entry)
                if attempt == n_attempts:
                    break
                delay = self.config.backoff_base * 2 ** (attempt - 1)
                entry["backoff"] = delay
                log.warning("%s attempt %d failed (%s); retrying in %.1fs", request.protocol_id, attempt, exc, delay)
                self.sleep(delay)
                continue
            entry.update(ok=True, elapsed=time.monotonic() - started)
            attempts.append(entry)
            return Completion(text, attempts)
        raise TransportError(
            f"remote backend failed after {len(attempts)} attempts", attempts, protocol_id=request.protocol_id
        )


class _Transient(Exception):
    pass


def make_backend(config: BackendConfig, specs: Mapping[str, ScheduleSpec] | None = None, **kwargs) -> Backend:
    config.validate()
    if config.backend_kind == "oracle":
        return OracleBackend(specs, config)
    if config.backend_kind == "perturbed":
        return PerturbedBackend(specs, config)
    return RemoteBackend(config, **kwargs)
