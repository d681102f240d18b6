"""Strict parsing of backend output into validated records."""

from __future__ import annotations

import json
import re

from ..errors import ParseError, StructureError
from ..schedule import TREATMENT_WINDOWS, WINDOWS
from .models import ArmExtraction, StructureExtraction, normalize_intervention_type

_FENCE = re.compile(r"```(?:json|JSON)?\s*\n?(.*?)```", re.S)
_TRAILING_COMMA = re.compile(r",\s*([\]}])")


def _candidates(raw: str):
    text = raw.strip()
    yield text
    m = _FENCE.search(text)
    if m:
        yield m.group(1).strip()
    # outermost JSON-looking span
    starts = [i for i in (text.find("["), text.find("{")) if i >= 0]
    if starts:
        start = min(starts)
        end = max(text.rfind("]"), text.rfind("}"))
        if end > start:
            yield text[start : end + 1]


def load_json_payload(raw: str):
    """Decode JSON from model text, tolerating fences, prose and trailing commas."""
    if raw is None or not str(raw).strip():
        raise ParseError("empty model output", raw=raw)
    for candidate in _candidates(raw):
        for attempt in (candidate, _TRAILING_COMMA.sub(r"\1", candidate)):
            try:
                return json.loads(attempt)
            except json.JSONDecodeError:
                continue
    raise ParseError("model output is not valid JSON after repair attempts", raw=raw)


def _as_count(value, where, raw):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"non-integer count for {where}: {value!r}", raw=raw)
    if isinstance(value, float) and not value.is_integer():
        raise ParseError(f"non-integer count for {where}: {value!r}", raw=raw)
    if value < 0:
        raise ParseError(f"negative count for {where}: {value!r}", raw=raw)
    return int(value)


def _parse_arm(obj, index, raw) -> ArmExtraction:
    if not isinstance(obj, dict):
        raise ParseError(f"arm {index} is not an object", raw=raw)
    days = obj.get("healthcare_contact_days", obj.get("contact_days"))
    if not isinstance(days, dict):
        raise ParseError(f"arm {index} has no healthcare_contact_days object", raw=raw)
    counts = {}
    for w in WINDOWS:
        if w.key in days:
            value = days[w.key]
        elif w.value in days:
            value = days[w.value]
        else:
            raise ParseError(f"missing window: {w.key}", raw=raw)
        counts[w] = _as_count(value, f"arm {index} {w.key}", raw)

    breakdown = obj.get("category_breakdown") or {}
    if not isinstance(breakdown, dict):
        raise ParseError(f"arm {index} category_breakdown is not an object", raw=raw)
    breakdown = {k: _as_count(v, f"arm {index} category {k}", raw) for k, v in breakdown.items()}

    flags = []
    treatment = [counts[w] for w in TREATMENT_WINDOWS]
    if any(a > b for a, b in zip(treatment, treatment[1:])):
        flags.append("non_monotone_windows")
    if counts[WINDOWS[-1]] > 365:
        flags.append("exceeds_365_days")
    raw_type = obj.get("intervention_type", "")
    if normalize_intervention_type(raw_type).warning:
        flags.append("unknown_intervention_type")
    notes = obj.get("extraction_notes") or {}
    return ArmExtraction(
        arm_name=str(obj.get("arm_name") or f"arm {index}"),
        intervention_type_raw=str(raw_type),
        contact_days=counts,
        category_breakdown=breakdown,
        notes=notes if isinstance(notes, dict) else {"text": str(notes)},
        flags=tuple(flags),
    )


def parse_extraction_output(raw: str) -> list[ArmExtraction]:
    """Validated arm records from raw model text.

    Window monotonicity is not enforced; violations become the
    ``non_monotone_windows`` flag on the arm.
    """
    payload = load_json_payload(raw)
    if isinstance(payload, dict):
        payload = payload.get("arms", [payload])
    if not isinstance(payload, list) or not payload:
        raise ParseError("expected a nonempty list of arms", raw=raw)
    return [_parse_arm(obj, i, raw) for i, obj in enumerate(payload)]


def parse_structure_output(raw: str) -> StructureExtraction:
    payload = load_json_payload(raw)
    try:
        return StructureExtraction.from_dict(payload)
    except StructureError as exc:
        raise ParseError(str(exc), raw=raw) from exc
