"""Versioned prompt templates.

Templates live as text assets next to this module; every built prompt carries
the template's name and sha256 so run results can be traced to exact wording.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from string import Template

from .._io import sha256_text
from ..errors import StructureError
from .models import Document, StructureExtraction

TEMPLATE_VERSION = "1"
TEMPLATE_NAMES = ("vanilla", "structure", "count")

_STRUCTURE_BLOCK = re.compile(r"<<<STRUCTURE\n(.*?)\nSTRUCTURE>>>", re.S)


@dataclass(frozen=True)
class Prompt:
    text: str
    template: str
    template_hash: str


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown template {name!r}")
    return resources.files(__package__).joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")


def template_hash(name: str) -> str:
    return sha256_text(load_template(name))


def template_hashes() -> dict[str, str]:
    return {name: template_hash(name) for name in TEMPLATE_NAMES}


def _check_document(document):
    data = document.data if isinstance(document, Document) else document
    if not data:
        raise ValueError("document is empty")


def build_vanilla_prompt(document) -> Prompt:
    _check_document(document)
    return Prompt(load_template("vanilla"), "vanilla", template_hash("vanilla"))


def build_structure_prompt(document) -> Prompt:
    _check_document(document)
    return Prompt(load_template("structure"), "structure", template_hash("structure"))


def build_count_prompt(structure: StructureExtraction, document) -> Prompt:
    """Counting prompt with the stage-one structure embedded as JSON.

    Fields the first stage could not determine are listed by name so the
    model reads them from the document instead of inventing them.
    """
    _check_document(document)
    if structure is None or structure.is_empty():
        raise StructureError("stage-one structure is empty; refusing to build the counting prompt")
    missing = structure.missing_fields()
    text = Template(load_template("count")).substitute(
        structure_json=json.dumps(structure.to_dict(), indent=2, sort_keys=True),
        unknown_fields=", ".join(f"{m} (UNKNOWN)" for m in missing) if missing else "none",
    )
    return Prompt(text, "count", template_hash("count"))


def structure_from_count_prompt(text: str) -> StructureExtraction:
    """Inverse of the embedding done by :func:`build_count_prompt`."""
    m = _STRUCTURE_BLOCK.search(text)
    if not m:
        raise StructureError("no embedded structure block in prompt")
    return StructureExtraction.from_dict(json.loads(m.group(1)))
