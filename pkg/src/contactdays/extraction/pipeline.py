from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

from .. import _io
from ..errors import ConfigError
from .backends import Backend, BackendRequest, make_backend
from .models import ARCHITECTURES, BackendConfig, Document, RunResult
from .parsing import parse_extraction_output, parse_structure_output
from .prompts import build_count_prompt, build_structure_prompt, build_vanilla_prompt


@dataclass
class ExtractionRequest:
    document: Document
    protocol_id: str
    config: BackendConfig
    architecture: str = "vanilla"
    run_index: int = 0
    experiment: str | None = None
    log_dir: Path | None = None


def protocol_id_for(path) -> str:
    """Protocol id of a document: the schedule directory name for suite files, else the file stem."""
    path = Path(path)
    return path.parent.name if path.name == "schedule.html" else path.stem


def extract(request: ExtractionRequest, backend: Backend | None = None) -> RunResult:
    """Run one extraction and return the validated result.

    ``two_stage`` makes two sequential backend calls: structure, then
    counting with the parsed structure embedded in the prompt. When
    ``log_dir`` is set the stage artifacts are written there.
    """
    if request.architecture not in ARCHITECTURES:
        raise ConfigError(f"architecture must be one of {ARCHITECTURES}")
    backend = backend or make_backend(request.config)
    doc = request.document
    started = time.monotonic()
    attempts, raw_outputs, hashes = [], {}, {}
    structure = None

    def call(prompt, stage, **extra):
        hashes[prompt.template] = prompt.template_hash
        completion = backend.generate(
            BackendRequest(
                prompt=prompt,
                document=doc,
                protocol_id=request.protocol_id,
                stage=stage,
                run_index=request.run_index,
                log_dir=request.log_dir,
                **extra,
            )
        )
        attempts.extend({"stage": stage, **a} for a in completion.attempts)
        raw_outputs[stage] = completion.text
        return completion.text

    if request.architecture == "vanilla":
        arms = parse_extraction_output(call(build_vanilla_prompt(doc), "vanilla"))
    else:
        structure = parse_structure_output(call(build_structure_prompt(doc), "structure", json_mode=True))
        if request.log_dir is not None:
            _io.write_json(Path(request.log_dir) / "structure.json", structure.to_dict())
        count_prompt = build_count_prompt(structure, doc)
        arms = parse_extraction_output(call(count_prompt, "count", structure=structure))
        if request.log_dir is not None:
            _io.write_json(Path(request.log_dir) / "counts.json", [a.to_dict() for a in arms])

    return RunResult(
        protocol_id=request.protocol_id,
        run_index=request.run_index,
        arms=arms,
        architecture=request.architecture,
        backend=backend.metadata(),
        prompt_hashes=hashes,
        wall_time=time.monotonic() - started,
        attempts=attempts,
        raw_outputs=raw_outputs,
        structure=None if structure is None else structure.to_dict(),
        experiment=request.experiment,
    )
