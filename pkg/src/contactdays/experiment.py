"""Experiment layout, manifest and resumable multi-run extraction.

Layout under ``<experiments_dir>/<name>/``::

    manifest.json
    runs/<protocol_id>/run<k>/result.json   (+ stage artifacts, request logs)
    consensus/
    reports/

Every file is written atomically, so an interrupted extraction leaves only
complete ``result.json`` files behind and a rerun picks up the rest.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import _io
from .config import PipelineConfig
from .errors import ContactDaysError, PipelineError
from .extraction import Document, ExtractionRequest, RunResult, extract, protocol_id_for, template_hashes

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RESULT = "result.json"


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run_dir(exp_dir, protocol_id: str, run_index: int) -> Path:
    return Path(exp_dir) / "runs" / protocol_id / f"run{run_index}"


def discover_documents(config: PipelineConfig) -> list[Path]:
    """Suite schedules, or every html/pdf file of ``input_dir`` when set."""
    if config.input_dir:
        root = Path(config.input_dir)
        docs = sorted(p for p in root.iterdir() if p.suffix.lower() in (".html", ".htm", ".pdf"))
    else:
        docs = sorted(Path(config.suite_dir).glob("*/schedule.html"))
    if not docs:
        raise PipelineError(f"no documents found in {config.input_dir or config.suite_dir}")
    return docs


def load_result(path) -> RunResult | None:
    try:
        return RunResult.from_dict(_io.read_json(path))
    except (OSError, ValueError, KeyError, TypeError):
        return None


def load_runs(exp_dir) -> list[RunResult]:
    exp_dir = Path(exp_dir)
    if not (exp_dir / "runs").is_dir():
        raise PipelineError(f"experiment not found: {exp_dir}")
    runs = []
    for path in sorted((exp_dir / "runs").glob(f"*/run*/{RESULT}")):
        run = load_result(path)
        if run is None:
            log.warning("skipping unreadable run file %s", path)
        else:
            runs.append(run)
    return sorted(runs, key=lambda r: (r.protocol_id, r.run_index))


class Manifest:
    """Thread-safe view of ``manifest.json``."""

    def __init__(self, path: Path, data: dict):
        self.path = path
        self.data = data
        self._lock = threading.Lock()

    @classmethod
    def open(cls, exp_dir, config: PipelineConfig) -> "Manifest":
        path = Path(exp_dir) / MANIFEST
        if path.exists():
            data = _io.read_json(path)
        else:
            data = {"schema_version": 1, "experiment": config.experiment, "created": _now(), "protocols": {}}
        data["config_hash"] = config.snapshot_hash()
        data["config"] = config.to_dict()
        data["prompt_template_hashes"] = template_hashes()
        return cls(path, data)

    def set_status(self, protocol_id, run_index, **entry):
        with self._lock:
            runs = self.data["protocols"].setdefault(protocol_id, {"runs": {}})["runs"]
            runs[str(run_index)] = {**entry, "updated": _now()}
            self.save_locked()

    def save_locked(self):
        self.data["updated"] = _now()
        _io.write_json(self.path, self.data)

    def save(self):
        with self._lock:
            self.save_locked()


def run_extraction(config: PipelineConfig, backend, documents=None) -> dict:
    """Extract ``runs_per_protocol`` runs for every document, skipping finished ones.

    Per-protocol failures are recorded in the manifest and do not stop the
    other protocols. Returns counts of executed, skipped and failed runs.
    """
    config.validate()
    exp_dir = config.experiment_dir
    documents = documents if documents is not None else discover_documents(config)
    manifest = Manifest.open(exp_dir, config)

    todo = []
    skipped = 0
    for path in sorted(documents, key=protocol_id_for):
        pid = protocol_id_for(path)
        for k in range(config.runs_per_protocol):
            result_path = run_dir(exp_dir, pid, k) / RESULT
            if result_path.exists() and load_result(result_path) is not None:
                manifest.set_status(pid, k, status="done", path=str(result_path.relative_to(exp_dir)))
                skipped += 1
            else:
                todo.append((path, pid, k))
    manifest.save()

    def work(item):
        path, pid, k = item
        rdir = run_dir(exp_dir, pid, k)
        try:
            result = extract(
                ExtractionRequest(
                    document=Document.load(path),
                    protocol_id=pid,
                    config=config.backend,
                    architecture=config.architecture,
                    run_index=k,
                    experiment=config.experiment,
                    log_dir=rdir,
                ),
                backend,
            )
            _io.write_json(rdir / RESULT, result.to_dict())
        except (ContactDaysError, OSError) as exc:
            log.error("%s run %d failed: %s", pid, k, exc)
            entry = {"status": "failed", "error": str(exc)}
            raw = getattr(exc, "raw", None)
            if raw is not None:
                _io.atomic_write_text(rdir / "failed_output.txt", raw)
            attempts = getattr(exc, "attempts", None)
            if attempts:
                entry["attempts"] = attempts
            manifest.set_status(pid, k, **entry)
            return False
        manifest.set_status(
            pid, k, status="done", path=str((rdir / RESULT).relative_to(exp_dir)), wall_time=round(result.wall_time, 3)
        )
        return True

    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        outcomes = list(pool.map(work, todo))
    return {
        "executed": sum(outcomes),
        "failed": len(outcomes) - sum(outcomes),
        "skipped": skipped,
        "total": skipped + len(outcomes),
    }


def manifest_summary(exp_dir) -> dict:
    data = json.loads((Path(exp_dir) / MANIFEST).read_text())
    statuses = [r["status"] for p in data["protocols"].values() for r in p["runs"].values()]
    return {s: statuses.count(s) for s in sorted(set(statuses))}
