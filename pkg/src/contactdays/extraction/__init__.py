from .backends import (
    Backend,
    BackendRequest,
    Completion,
    OracleBackend,
    PerturbedBackend,
    RemoteBackend,
    make_backend,
    spec_payload,
    spec_structure,
    structure_payload,
)
from .models import (
    SUMMARY_STAGE,
    ArmExtraction,
    BackendConfig,
    Document,
    NormalizedType,
    RunResult,
    StructureArm,
    StructureExtraction,
    normalize_intervention_type,
)
from .parsing import load_json_payload, parse_extraction_output, parse_structure_output
from .pipeline import ExtractionRequest, extract, protocol_id_for
from .prompts import (
    Prompt,
    build_count_prompt,
    build_structure_prompt,
    build_vanilla_prompt,
    structure_from_count_prompt,
    template_hashes,
)

__all__ = [name for name in dir() if not name.startswith("_")]
