import json
from pathlib import Path

import httpx
import pytest

from contactdays.errors import ConfigError, ParseError, StructureError, TransportError
from contactdays.extraction import (
    BackendConfig,
    BackendRequest,
    Document,
    ExtractionRequest,
    OracleBackend,
    PerturbedBackend,
    RemoteBackend,
    StructureExtraction,
    build_count_prompt,
    build_structure_prompt,
    build_vanilla_prompt,
    extract,
    normalize_intervention_type,
    parse_extraction_output,
    parse_structure_output,
    spec_structure,
)
from contactdays.extraction.prompts import load_template, structure_from_count_prompt, template_hash
from contactdays.schedule import WINDOWS, Role, Window, ground_truth
from contactdays.synth import SuiteConfig, generate_suite, render_schedule

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def suite():
    return generate_suite(SuiteConfig(seed=42))


@pytest.fixture(scope="module")
def doc(suite):
    return Document.from_text(render_schedule(suite[0]).document)


def _payload(drop=None):
    counts = {"screening": 2, "1_month": 3, "3_months": 7, "6_months": 12, "9_months": 14, "12_months": 15}
    if drop:
        del counts[drop]
    return [
        {"arm_name": "A", "intervention_type": "intervention", "healthcare_contact_days": counts},
        {"arm_name": "B", "intervention_type": "control", "healthcare_contact_days": dict(counts)},
    ]


# prompts


def test_vanilla_prompt_mentions_all_windows(doc):
    text = build_vanilla_prompt(doc).text
    for w in WINDOWS:
        assert w.key in text
    assert "Expand grouped columns" in text


def test_template_hash_stable():
    assert template_hash("vanilla") == template_hash("vanilla")
    assert len({template_hash(n) for n in ("vanilla", "structure", "count")}) == 3
    assert build_vanilla_prompt(Document.from_text("x")).template_hash == template_hash("vanilla")


def test_empty_document_rejected():
    with pytest.raises(ValueError):
        build_vanilla_prompt(Document.from_text(""))
    with pytest.raises(ValueError):
        build_structure_prompt(Document.from_text(""))


def test_count_prompt_embeds_formula_and_structure(suite, doc):
    structure = StructureExtraction(cycle_length_days=21, treatment_duration_months=6)
    text = build_count_prompt(structure, doc).text
    assert "floor(treatment_duration_months × 30 / cycle_length_days)" in text
    assert "\"cycle_length_days\": 21" in text and "\"treatment_duration_months\": 6" in text
    assert structure_from_count_prompt(text) == structure
    assert "imaging_interval_days (UNKNOWN)" in text


def test_count_prompt_refuses_empty_structure(doc):
    with pytest.raises(StructureError):
        build_count_prompt(StructureExtraction(), doc)


def test_structure_codec_round_trip(suite):
    for spec in suite:
        s = spec_structure(spec)
        assert StructureExtraction.from_dict(json.loads(json.dumps(s.to_dict()))) == s
        assert parse_structure_output(json.dumps(s.to_dict())) == s
        assert s.missing_fields() == []


def test_structure_rejects_non_integer():
    with pytest.raises(StructureError):
        StructureExtraction.from_dict({"cycle_length_days": "21"})


def test_templates_packaged():
    assert "$structure_json" in load_template("count")


# parsing


def test_parse_two_arms():
    arms = parse_extraction_output(json.dumps(_payload()))
    assert len(arms) == 2
    assert arms[0].contact_days[Window.M12] == 15
    assert [a.intervention_type for a in arms] == [Role.INTERVENTION, Role.CONTROL]


def test_parse_fenced_fixture():
    raw = (FIXTURES / "fenced_output.txt").read_text()
    arms = parse_extraction_output(raw)
    assert [a.arm_name for a in arms] == ["Arm A: Pembrolizumab", "Arm B: Placebo"]
    assert arms[1].contact_days[Window.M9] == 11
    fenced = "```json\n" + json.dumps(_payload()) + "\n```"
    assert parse_extraction_output(fenced) == parse_extraction_output(json.dumps(_payload()))


def test_parse_accepts_arms_wrapper():
    assert parse_extraction_output(json.dumps({"arms": _payload()})) == parse_extraction_output(json.dumps(_payload()))


def test_missing_window_is_error():
    with pytest.raises(ParseError, match="missing window: 9_months"):
        parse_extraction_output(json.dumps(_payload(drop="9_months")))


@pytest.mark.parametrize("value", ["12", 12.5, -1, None, True])
def test_bad_counts_rejected(value):
    p = _payload()
    p[0]["healthcare_contact_days"]["12_months"] = value
    with pytest.raises(ParseError):
        parse_extraction_output(json.dumps(p))


def test_integral_float_accepted():
    p = _payload()
    p[0]["healthcare_contact_days"]["12_months"] = 15.0
    assert parse_extraction_output(json.dumps(p))[0].contact_days[Window.M12] == 15


def test_garbage_raises_with_raw():
    with pytest.raises(ParseError) as info:
        parse_extraction_output("I could not find a table.")
    assert info.value.raw == "I could not find a table."


def test_non_monotone_flagged():
    p = _payload()
    p[0]["healthcare_contact_days"]["3_months"] = 20
    arm = parse_extraction_output(json.dumps(p))[0]
    assert "non_monotone_windows" in arm.flags


@pytest.mark.parametrize(
    "raw,role,warn",
    [
        ("placebo", Role.CONTROL, False),
        ("ACTIVE_COMPARATOR", Role.INTERVENTION, False),
        ("Standard of Care", Role.CONTROL, False),
        ("experimental", Role.INTERVENTION, False),
        ("arm b stuff", Role.INTERVENTION, True),
    ],
)
def test_normalize_type(raw, role, warn):
    n = normalize_intervention_type(raw)
    assert n.role is role
    assert bool(n.warning) is warn


# backends


def _request(doc, pid, stage="vanilla", run_index=0):
    return BackendRequest(prompt=build_vanilla_prompt(doc), document=doc, protocol_id=pid, stage=stage, run_index=run_index)


def test_oracle_matches_truth(suite):
    backend = OracleBackend({s.schedule_id: s for s in suite})
    for spec in suite:
        doc = Document.from_text(render_schedule(spec).document)
        for arch in ("vanilla", "two_stage"):
            run = extract(ExtractionRequest(doc, spec.schedule_id, BackendConfig(), arch), backend)
            truth = ground_truth(spec)
            by_role = {a.intervention_type: a for a in run.arms}
            for arm in spec.arms:
                assert by_role[arm.role].contact_days == truth[arm.arm_id].counts


def test_perturbed_zero_noise_is_oracle(suite, doc):
    specs = {s.schedule_id: s for s in suite}
    pid = suite[0].schedule_id
    oracle = OracleBackend(specs).generate(_request(doc, pid))
    perturbed = PerturbedBackend(specs, BackendConfig(backend_kind="perturbed", noise=0)).generate(_request(doc, pid))
    assert perturbed.text == oracle.text


def test_perturbed_is_seeded(suite, doc):
    specs = {s.schedule_id: s for s in suite}
    cfg = BackendConfig(backend_kind="perturbed", noise=3, mangle_names=True, seed=9)
    pid = suite[0].schedule_id
    a = PerturbedBackend(specs, cfg).generate(_request(doc, pid)).text
    b = PerturbedBackend(specs, cfg).generate(_request(doc, pid)).text
    c = PerturbedBackend(specs, cfg).generate(_request(doc, pid, run_index=1)).text
    assert a == b and a != c


def test_mangling_keeps_counts(suite, doc):
    specs = {s.schedule_id: s for s in suite}
    pid = suite[0].schedule_id
    cfg = BackendConfig(backend_kind="perturbed", mangle_names=True, seed=1)
    mangled = parse_extraction_output(PerturbedBackend(specs, cfg).generate(_request(doc, pid)).text)
    plain = parse_extraction_output(OracleBackend(specs).generate(_request(doc, pid)).text)
    key = lambda a: a.intervention_type.value  # noqa: E731
    assert [a.contact_days for a in sorted(mangled, key=key)] == [a.contact_days for a in sorted(plain, key=key)]


def _gemini_response(text):
    return {"candidates": [{"content": {"parts": [{"text": text}]}}]}


def _remote(handler, sleeps, **cfg):
    client = httpx.Client(transport=httpx.MockTransport(handler))
    config = BackendConfig(backend_kind="remote", backoff_base=0.5, **cfg)
    return RemoteBackend(config, client=client, sleep=sleeps.append, api_key="test-key")


def test_remote_retries_then_succeeds(doc):
    calls, sleeps = [], []

    def handler(request):
        calls.append(request)
        if len(calls) <= 2:
            return httpx.Response(503, text="busy")
        return httpx.Response(200, json=_gemini_response(json.dumps(_payload())))

    completion = _remote(handler, sleeps).generate(_request(doc, "P-1"))
    assert len(completion.attempts) == 3
    assert completion.attempts[-1]["ok"] is True
    assert sleeps == [0.5, 1.0]
    assert len(parse_extraction_output(completion.text)) == 2
    sent = json.loads(calls[0].content)
    assert calls[0].headers["x-goog-api-key"] == "test-key"
    parts = sent["contents"][0]["parts"]
    assert parts[0]["inline_data"]["mime_type"] == "text/html"
    assert sent["generationConfig"]["temperature"] == 0.1


def test_remote_transport_errors_exhaust(doc):
    sleeps = []

    def handler(request):
        raise httpx.ConnectError("down", request=request)

    with pytest.raises(TransportError) as info:
        _remote(handler, sleeps).generate(_request(doc, "P-1"))
    assert len(info.value.attempts) == 4
    assert sleeps == [0.5, 1.0, 2.0]


def test_remote_client_error_not_retried(doc):
    sleeps = []
    with pytest.raises(TransportError):
        _remote(lambda r: httpx.Response(400, text="bad"), sleeps).generate(_request(doc, "P-1"))
    assert sleeps == []


def test_remote_malformed_response_retried(doc):
    responses = iter([httpx.Response(200, json={"nope": 1}), httpx.Response(200, json=_gemini_response("[]"))])
    sleeps = []
    completion = _remote(lambda r: next(responses), sleeps).generate(_request(doc, "P-1"))
    assert completion.text == "[]" and len(completion.attempts) == 2


def test_remote_requires_key(monkeypatch):
    monkeypatch.delenv("GEMINI_API_KEY", raising=False)
    with pytest.raises(ConfigError, match="GEMINI_API_KEY"):
        RemoteBackend(BackendConfig(backend_kind="remote"))


def test_remote_logs_are_redacted(doc, tmp_path):
    handler = lambda r: httpx.Response(200, json=_gemini_response("[]"))  # noqa: E731
    backend = _remote(handler, [])
    req = BackendRequest(build_vanilla_prompt(doc), doc, "P-1", "vanilla", log_dir=tmp_path)
    backend.generate(req)
    logged = (tmp_path / "vanilla.request.json").read_text()
    assert "test-key" not in logged
    assert "omitted" in logged


def test_two_stage_through_remote(doc):
    structure = {"cycle_length_days": 21, "treatment_duration_months": 6, "arms": []}
    seen = []

    def handler(request):
        body = json.loads(request.content)
        seen.append(body)
        text = json.dumps(structure) if len(seen) == 1 else json.dumps(_payload())
        return httpx.Response(200, json=_gemini_response(text))

    backend = _remote(handler, [])
    run = extract(ExtractionRequest(doc, "P-1", backend.config, "two_stage"), backend)
    assert len(seen) == 2
    assert seen[0]["generationConfig"]["responseMimeType"] == "application/json"
    assert '"cycle_length_days": 21' in seen[1]["contents"][0]["parts"][1]["text"]
    assert [a["stage"] for a in run.attempts] == ["structure", "count"]
    assert run.structure["cycle_length_days"] == 21
