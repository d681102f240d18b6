import pytest

from contactdays import _io
from contactdays.errors import ConfigError
from contactdays.schedule import WINDOWS, ArmSpec, Role, ScheduleSpec, ground_truth
from contactdays.synth import (
    SuiteConfig,
    build_columns,
    cycle_groups,
    emit_ground_truth,
    generate_suite,
    load_suite,
    parse_rendered,
    render_schedule,
    suite_summary,
    write_suite,
)


@pytest.fixture(scope="module")
def suite():
    return generate_suite(SuiteConfig(seed=42))


def test_default_composition(suite):
    s = suite_summary(suite)
    assert s["schedules"] == 20 and s["arms"] == 40 and s["comparisons"] == 240
    assert s["intervention_arms"] == 20 and s["control_arms"] == 20
    assert s["complexity"] == {"simple": 5, "moderate": 10, "complex": 5}
    assert s["disease_categories"] == 8
    assert s["cycle_lengths"] == [7, 21, 28, 35]
    assert s["styles"] == [1, 2, 3, 4, 5]
    assert s["modalities"] == ["radiation", "surgery", "systemic"]


def test_deterministic(suite):
    again = generate_suite(SuiteConfig(seed=42))
    assert [_io.dumps(s.to_dict()) for s in again] == [_io.dumps(s.to_dict()) for s in suite]
    assert [render_schedule(s).document for s in again] == [render_schedule(s).document for s in suite]


def test_seed_changes_suite(suite):
    other = generate_suite(SuiteConfig(seed=43))
    assert [s.to_dict() for s in other] != [s.to_dict() for s in suite]


def test_ids_unique(suite):
    ids = [s.schedule_id for s in suite]
    assert len(set(ids)) == len(ids)
    assert all(s.arm("A").role is Role.INTERVENTION and s.arm("B").role is Role.CONTROL for s in suite)


@pytest.mark.parametrize("total", [1, 4, 7, 40])
def test_scaled_config(total):
    specs = generate_suite(SuiteConfig.scaled(total, seed=1))
    assert len(specs) == total


@pytest.mark.parametrize("bad", [dict(total=0, counts={}), dict(counts={"simple": 5, "moderate": 10, "complex": 4})])
def test_invalid_suite_config(bad):
    with pytest.raises(ConfigError):
        generate_suite(SuiteConfig(**bad))


def test_scaled_zero_rejected():
    with pytest.raises(ConfigError):
        SuiteConfig.scaled(0)


@pytest.mark.parametrize("n,expected", [(1, [(1, 1)]), (3, [(1, 1), (2, 2), (3, 3)]), (4, [(1, 1), (2, 2), (3, 4)]),
                                        (8, [(1, 1), (2, 2), (3, 3), (4, 8)])])
def test_cycle_groups(n, expected):
    assert cycle_groups(n) == expected


def test_round_trip_parse(suite):
    for spec in suite:
        parsed = parse_rendered(render_schedule(spec).document)
        assert parsed.cycle_length_days == spec.cycle_length_days
        assert parsed.n_cycles == spec.total_cycles
        assert parsed.visit_days_per_cycle == {a.arm_id: a.visit_days_per_cycle for a in spec.arms}


def _spec(style, complexity="simple", offsets=((1,), (1,)), months=6):
    return ScheduleSpec(
        "T-01", "melanoma", complexity, 21, months,
        (ArmSpec("A", "intervention", offsets[0], "drug"), ArmSpec("B", "control", offsets[1], "placebo")),
        style_id=style,
    )


def test_eight_cycles_have_grouped_column():
    spec = _spec(1)
    assert spec.total_cycles == 8
    groups = {(c.first_cycle, c.last_cycle) for c in build_columns(spec) if c.kind == "treatment"}
    assert any(last - first >= 1 for first, last in groups)
    parsed = parse_rendered(render_schedule(spec).document)
    assert (4, 8) in parsed.grouped_columns
    assert "C4–C8" in render_schedule(spec).document


def test_style_changes_markup_not_truth():
    one, five = _spec(1), _spec(5)
    assert render_schedule(one).document != render_schedule(five).document
    assert ground_truth(one) == ground_truth(five)


def test_legend_has_distinct_markers():
    spec = _spec(2, "moderate", ((1, 8), (1, 15)))
    parsed = parse_rendered(render_schedule(spec).document)
    assert set(parsed.markers.values()) == {"A", "B"}
    assert len(set(parsed.markers)) == 2


def test_truth_files(tmp_path, suite):
    write_suite(suite, tmp_path)
    truths = [_io.read_json(p) for p in sorted(tmp_path.glob("*/truth.json"))]
    assert sum(len(t["arms"]) for t in truths) == 40
    assert all(len(a["counts"]) == len(WINDOWS) for t in truths for a in t["arms"].values())
    first = tmp_path / suite[0].schedule_id / "truth.json"
    before = first.read_bytes()
    emit_ground_truth(suite[0], first.parent)
    assert first.read_bytes() == before
    assert load_suite(tmp_path) == sorted(suite, key=lambda s: s.schedule_id)
