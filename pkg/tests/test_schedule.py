import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactdays.errors import InvalidSpecError
from contactdays.schedule import (
    WINDOWS,
    ArmSpec,
    Category,
    ContactCalendar,
    ScheduleSpec,
    Window,
    build_calendar,
    count_contact_days,
    expand_arm_calendar,
    ground_truth,
    total_cycles,
    treatment_days,
)

from conftest import random_spec, scan_counts, specs


@pytest.mark.parametrize("months,length,expected", [(6, 21, 8), (2, 7, 8), (12, 35, 10), (2, 35, 1)])
def test_total_cycles(months, length, expected):
    assert total_cycles(months, length) == expected


@pytest.mark.parametrize("months,length", [(0, 21), (6, 0), (-1, 7)])
def test_total_cycles_rejects_nonpositive(months, length):
    with pytest.raises(InvalidSpecError):
        total_cycles(months, length)


def test_windows():
    assert [w.value for w in WINDOWS] == ["screening", "m1", "m3", "m6", "m9", "m12"]
    assert [w.upper_day for w in WINDOWS] == [None, 30, 90, 180, 270, 365]
    assert Window.SCREENING.contains(0) and Window.SCREENING.contains(-30)
    assert not Window.SCREENING.contains(1)
    assert Window.M1.contains(30) and not Window.M1.contains(31) and not Window.M1.contains(0)
    assert Window.from_key("9_months") is Window.M9


def test_eight_cycle_treatment_days(eight_cycle_spec):
    arm = eight_cycle_spec.arm("A")
    assert treatment_days(eight_cycle_spec, arm) == [1, 22, 43, 64, 85, 106, 127, 148]


def test_eight_cycle_counts_with_eot_and_followups(eight_cycle_spec):
    arm = eight_cycle_spec.arm("A")
    cal = expand_arm_calendar(eight_cycle_spec, arm)
    assert cal.days == [1, 22, 43, 64, 85, 106, 127, 148, 178]
    counts = count_contact_days(cal).counts
    assert counts[Window.M6] == 9 and counts[Window.M12] == 9
    assert counts[Window.M1] == 2 and counts[Window.SCREENING] == 0

    with_fu = ScheduleSpec.from_dict({**eight_cycle_spec.to_dict(), "followup_months": [9, 12]})
    counts = count_contact_days(expand_arm_calendar(with_fu, with_fu.arm("A"))).counts
    assert counts[Window.M12] == 11
    assert counts[Window.M9] == 10


def test_imaging_day_not_on_visit_day():
    spec = ScheduleSpec(
        "IMG-1", "breast", "simple", 21, 6,
        (ArmSpec("A", "intervention", (1,)), ArmSpec("B", "control", (1,))),
        imaging_interval_days=63,
    )
    cal = expand_arm_calendar(spec, spec.arm("A"))
    assert cal.entries[63] == {Category.IMAGING}
    assert Category.CORE_TREATMENT in cal.entries[64]
    # 126 is imaging only too; visit days are 1 mod 21
    assert cal.entries[126] == {Category.IMAGING}


def test_merged_tags_on_shared_day():
    cal = build_calendar(
        "A", cycle_length_days=21, duration_months=6, visit_days_per_cycle=(1,), imaging_interval_days=43
    )
    assert cal.entries[43] == {Category.CORE_TREATMENT, Category.LABS, Category.CLINIC, Category.IMAGING}


def test_no_followups_means_nothing_after_eot(eight_cycle_spec):
    cal = expand_arm_calendar(eight_cycle_spec, eight_cycle_spec.arm("A"))
    assert max(cal.days) == 148 + 30


def test_direct_calendar_counts():
    cal = ContactCalendar("A", {-14: {"clinic_visits"}, -7: {"labs"}, 1: {"core_treatment"}, 22: {"core_treatment"}})
    counts = count_contact_days(cal).counts
    assert counts == {
        Window.SCREENING: 2, Window.M1: 2, Window.M3: 2, Window.M6: 2, Window.M9: 2, Window.M12: 2
    }


def test_empty_calendar():
    gt = count_contact_days(ContactCalendar("A", {}))
    assert all(v == 0 for v in gt.counts.values())
    assert all(v == 0 for v in gt.category_counts.values())


def test_days_beyond_365_not_counted():
    cal = ContactCalendar("A", {366: {"clinic_visits"}, 365: {"clinic_visits"}})
    assert count_contact_days(cal).counts[Window.M12] == 1


@pytest.mark.parametrize(
    "change",
    [
        {"cycle_length_days": 14},
        {"treatment_duration_months": 13},
        {"treatment_duration_months": 1},
        {"disease_category": "hematologic"},
        {"screening_days": [3]},
        {"imaging_interval_days": 0},
        {"eot_offset_days": 0},
        {"style_id": 6},
        {"modality": "vaccine"},
        {"complexity": "complex"},
    ],
)
def test_invalid_specs_rejected(eight_cycle_spec, change):
    with pytest.raises((InvalidSpecError, ValueError)):
        ScheduleSpec.from_dict({**eight_cycle_spec.to_dict(), **change})


def test_offset_outside_cycle_rejected():
    with pytest.raises(InvalidSpecError):
        ScheduleSpec("X", "breast", "simple", 7, 6, (ArmSpec("A", "intervention", (8,)), ArmSpec("B", "control", (1,))))


def test_arm_needs_one_to_three_offsets():
    with pytest.raises(InvalidSpecError):
        ArmSpec("A", "intervention", ())
    with pytest.raises(InvalidSpecError):
        ArmSpec("A", "intervention", (1, 2, 3, 4))


def test_two_arms_of_each_role_required(eight_cycle_spec):
    with pytest.raises(InvalidSpecError):
        ScheduleSpec("X", "breast", "simple", 21, 6, (ArmSpec("A", "intervention", (1,)), ArmSpec("B", "intervention", (1,))))


def test_spec_round_trip():
    rng = random.Random(5)
    for i in range(50):
        spec = random_spec(rng, i)
        assert ScheduleSpec.from_dict(spec.to_dict()) == spec


def test_matches_day_scan_for_random_specs():
    rng = random.Random(20251015)
    for i in range(1000):
        spec = random_spec(rng, i)
        for arm in spec.arms:
            assert count_contact_days(expand_arm_calendar(spec, arm)).counts == scan_counts(spec, arm), spec


@settings(max_examples=200, deadline=None)
@given(specs())
def test_windows_monotone(spec):
    for gt in ground_truth(spec).values():
        seq = [gt.counts[w] for w in WINDOWS[1:]]
        assert seq == sorted(seq)
        for w in WINDOWS:
            # every category count is bounded by the day count
            assert all(gt.category_counts[(w, c)] <= gt.counts[w] for c in Category)


@settings(max_examples=200, deadline=None)
@given(specs())
def test_style_does_not_change_truth(spec):
    base = ground_truth(spec)
    for style in range(1, 6):
        other = ScheduleSpec.from_dict({**spec.to_dict(), "style_id": style})
        assert ground_truth(other) == base


@settings(max_examples=200, deadline=None)
@given(specs())
def test_screening_and_treatment_partition(spec):
    for arm in spec.arms:
        cal = expand_arm_calendar(spec, arm)
        counts = count_contact_days(cal).counts
        assert counts[Window.SCREENING] + counts[Window.M12] == sum(1 for d in cal.days if d <= 365)
        assert counts[Window.SCREENING] == len(spec.screening_days)


@settings(max_examples=100, deadline=None)
@given(specs(), st.data())
def test_duplicate_merge_idempotent(spec, data):
    arm = spec.arms[0]
    cal = expand_arm_calendar(spec, arm)
    day = data.draw(st.sampled_from(cal.days))
    again = cal.with_tags(day, cal.entries[day])
    assert again == cal
    assert count_contact_days(again) == count_contact_days(cal)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([7, 21, 28, 35]), st.integers(2, 12), st.data())
def test_adding_a_visit_offset_never_decreases_counts(length, months, data):
    offsets = data.draw(st.sets(st.integers(1, length), min_size=1, max_size=2))
    extra = data.draw(st.integers(1, length))
    kw = dict(cycle_length_days=length, duration_months=months, imaging_interval_days=None, eot_offset_days=None)
    small = count_contact_days(build_calendar("A", visit_days_per_cycle=offsets, **kw)).counts
    big = count_contact_days(build_calendar("A", visit_days_per_cycle=offsets | {extra}, **kw)).counts
    assert all(big[w] >= small[w] for w in WINDOWS)
