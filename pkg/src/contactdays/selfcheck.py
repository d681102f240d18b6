"""Hard regression gates run by ``contactdays selfcheck``."""

from __future__ import annotations

from .evaluation import accuracy_summary, validation_records
from .extraction import BackendConfig, Document, ExtractionRequest, OracleBackend, extract
from .schedule import WINDOWS, count_contact_days, expand_arm_calendar, truth_document
from .stats import iqr
from .synth import SuiteConfig, generate_suite, render_schedule

# worked examples of the median-exclusive convention
IQR_GATE = (
    ((94, 473, 473, 540, 543), 258.0),
    ((99, 105, 106, 106, 106), 4.0),
    ((27, 53, 53, 53, 53), 13.0),
    ((8, 8, 8, 8, 8), 0.0),
)


def scan_counts(spec, arm) -> dict:
    """Window counts by testing every day from -60 to 365 for membership."""
    n_cycles = spec.total_cycles
    L = spec.cycle_length_days
    last = (n_cycles - 1) * L + max(arm.visit_days_per_cycle)

    def is_contact(day):
        if day in spec.screening_days:
            return True
        if 1 <= day <= n_cycles * L and (day - 1) % L + 1 in arm.visit_days_per_cycle:
            return True
        if 1 <= day <= last and day % spec.imaging_interval_days == 0:
            return True
        if day == last + spec.eot_offset_days:
            return True
        return any(day == m * 30 for m in spec.followup_months)

    contact = [d for d in range(-60, 366) if is_contact(d)]
    return {w: sum(1 for d in contact if w.contains(d)) for w in WINDOWS}


def check_iqr():
    bad = [(v, iqr(v), want) for v, want in IQR_GATE if iqr(v) != want]
    return not bad, "4/4 worked examples" if not bad else f"mismatches {bad}"


def check_scan(seeds=range(10)):
    n = 0
    for seed in seeds:
        for spec in generate_suite(SuiteConfig(seed=seed)):
            for arm in spec.arms:
                if count_contact_days(expand_arm_calendar(spec, arm)).counts != scan_counts(spec, arm):
                    return False, f"{spec.schedule_id} arm {arm.arm_id} (seed {seed}) disagrees"
                n += 1
    return True, f"{n} arms agree with the day scan"


def check_oracle_fidelity():
    specs = generate_suite()
    backend = OracleBackend({s.schedule_id: s for s in specs})
    config = BackendConfig()
    records = []
    for spec in specs:
        for arch in ("vanilla", "two_stage"):
            doc = Document.from_text(render_schedule(spec).document)
            run = extract(ExtractionRequest(doc, spec.schedule_id, config, arch), backend)
            records += validation_records(run, truth_document(spec)["arms"], spec.complexity.value)[0]
    s = accuracy_summary(records)
    ok = s["exact_match"] == 1.0 and s["mae"] == 0.0
    return ok, f"{s['comparisons']} comparisons, exact {100 * s['exact_match']:.1f}%, MAE {s['mae']:.2f}"


def run_selfcheck():
    """``[(name, passed, detail)]`` for every gate."""
    out = []
    for name, fn in (("iqr", check_iqr), ("day_scan", check_scan), ("oracle_fidelity", check_oracle_fidelity)):
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashing gate is a failed gate
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, passed, detail))
    return out


__all__ = ["IQR_GATE", "scan_counts", "run_selfcheck"]
