"""Seeded synthetic benchmark suite: generation, HTML rendering, truth files.

The renderer and :func:`parse_rendered` form a closed loop: parsing a rendered
document recovers the cycle length and per-arm visit days that produced it,
which keeps the documents and the truth files from drifting apart.
"""

from __future__ import annotations

import html
import random
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path

from . import _io
from .errors import ConfigError, PipelineError
from .schedule import (
    CYCLE_LENGTHS,
    DAYS_PER_MONTH,
    DISEASE_CATEGORIES,
    DURATION_RANGE,
    ArmSpec,
    Complexity,
    Role,
    ScheduleSpec,
    WINDOWS,
    ground_truth,
    truth_document,
)

SUITE_SIZE = 20
DEFAULT_COUNTS = {"simple": 5, "moderate": 10, "complex": 5}
DEFAULT_MODALITY_MIX = {"systemic": 3, "radiation": 1, "surgery": 1}
PROTOCOL_YEAR = 2025

DISEASE_CODES = {
    "breast": "BRST",
    "thoracic": "THOR",
    "gastrointestinal": "GI",
    "genitourinary": "GU",
    "head_and_neck": "HN",
    "melanoma": "MEL",
    "gynecologic": "GYN",
    "sarcoma": "SARC",
}
DISEASE_NAMES = {
    "breast": "HER2-Negative Metastatic Breast Cancer",
    "thoracic": "Advanced Non-Small Cell Lung Cancer",
    "gastrointestinal": "Metastatic Colorectal Cancer",
    "genitourinary": "Metastatic Castration-Resistant Prostate Cancer",
    "head_and_neck": "Locally Advanced Head and Neck Squamous Cell Carcinoma",
    "melanoma": "Unresectable Stage III/IV Melanoma",
    "gynecologic": "Recurrent Ovarian Cancer",
    "sarcoma": "Advanced Soft Tissue Sarcoma",
}
# (intervention regimen, control regimen)
REGIMENS = {
    "breast": ("Sacituzumab govitecan", "Physician's choice chemotherapy"),
    "thoracic": ("Pembrolizumab + carboplatin/pemetrexed", "Placebo + carboplatin/pemetrexed"),
    "gastrointestinal": ("FOLFOX + bevacizumab + investigational antibody", "FOLFOX + bevacizumab"),
    "genitourinary": ("Lutetium-177 PSMA radioligand", "Androgen receptor pathway inhibitor change"),
    "head_and_neck": ("Cisplatin + nivolumab", "Cisplatin + placebo"),
    "melanoma": ("Nivolumab + relatlimab", "Nivolumab"),
    "gynecologic": ("Mirvetuximab soravtansine", "Investigator's choice chemotherapy"),
    "sarcoma": ("Doxorubicin + olaratumab", "Doxorubicin + placebo"),
}
DISEASE_ROWS = {
    "breast": "Echocardiogram / MUGA (LVEF)",
    "thoracic": "Pulmonary function tests",
    "gastrointestinal": "CEA tumor marker",
    "genitourinary": "Serum PSA",
    "head_and_neck": "Audiometry",
    "melanoma": "Dermatologic examination",
    "gynecologic": "CA-125 tumor marker",
    "sarcoma": "Echocardiogram (cumulative anthracycline)",
}
TREATMENT_ROW = {
    "systemic": "Study treatment administration",
    "radiation": "Study treatment administration (radiotherapy fraction + systemic agent)",
    "surgery": "Study treatment administration (perioperative therapy)",
}


@dataclass(frozen=True)
class Style:
    glyph: str
    markers: tuple[str, str]
    font: str
    border: str
    vertical_headers: bool
    footnotes: str  # "bottom" | "top" | "aside"


STYLES = {
    1: Style("X", ("A", "B"), "'Times New Roman', serif", "1px solid #000", False, "bottom"),
    2: Style("✓", ("1", "2"), "Helvetica, Arial, sans-serif", "none", True, "top"),
    3: Style("●", ("†", "‡"), "'Courier New', monospace", "1px dotted #555", False, "bottom"),
    4: Style("X", ("a", "b"), "Georgia, serif", "3px double #333", True, "aside"),
    5: Style("x", ("I", "C"), "Arial, sans-serif", "2px solid #1a3d6d", False, "bottom"),
}


@dataclass
class SuiteConfig:
    seed: int = 42
    counts: dict = field(default_factory=lambda: dict(DEFAULT_COUNTS))
    disease_categories: tuple = DISEASE_CATEGORIES
    style_count: int = 5
    modality_mix: dict = field(default_factory=lambda: dict(DEFAULT_MODALITY_MIX))
    total: int = SUITE_SIZE

    def validate(self):
        if self.total < 1:
            raise ConfigError(f"suite size must be positive, got {self.total}")
        unknown = set(self.counts) - {c.value for c in Complexity}
        if unknown:
            raise ConfigError(f"unknown complexity levels {sorted(unknown)}")
        if any(v < 0 for v in self.counts.values()):
            raise ConfigError("complexity counts must be nonnegative")
        if sum(self.counts.values()) != self.total:
            raise ConfigError(f"complexity counts sum to {sum(self.counts.values())}, expected {self.total}")
        bad = set(self.disease_categories) - set(DISEASE_CATEGORIES)
        if bad or not self.disease_categories:
            raise ConfigError(f"invalid disease categories {sorted(bad)}")
        if not 1 <= self.style_count <= len(STYLES):
            raise ConfigError(f"style_count must be in [1, {len(STYLES)}]")
        if not self.modality_mix or any(w < 0 for w in self.modality_mix.values()):
            raise ConfigError("modality mix needs nonnegative weights")
        return self

    @classmethod
    def scaled(cls, total: int, seed: int = 42) -> "SuiteConfig":
        """Config of ``total`` schedules keeping the 1:2:1 complexity ratio."""
        if total < 1:
            raise ConfigError(f"suite size must be positive, got {total}")
        simple = complex_ = total // 4
        return cls(seed=seed, total=total, counts={"simple": simple, "moderate": total - 2 * simple, "complex": complex_})


def _offsets(rng: random.Random, cycle_length: int, k: int) -> tuple[int, ...]:
    # day 1 anchors every cycle, extra visits spread over the rest of it
    return tuple(sorted([1] + rng.sample(range(2, cycle_length + 1), k - 1)))


def _imaging_interval(rng: random.Random, cycle_length: int) -> int:
    choices = [n * cycle_length for n in range(1, 20) if 42 <= n * cycle_length <= 90]
    return rng.choice(choices)


def generate_suite(config: SuiteConfig | None = None) -> list[ScheduleSpec]:
    config = (config or SuiteConfig()).validate()
    rng = random.Random(config.seed)

    complexities = [c for c in Complexity for _ in range(config.counts.get(c.value, 0))]
    rng.shuffle(complexities)
    diseases = list(config.disease_categories)
    rng.shuffle(diseases)
    modality_pool = [m for m, w in sorted(config.modality_mix.items()) for _ in range(w)]
    modalities = [modality_pool[i % len(modality_pool)] for i in range(config.total)]
    rng.shuffle(modalities)

    per_disease: dict[str, int] = {}
    specs = []
    for i, complexity in enumerate(complexities):
        disease = diseases[i % len(diseases)]
        per_disease[disease] = per_disease.get(disease, 0) + 1
        sid = f"{DISEASE_CODES[disease]}-{PROTOCOL_YEAR}-{per_disease[disease]:02d}"
        cycle = rng.choice(CYCLE_LENGTHS)
        duration = rng.randint(*DURATION_RANGE)
        k = complexity.visit_days
        inter, ctrl = REGIMENS[disease]
        arms = (
            ArmSpec("A", Role.INTERVENTION, _offsets(rng, cycle, k), inter),
            ArmSpec("B", Role.CONTROL, _offsets(rng, cycle, k), ctrl),
        )
        specs.append(
            ScheduleSpec(
                schedule_id=sid,
                disease_category=disease,
                complexity=complexity,
                cycle_length_days=cycle,
                treatment_duration_months=duration,
                arms=arms,
                screening_days=rng.choice([(-14, -7), (-28, -7), (-21, -3)]),
                imaging_interval_days=_imaging_interval(rng, cycle),
                eot_offset_days=30,
                followup_months=(9, 12),
                style_id=i % config.style_count + 1,
                modality=modalities[i],
            )
        )
    return specs


# --------------------------------------------------------------------------
# rendering


@dataclass(frozen=True)
class Column:
    kind: str  # screening | treatment | eot | followup
    group: str
    sub: str
    first_cycle: int = 0
    last_cycle: int = 0
    offset: int = 0


def cycle_groups(n_cycles: int) -> list[tuple[int, int]]:
    """Cycle ranges shown as columns: early cycles alone, the rest grouped."""
    if n_cycles <= 3:
        return [(c, c) for c in range(1, n_cycles + 1)]
    single = 3 if n_cycles >= 5 else 2
    return [(c, c) for c in range(1, single + 1)] + [(single + 1, n_cycles)]


def _group_label(first: int, last: int) -> str:
    return f"C{first}" if first == last else f"C{first}–C{last}"


def build_columns(spec: ScheduleSpec) -> list[Column]:
    cols = [Column("screening", "Screening", f"D{d}") for d in spec.screening_days]
    offsets = sorted({d for arm in spec.arms for d in arm.visit_days_per_cycle})
    for first, last in cycle_groups(spec.total_cycles):
        for d in offsets:
            cols.append(Column("treatment", _group_label(first, last), f"D{d}", first, last, d))
    cols.append(Column("eot", "EOT", ""))
    for m in spec.followup_months:
        cols.append(Column("followup", "Follow-up", f"M{m}"))
    return cols


def _visiting(spec, col):
    if col.kind == "treatment":
        return {a.arm_id for a in spec.arms if col.offset in a.visit_days_per_cycle}
    return {a.arm_id for a in spec.arms}


def _row_plan(spec: ScheduleSpec, cols: list[Column]):
    """Assessment rows as (label, {column index: arm ids}); None marks the imaging note."""
    screening = [i for i, c in enumerate(cols) if c.kind == "screening"]
    treatment = [i for i, c in enumerate(cols) if c.kind == "treatment"]
    eot = [i for i, c in enumerate(cols) if c.kind == "eot"]
    fu = [i for i, c in enumerate(cols) if c.kind == "followup"]
    c1d1 = [i for i in treatment if cols[i].first_cycle == 1 and cols[i].offset == 1]
    day1 = [i for i in treatment if cols[i].offset == 1]

    def at(*index_lists):
        return {i: _visiting(spec, cols[i]) for lst in index_lists for i in lst}

    return [
        ("Informed consent", at(screening[:1])),
        ("Randomization", at(screening[-1:])),
        ("Medical history and demographics", at(screening)),
        ("Physical examination", at(screening, treatment, eot, fu)),
        ("Vital signs and ECOG performance status", at(treatment, eot)),
        ("Complete blood count with differential", at(screening, treatment)),
        ("Serum chemistry and liver function tests", at(screening, treatment)),
        ("12-lead ECG", at(screening, c1d1)),
        ("Adverse events and concomitant medications", at(treatment, eot, fu)),
        (TREATMENT_ROW[spec.modality], at(treatment)),
        ("Patient-reported outcomes (EORTC QLQ-C30)", at(day1, eot)),
        ("Tumor imaging (CT/MRI, RECIST 1.1)", None),
        (DISEASE_ROWS[spec.disease_category], at(screening, c1d1)),
    ]


def _mark(style: Style, arm_ids: set, marker_of: dict) -> str:
    if not arm_ids:
        return ""
    if len(arm_ids) == len(marker_of):
        return html.escape(style.glyph)
    (arm_id,) = arm_ids
    return f"{html.escape(style.glyph)}<sup>{html.escape(marker_of[arm_id])}</sup>"


def _css(style: Style) -> str:
    vertical = "th.hdr{writing-mode:vertical-rl;transform:rotate(180deg);}" if style.vertical_headers else ""
    return (
        f"body{{font-family:{style.font};font-size:11px;}}"
        f"table.soa{{border-collapse:collapse;}}"
        f"table.soa th,table.soa td{{border:{style.border};padding:2px 4px;text-align:center;}}"
        f"td.assessment{{text-align:left;}}td.note{{font-style:italic;}}"
        f"{vertical}"
        f".footnotes{{font-size:9px;}}aside.footnotes{{float:right;width:25%;}}"
    )


def _days_phrase(days) -> str:
    days = list(days)
    if len(days) == 1:
        return f"Day {days[0]}"
    return "Days " + ", ".join(str(d) for d in days[:-1]) + f" and {days[-1]}"


def render_schedule(spec: ScheduleSpec) -> "RenderedSchedule":
    style = STYLES[spec.style_id]
    marker_of = {arm.arm_id: style.markers[i] for i, arm in enumerate(spec.arms)}
    cols = build_columns(spec)
    n_cycles = spec.total_cycles
    esc = html.escape

    # header rows: group labels with colspans, then per-column sub labels
    groups: list[list] = []
    for c in cols:
        if groups and groups[-1][0] == c.group and c.kind != "eot":
            groups[-1][1] += 1
        else:
            groups.append([c.group, 1])
    hdr_cls = ' class="hdr"'
    head1 = ['<th rowspan="2">Assessment</th>']
    for label, span in groups:
        if label == "EOT":
            head1.append(f'<th rowspan="2"{hdr_cls}>EOT<sup>b</sup></th>')
        else:
            head1.append(f'<th colspan="{span}"{hdr_cls}>{esc(label)}</th>')
    head2 = [f"<th{hdr_cls}>{esc(c.sub)}</th>" for c in cols if c.kind != "eot"]

    body = []
    for label, plan in _row_plan(spec, cols):
        cells = [f'<td class="assessment">{esc(label)}</td>']
        if plan is None:
            treatment_idx = [i for i, c in enumerate(cols) if c.kind == "treatment"]
            for i, c in enumerate(cols):
                if c.kind == "treatment":
                    if i == treatment_idx[0]:
                        cells.append(
                            f'<td class="note" colspan="{len(treatment_idx)}">'
                            f"Every {spec.imaging_interval_days} days from Day 1 until end of treatment"
                            "<sup>a</sup></td>"
                        )
                elif c.kind == "followup":
                    cells.append(f"<td>{_mark(style, _visiting(spec, c), marker_of)}</td>")
                else:
                    cells.append("<td></td>")
        else:
            cells.extend(f"<td>{_mark(style, plan.get(i, set()), marker_of)}</td>" for i in range(len(cols)))
        body.append("<tr>" + "".join(cells) + "</tr>")

    legend_items = [f'<li class="legend-universal"><span class="cell">{esc(style.glyph)}</span> Required for all patients</li>']
    for arm in spec.arms:
        legend_items.append(
            f'<li class="legend-arm"><span class="cell">{esc(style.glyph)}<sup>{esc(marker_of[arm.arm_id])}</sup></span> '
            f"Arm {esc(arm.arm_id)} only</li>"
        )
    for arm in spec.arms:
        legend_items.append(
            f'<li class="arm-pattern">Arm {esc(arm.arm_id)} ({arm.role.value.title()}): {esc(arm.label)}. '
            f"Treatment visits on {_days_phrase(arm.visit_days_per_cycle)} of each {spec.cycle_length_days}-day cycle "
            f"for {n_cycles} cycles ({spec.treatment_duration_months} months).</li>"
        )

    fu_days = ", ".join(f"Month {m} (Day {m * DAYS_PER_MONTH})" for m in spec.followup_months)
    footnotes = [
        f"<sup>a</sup> Tumor imaging every {spec.imaging_interval_days} days counted from Cycle 1 Day 1 "
        "and continuing through the last treatment visit.",
        f"<sup>b</sup> End-of-treatment visit {spec.eot_offset_days} days after the last treatment visit.",
        f"<sup>c</sup> Follow-up visits: {fu_days or 'none'}; physical examination, adverse events and imaging.",
        "<sup>d</sup> Screening visits on "
        + ", ".join(f"Day {d}" for d in spec.screening_days)
        + " relative to Cycle 1 Day 1.",
        "<sup>e</sup> Columns labelled with a cycle range apply to every cycle in that range.",
    ]
    tag = "aside" if style.footnotes == "aside" else "div"
    foot_html = f'<{tag} class="footnotes">' + "".join(f"<p>{f}</p>" for f in footnotes) + f"</{tag}>"

    title = (
        f"Protocol {esc(spec.schedule_id)}: A Randomized Phase III Study of {esc(spec.arms[0].label)} "
        f"versus {esc(spec.arms[1].label)} in {esc(DISEASE_NAMES[spec.disease_category])}"
    )
    table = (
        '<table class="soa">'
        f"<thead><tr>{''.join(head1)}</tr><tr>{''.join(head2)}</tr></thead>"
        f"<tbody>{''.join(body)}</tbody></table>"
    )
    legend = '<div class="legend"><h3>Legend</h3><ul>' + "".join(legend_items) + "</ul></div>"
    parts = [
        "<!DOCTYPE html>",
        f'<html lang="en"><head><meta charset="utf-8"><title>{esc(spec.schedule_id)} Schedule of Assessments</title>',
        f"<style>{_css(style)}</style></head><body>",
        f"<h1>{title}</h1>",
        f"<p class=\"meta\">Treatment modality: {esc(spec.modality)}. Disease site: {esc(spec.disease_category)}.</p>",
        "<h2>Schedule of Assessments</h2>",
    ]
    if style.footnotes in ("top", "aside"):
        parts += [foot_html, table, legend]
    else:
        parts += [table, legend, foot_html]
    parts.append("</body></html>")
    return RenderedSchedule(spec.schedule_id, spec.style_id, "\n".join(parts) + "\n")


@dataclass(frozen=True)
class RenderedSchedule:
    schedule_id: str
    style_id: int
    document: str


# --------------------------------------------------------------------------
# reference parser


@dataclass
class _Cell:
    text: str = ""
    sup: str = ""
    colspan: int = 1
    rowspan: int = 1


class _SoaHTMLParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.rows: list[list[_Cell]] = []
        self.items: list[_Cell] = []
        self._cell = None
        self._in_sup = False
        self._in_soa = False

    def handle_starttag(self, tag, attrs):
        a = dict(attrs)
        if tag == "table" and "soa" in (a.get("class") or ""):
            self._in_soa = True
        elif tag == "tr" and self._in_soa:
            self.rows.append([])
        elif tag in ("td", "th") and self._in_soa:
            self._cell = _Cell(colspan=int(a.get("colspan", 1)), rowspan=int(a.get("rowspan", 1)))
            self.rows[-1].append(self._cell)
        elif tag == "li":
            self._cell = _Cell()
            self.items.append(self._cell)
        elif tag == "sup":
            self._in_sup = True

    def handle_endtag(self, tag):
        if tag == "table":
            self._in_soa = False
        elif tag in ("td", "th", "li"):
            self._cell = None
        elif tag == "sup":
            self._in_sup = False

    def handle_data(self, data):
        if self._cell is None:
            return
        if self._in_sup:
            self._cell.sup += data
        else:
            self._cell.text += data


@dataclass
class ParsedSchedule:
    cycle_length_days: int
    visit_days_per_cycle: dict[str, tuple[int, ...]]
    n_cycles: int
    grouped_columns: list[tuple[int, int]]
    markers: dict[str, str]


_PATTERN_RE = re.compile(
    r"Arm (?P<arm>\w+) \((?P<role>\w+)\):.*Treatment visits on Days? (?P<days>[\d, and]+) of each "
    r"(?P<cycle>\d+)-day cycle for (?P<n>\d+) cycles"
)
_GROUP_RE = re.compile(r"^C(\d+)(?:–C(\d+))?$")


def _expand_header(rows):
    """Resolve row/colspans of the two header rows into per-column (group, sub)."""
    top, second = rows[0], rows[1]
    groups, spans_two = [], []
    for cell in top:
        for _ in range(cell.colspan):
            groups.append(cell.text.strip())
            spans_two.append(cell.rowspan == 2)
    subs = iter(second)
    return [(g, "" if two else next(subs).text.strip()) for g, two in zip(groups, spans_two)]


def parse_rendered(document: str) -> ParsedSchedule:
    """Recover cycle length and per-arm visit days from a rendered document.

    Visit days come from the treatment administration row of cycle 1; the
    legend supplies the cycle length and maps superscript markers to arms.
    """
    p = _SoaHTMLParser()
    p.feed(document)
    markers, legend = {}, {}
    for item in p.items:
        m = re.search(r"Arm (\w+) only", item.text)
        if m and item.sup:
            markers[item.sup.strip()] = m.group(1)
        m = _PATTERN_RE.search(item.text)
        if m:
            legend[m.group("arm")] = m
    if not legend:
        raise ValueError("no arm visit patterns found in legend")
    cycle_lengths = {int(m.group("cycle")) for m in legend.values()}
    if len(cycle_lengths) != 1:
        raise ValueError(f"arms disagree on cycle length: {sorted(cycle_lengths)}")

    header = _expand_header(p.rows)
    body = p.rows[2:]
    admin = next(r for r in body if r[0].text.startswith("Study treatment administration"))
    admin_cells = admin[1:]
    arms = sorted(legend)
    visit_days = {a: [] for a in arms}
    grouped = []
    for (group, sub), cell in zip(header[1:], admin_cells):
        m = _GROUP_RE.match(group)
        if not m:
            continue
        first, last = int(m.group(1)), int(m.group(2) or m.group(1))
        if last > first and (first, last) not in grouped:
            grouped.append((first, last))
        if first != 1 or not cell.text.strip():
            continue
        day = int(sub.lstrip("D"))
        owners = [markers[cell.sup.strip()]] if cell.sup.strip() else arms
        for a in owners:
            visit_days[a].append(day)
    return ParsedSchedule(
        cycle_length_days=cycle_lengths.pop(),
        visit_days_per_cycle={a: tuple(sorted(d)) for a, d in visit_days.items()},
        n_cycles=int(next(iter(legend.values())).group("n")),
        grouped_columns=grouped,
        markers=markers,
    )


# --------------------------------------------------------------------------
# files


def emit_ground_truth(spec: ScheduleSpec, directory) -> Path:
    """Write ``truth.json`` for ``spec`` into ``directory``."""
    path = Path(directory) / "truth.json"
    try:
        return _io.write_json(path, truth_document(spec))
    except OSError as exc:
        raise PipelineError(f"could not write ground truth: {exc}", protocol_id=spec.schedule_id) from exc


def write_schedule(spec: ScheduleSpec, suite_dir) -> Path:
    directory = Path(suite_dir) / spec.schedule_id
    try:
        _io.write_json(directory / "spec.json", spec.to_dict())
        _io.atomic_write_text(directory / "schedule.html", render_schedule(spec).document)
    except OSError as exc:
        raise PipelineError(f"could not write schedule files: {exc}", protocol_id=spec.schedule_id) from exc
    emit_ground_truth(spec, directory)
    return directory


def write_suite(specs, suite_dir) -> list[Path]:
    return [write_schedule(s, suite_dir) for s in specs]


def load_suite(suite_dir) -> list[ScheduleSpec]:
    suite_dir = Path(suite_dir)
    return [ScheduleSpec.from_dict(_io.read_json(p)) for p in sorted(suite_dir.glob("*/spec.json"))]


def load_truth(path) -> dict:
    """``{arm_id: {"role", "label", "counts", "category_counts"}}`` from a truth file."""
    return _io.read_json(path)["arms"]


def suite_summary(specs) -> dict:
    arms = sum(len(s.arms) for s in specs)
    by_complexity = {c.value: sum(1 for s in specs if s.complexity is c) for c in Complexity}
    return {
        "schedules": len(specs),
        "arms": arms,
        "intervention_arms": sum(1 for s in specs for a in s.arms if a.role is Role.INTERVENTION),
        "control_arms": sum(1 for s in specs for a in s.arms if a.role is Role.CONTROL),
        "comparisons": arms * len(WINDOWS),
        "complexity": by_complexity,
        "disease_categories": len({s.disease_category for s in specs}),
        "cycle_lengths": sorted({s.cycle_length_days for s in specs}),
        "styles": sorted({s.style_id for s in specs}),
        "modalities": sorted({s.modality for s in specs}),
    }


__all__ = [
    "SuiteConfig",
    "RenderedSchedule",
    "ParsedSchedule",
    "generate_suite",
    "render_schedule",
    "parse_rendered",
    "emit_ground_truth",
    "write_schedule",
    "write_suite",
    "load_suite",
    "load_truth",
    "suite_summary",
    "ground_truth",
]
