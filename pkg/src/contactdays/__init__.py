"""Synthetic schedule-of-assessments benchmarks and healthcare contact-day extraction."""

from .config import PipelineConfig
from .consensus import ConsensusArm, SwapReport, analyze_swaps, assign_positions, compute_consensus
from .errors import (
    ConfigError,
    ContactDaysError,
    InvalidSpecError,
    ParseError,
    PipelineError,
    StructureError,
    TransportError,
    UndefinedMetricError,
)
from .estimators import ContactDayCounter, PositionalConsensus, ScheduleExtractor, StabilityClassifier
from .evaluation import (
    accuracy_summary,
    classify_stability,
    error_distribution,
    stability_report,
    stability_table,
    validation_records,
)
from .extraction import ArmExtraction, BackendConfig, RunResult, extract, make_backend
from .schedule import (
    WINDOWS,
    ArmSpec,
    Category,
    Complexity,
    ContactCalendar,
    GroundTruth,
    Role,
    ScheduleSpec,
    Window,
    count_contact_days,
    expand_arm_calendar,
    ground_truth,
)
from .stats import iqr, median, quartiles
from .synth import SuiteConfig, emit_ground_truth, generate_suite, parse_rendered, render_schedule

__version__ = "0.1.0"
