"""Command-line entry point: ``contactdays <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

from . import _io
from .config import PipelineConfig
from .errors import ConfigError, ContactDaysError, PipelineError
from .experiment import MANIFEST, discover_documents, load_runs, manifest_summary, run_extraction
from .extraction import make_backend
from .reports import format_stability, format_swaps, format_validation, write_consensus, write_report, write_stability, write_validation
from .synth import SuiteConfig, emit_ground_truth, generate_suite, load_suite, suite_summary, write_suite

log = logging.getLogger("contactdays")

SUITE_FILE = "suite.json"


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="YAML/JSON pipeline config")
    p.add_argument("--experiment", default=argparse.SUPPRESS, help="experiment name")
    p.add_argument("--force", action="store_true", default=argparse.SUPPRESS, help="overwrite existing outputs")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="contactdays", parents=[common], description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate the synthetic schedule suite")
    p.add_argument("--out", help="suite directory (default: config suite_dir)")
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int, help="number of schedules, 1:2:1 complexity split")

    p = sub.add_parser("truth", parents=[common], help="recompute truth.json for an existing suite")
    p.add_argument("--suite")

    p = sub.add_parser("extract", parents=[common], help="run extraction over the suite or an input directory")
    p.add_argument("--backend", choices=("oracle", "perturbed", "remote"))
    p.add_argument("--arch", choices=("vanilla", "two_stage"))
    p.add_argument("--runs", type=int)
    p.add_argument("--suite")
    p.add_argument("--input", help="directory of documents instead of the suite")
    p.add_argument("--model")
    p.add_argument("--temperature", type=float)
    p.add_argument("--concurrency", type=int)
    p.add_argument("--noise", type=int, help="perturbed backend: max per-window jitter")
    p.add_argument("--mangle-names", action="store_true", default=None, help="perturbed backend: randomize names")
    p.add_argument("--seed", type=int, help="perturbed backend seed")

    p = sub.add_parser("consensus", parents=[common], help="position-based consensus over runs")
    p.add_argument("--two-per-protocol", action="store_true", help="keep only the first slot of each type")

    for name, text in (("evaluate", "score runs against ground truth"), ("report", "all tables and plot data")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--suite", help="directory holding truth.json files")

    sub.add_parser("stability", parents=[common], help="run-to-run stability of 12-month counts")
    sub.add_parser("selfcheck", parents=[common], help="regression gates; nonzero exit on failure")
    return parser


def load_config(args) -> PipelineConfig:
    config = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "experiment", None):
        config.experiment = args.experiment
    return config


def _experiment_dir(config) -> Path:
    exp_dir = config.experiment_dir
    if not (exp_dir / "runs").is_dir():
        raise PipelineError(f"experiment not found: {exp_dir}")
    return exp_dir


def cmd_gen(args, config) -> int:
    out = Path(args.out or config.suite_dir)
    seed = config.suite_seed if args.seed is None else args.seed
    total = config.suite_size if args.count is None else args.count
    suite_cfg = SuiteConfig(seed=seed) if total == SuiteConfig().total else SuiteConfig.scaled(total, seed)
    specs = generate_suite(suite_cfg)
    if out.exists() and any(out.iterdir()):
        if not getattr(args, "force", False):
            raise PipelineError(f"{out} already exists and is not empty; use --force to replace it")
        if not (out / SUITE_FILE).exists():
            raise PipelineError(f"{out} does not look like a suite directory; refusing to remove it")
        shutil.rmtree(out)
    write_suite(specs, out)
    summary = suite_summary(specs)
    _io.write_json(out / SUITE_FILE, {"schema_version": 1, "seed": seed, "summary": summary})
    c = summary["complexity"]
    print(
        f"{summary['schedules']} schedules, {summary['arms']} arms, {summary['comparisons']} comparisons "
        f"(simple {c['simple']}, moderate {c['moderate']}, complex {c['complex']}) -> {out}"
    )
    return 0


def cmd_truth(args, config) -> int:
    suite = Path(args.suite or config.suite_dir)
    specs = load_suite(suite)
    if not specs:
        raise PipelineError(f"no spec.json files under {suite}")
    for spec in specs:
        emit_ground_truth(spec, suite / spec.schedule_id)
    summary = suite_summary(specs)
    print(f"wrote truth for {summary['schedules']} schedules ({summary['comparisons']} comparisons)")
    return 0


def _apply_extract_overrides(args, config):
    if args.suite:
        config.suite_dir = args.suite
    if args.input:
        config.input_dir = args.input
    if args.arch:
        config.architecture = args.arch
    if args.runs is not None:
        config.runs_per_protocol = args.runs
    if args.concurrency is not None:
        config.concurrency = args.concurrency
    b = config.backend
    for attr, value in (
        ("backend_kind", args.backend),
        ("model_id", args.model),
        ("temperature", args.temperature),
        ("noise", args.noise),
        ("mangle_names", args.mangle_names),
        ("seed", args.seed),
    ):
        if value is not None:
            setattr(b, attr, value)
    if b.backend_kind == "oracle" and (b.noise or b.mangle_names):
        b.backend_kind = "perturbed"
    return config.validate()


def _check_compatible(exp_dir, config):
    """Refuse to resume an experiment whose extraction settings changed."""
    path = exp_dir / MANIFEST
    if not path.exists():
        return
    old = _io.read_json(path).get("config", {})
    new = config.to_dict()
    for key in ("architecture", "backend"):
        if key in old and old[key] != new[key]:
            raise ConfigError(f"experiment {config.experiment!r} was run with a different {key}; use --force to restart it")


def cmd_extract(args, config) -> int:
    config = _apply_extract_overrides(args, config)
    exp_dir = config.experiment_dir
    if getattr(args, "force", False) and exp_dir.exists():
        shutil.rmtree(exp_dir)
    _check_compatible(exp_dir, config)
    backend = make_backend(config.backend)  # fails early on missing credentials
    documents = discover_documents(config)
    stats = run_extraction(config, backend, documents)
    print(
        f"{len(documents)} protocols x {config.runs_per_protocol} runs: executed {stats['executed']}, "
        f"skipped {stats['skipped']}, failed {stats['failed']} -> {exp_dir}"
    )
    log.info("manifest: %s", manifest_summary(exp_dir))
    return 1 if stats["failed"] else 0


def cmd_consensus(args, config) -> int:
    exp_dir = _experiment_dir(config)
    out = write_consensus(exp_dir, load_runs(exp_dir), two_per_protocol=args.two_per_protocol)
    print(f"{out['consensus_arms']} consensus arms -> {exp_dir / 'consensus'}")
    print(format_swaps(out["swaps"]))
    return 0


def cmd_evaluate(args, config) -> int:
    exp_dir = _experiment_dir(config)
    result = write_validation(exp_dir, load_runs(exp_dir), Path(args.suite or config.suite_dir))
    print(format_validation(result))
    return 0


def cmd_stability(args, config) -> int:
    exp_dir = _experiment_dir(config)
    print(format_stability(write_stability(exp_dir, load_runs(exp_dir))))
    return 0


def cmd_report(args, config) -> int:
    exp_dir = _experiment_dir(config)
    print(write_report(exp_dir, load_runs(exp_dir), Path(args.suite or config.suite_dir)), end="")
    return 0


def cmd_selfcheck(args, config) -> int:
    from .selfcheck import run_selfcheck

    ok = True
    for name, passed, detail in run_selfcheck():
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok &= passed
    return 0 if ok else 1


COMMANDS = {
    "gen": cmd_gen,
    "truth": cmd_truth,
    "extract": cmd_extract,
    "consensus": cmd_consensus,
    "evaluate": cmd_evaluate,
    "stability": cmd_stability,
    "report": cmd_report,
    "selfcheck": cmd_selfcheck,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        config = load_config(args)
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContactDaysError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
