#!/usr/bin/env python3
"""
Student-teacher anomaly detection CLI.

Every stage reads and writes the run directory, so stages can run in separate
invocations:

    stad train-teacher --config configs/synthetic_benchmark.json
    stad train-students --config configs/synthetic_benchmark.json
    stad score --config configs/synthetic_benchmark.json
    stad evaluate --config configs/synthetic_benchmark.json
"""

import argparse
import os
import sys
import typing
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from stad.core.config import APP_VERSION, config as env_config, get_default_settings, validate_config
from stad.core.exceptions import StadError
from stad.models import RunConfig
from stad.service_factory import ServiceFactory
from stad.services.teacher_service import describe_teacher
from stad.utils.logging import get_logger, set_global_level
from stad.utils.synthetic import write_pretraining_corpus, write_synthetic_category

logger = get_logger("cli")
console = Console()

EXIT_OK = 0
EXIT_INTERRUPTED = 130

COMMANDS = {
    "train-teacher": "Pretrain one teacher per scale",
    "train-students": "Train student ensembles, feature stats and calibration per scale",
    "calibrate": "Recompute the validation calibration of every scale",
    "score": "Write an anomaly map and PNG overlay per test image",
    "evaluate": "Compute PRO-AUC and ROC-AUC tables from the saved maps",
    "one-class": "Image-level one-class ROC-AUC per class",
    "synth": "Write the synthetic dataset and a disjoint pretraining corpus",
    "show-config": "Print the fully resolved run configuration",
}


# ---------------------------------------------------------------------------
# RunConfig flags
# ---------------------------------------------------------------------------

def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def _flag_kwargs(annotation: Any) -> Dict[str, Any]:
    """argparse keyword arguments for one RunConfig field type."""
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union:
        inner = [a for a in args if a is not type(None)]
        return _flag_kwargs(inner[0])
    if origin is typing.Literal:
        return {"choices": list(args)}
    if origin in (list, List):
        return {"nargs": "+", "type": args[0]}
    if annotation is bool:
        return {"type": _parse_bool, "metavar": "BOOL"}
    return {"type": annotation}


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One ``--field-name`` flag per RunConfig field; unset flags leave the config untouched."""
    group = parser.add_argument_group("run configuration overrides")
    for name, info in RunConfig.model_fields.items():
        default = info.get_default(call_default_factory=True)
        help_text = f"{info.description or name} (default: {default})"
        group.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None, help=help_text, **_flag_kwargs(info.annotation))


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file (if any) plus flag overrides; the run directory defaults under STAD_RUN_ROOT."""
    overrides = {name: getattr(args, name, None) for name in RunConfig.model_fields}
    if args.config:
        run_config = RunConfig.from_file(args.config, **overrides)
    else:
        run_config = RunConfig.build(**{k: v for k, v in overrides.items() if v is not None})
    if "run_dir" not in run_config.model_fields_set:
        run_config = run_config.with_overrides(run_dir=str(Path(env_config.paths.run_root) / "default"))
    return run_config


def setup_argument_parser() -> argparse.ArgumentParser:
    """Setup command line argument parser."""
    parser = argparse.ArgumentParser(
        prog="stad",
        description="Student-teacher anomaly detection: training, scoring and evaluation",
    )
    parser.add_argument("--version", action="version", version=f"stad v{APP_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command, help_text in COMMANDS.items():
        sub = subparsers.add_parser(command, help=help_text, description=help_text)
        sub.add_argument("--config", help="JSON run configuration file")
        sub.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], help="Override LOG_LEVEL")
        if command == "synth":
            sub.add_argument("--out", default="data/synthetic", help="Output root (default: data/synthetic)")
            sub.add_argument("--num-train", type=int, default=100)
            sub.add_argument("--num-test-anomalous", type=int, default=20)
            sub.add_argument("--num-test-good", type=int, default=10)
            sub.add_argument("--corpus-size", type=int, default=40)
        if command == "score":
            sub.add_argument("--no-png", action="store_true", help="Skip the PNG overlays")
        add_config_flags(sub)
    return parser


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def print_table(rows: List[List[str]], headers: List[str], title: Optional[str] = None) -> None:
    table = Table(title=title)
    for header in headers:
        table.add_column(header)
    for row in rows:
        table.add_row(*row)
    console.print(table)


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.4f}"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_show_config(run_config: RunConfig, factory: ServiceFactory, args: argparse.Namespace) -> None:
    rows = [[name, repr(value)] for name, value in run_config.to_dict().items()]
    print_table(rows, ["Field", "Value"], title="Run configuration")
    env_rows = [[k, str(v)] for k, v in get_default_settings().items()]
    print_table(env_rows, ["Setting", "Value"], title="Environment")
    is_valid, problems = validate_config()
    if not is_valid:
        console.print(f"Environment problems: {', '.join(problems)}", style="yellow")


def cmd_synth(run_config: RunConfig, factory: ServiceFactory, args: argparse.Namespace) -> None:
    out = Path(args.out)
    category = write_synthetic_category(
        out / "category",
        seed=run_config.seed,
        num_train=args.num_train,
        num_test_anomalous=args.num_test_anomalous,
        num_test_good=args.num_test_good,
        side=run_config.image_side,
    )
    corpus = write_pretraining_corpus(out / "corpus", seed=run_config.seed, count=args.corpus_size, side=run_config.image_side)
    console.print(Panel(f"category: {category}\ncorpus:   {corpus}", title="Synthetic data written", border_style="green"))


def cmd_train_teacher(run_config: RunConfig, factory: ServiceFactory, args: argparse.Namespace) -> None:
    pipeline = factory.get_pipeline()
    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        TimeElapsedColumn(),
        console=console,
    ) as progress:
        tasks = {
            p: progress.add_task(f"teacher p={p}", total=run_config.teacher_iterations) for p in run_config.scales
        }

        def _advance(p: int, iteration: int, parts: Dict[str, float]) -> None:
            progress.update(tasks[p], completed=iteration, description=f"teacher p={p} loss={parts['total']:.4f}")

        paths = pipeline.train_teacher(progress_callback=_advance)

    repo = factory.get_run_repository()
    for p, path in zip(run_config.scales, paths):
        checkpoint = repo.load_teacher(p)
        print_table(describe_teacher(checkpoint.net), ["Layer", "C", "H", "W"], title=f"Teacher p={p}: {path}")
        console.print(f"final loss: {_fmt(checkpoint.final_loss)}")


def cmd_train_students(run_config: RunConfig, factory: ServiceFactory, args: argparse.Namespace) -> None:
    artifacts = factory.get_pipeline().train_students()
    rows = []
    for p, scale in artifacts.items():
        losses = factory.get_student_service().loss_summary(scale.ensemble)
        c = scale.calibration
        rows.append([
            str(p),
            str(len(scale.ensemble)),
            ", ".join(f"{v:.4f}" for v in losses.values()),
            f"{c.e_mu:.4g} ± {c.e_sigma:.4g}",
            f"{c.v_mu:.4g} ± {c.v_sigma:.4g}",
        ])
    print_table(rows, ["p", "M", "final losses", "e (μ ± σ)", "v (μ ± σ)"], title="Student ensembles")


def cmd_calibrate(run_config: RunConfig, factory: ServiceFactory, args: argparse.Namespace) -> None:
    artifacts = factory.get_pipeline().calibrate()
    rows = [
        [str(p), f"{s.calibration.e_mu:.4g}", f"{s.calibration.e_sigma:.4g}", f"{s.calibration.v_mu:.4g}", f"{s.calibration.v_sigma:.4g}"]
        for p, s in artifacts.items()
    ]
    print_table(rows, ["p", "e_mu", "e_sigma", "v_mu", "v_sigma"], title="Calibration")


def cmd_score(run_config: RunConfig, factory: ServiceFactory, args: argparse.Namespace) -> None:
    maps = factory.get_pipeline().score(write_png=not args.no_png)
    console.print(f"Wrote {len(maps)} anomaly maps under {Path(run_config.run_dir) / 'maps'}", style="green")


def cmd_evaluate(run_config: RunConfig, factory: ServiceFactory, args: argparse.Namespace) -> None:
    summary, _ = factory.get_pipeline().evaluate()
    rows = [[f"p={k}" if k.isdigit() else k, _fmt(v)] for k, v in summary.per_scale_pro_auc.items()]
    print_table(rows, ["Scale", f"PRO-AUC@{summary.fpr_limit}"], title=f"Evaluation: {summary.category}")
    console.print(
        f"PRO-AUC {_fmt(summary.pro_auc)} | image ROC-AUC {_fmt(summary.roc_auc)} | "
        f"{summary.num_images} images, {summary.num_regions} regions"
    )


def cmd_one_class(run_config: RunConfig, factory: ServiceFactory, args: argparse.Namespace) -> None:
    table, mean_auc = factory.get_pipeline().run_oneclass()
    rows = [[str(r["class"]), _fmt(r["roc_auc"])] for r in table.to_dict("records")]
    rows.append(["mean", _fmt(mean_auc)])
    print_table(rows, ["Normal class", "ROC-AUC"], title="One-class evaluation")


HANDLERS: Dict[str, Callable[[RunConfig, ServiceFactory, argparse.Namespace], None]] = {
    "train-teacher": cmd_train_teacher,
    "train-students": cmd_train_students,
    "calibrate": cmd_calibrate,
    "score": cmd_score,
    "evaluate": cmd_evaluate,
    "one-class": cmd_one_class,
    "synth": cmd_synth,
    "show-config": cmd_show_config,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = setup_argument_parser()
    args = parser.parse_args(argv)
    if args.log_level:
        os.environ["LOG_LEVEL"] = args.log_level
        set_global_level(args.log_level)

    try:
        run_config = resolve_config(args)
        factory = ServiceFactory(run_config)
        HANDLERS[args.command](run_config, factory, args)
        return EXIT_OK
    except KeyboardInterrupt:
        console.print("\nInterrupted", style="yellow")
        return EXIT_INTERRUPTED
    except StadError as e:
        logger.error(f"{args.command} failed: {e}")
        console.print(f"Error ({type(e).__name__}): {e}", style="red")
        return e.exit_code
    except Exception as e:
        logger.error(f"Fatal error in {args.command}: {e}", exc_info=True)
        console.print(f"Fatal error: {e}", style="red")
        return 1


if __name__ == "__main__":
    sys.exit(main())
