"""Command-line entry points: run, compare, summarize."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiment
from .errors import ConfigError, InputError, InvariantViolation, ParameterError, SmpcError, StepFailure

_EXIT_CODES = [
    (ConfigError, 2),
    (ParameterError, 3),
    (InputError, 3),
    (StepFailure, 4),
    (InvariantViolation, 5),
    (SmpcError, 1),
]


def _parse_seed_list(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"--seed-list: expected comma-separated integers, got {text!r}") from exc
    if not seeds or any(s < 0 for s in seeds):
        raise ConfigError(f"--seed-list: expected non-negative integers, got {text!r}")
    return seeds


def _load_with_overrides(path: str, args) -> experiment.ExperimentConfig:
    import dataclasses

    cfg = experiment.load_config(path)
    updates = {}
    if args.seed_list is not None:
        updates["seeds"] = _parse_seed_list(args.seed_list)
    if args.workers is not None:
        if args.workers < 0:
            raise ConfigError(f"--workers: expected an integer >= 0, got {args.workers}")
        updates["workers"] = args.workers
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _cmd_run(args) -> int:
    cfg = _load_with_overrides(args.config, args)
    out = Path(args.out or cfg.output_dir or f"smpc-out/{Path(args.config).stem}")
    records = experiment.run_experiment(cfg)
    env = cfg.build_env()
    experiment.write_run(records, out, env, cfg)
    if not args.no_plots:
        from . import figures

        figures.save_run_figures(records, env, out, label=cfg.label)
    print(experiment.run_summary_text(cfg.label, records))
    print(f"wrote {out}")
    return 0


def _cmd_compare(args) -> int:
    cfgs = [_load_with_overrides(path, args) for path in args.configs]
    report, records_by_label = experiment.compare_controllers(
        cfgs, bins=args.bins, per_episode_hist=args.per_episode
    )
    out = Path(args.out or "smpc-out/compare")
    experiment.write_comparison(report, out)
    if not args.no_plots:
        from . import figures

        figures.save_compare_figures(report, out)
    for label in report.labels:
        print(experiment.run_summary_text(label, records_by_label[label])
              + f" win_ratio={report.win_ratio[label]:.2f}")
    print(f"wrote {out}")
    return 0


def _cmd_summarize(args) -> int:
    root = Path(args.dir)
    if (root / "episodes.csv").exists():
        run_dirs = [root]
    else:
        run_dirs = sorted(d for d in root.iterdir() if (d / "episodes.csv").exists())
    if not run_dirs:
        raise InputError(f"no run directories under {root}")
    records_by_label = {}
    for d in run_dirs:
        label, _, records = experiment.read_run(d)
        records_by_label[label] = records
    rows = experiment.summarize_costs(records_by_label, args.bins, per_episode=args.per_episode)
    out = Path(args.out or root)
    path = experiment.write_histogram(rows, out / "summary_hist.csv")
    if not args.no_plots:
        from . import figures

        kind = "episode totals" if args.per_episode else "per-step costs"
        figures.save_histogram_figure(rows, out / "summary_hist.png",
                                      title=f"cost distribution ({kind})")
    for label, records in records_by_label.items():
        print(experiment.run_summary_text(label, records))
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smpc",
        description="Sampling-based MPC experiments: closed-loop runs, paired "
        "controller comparisons, and cost-distribution summaries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--workers", type=int, default=None,
                       help="rollout workers (0 = auto-detect logical cores)")
        p.add_argument("--seed-list", default=None, help="comma-separated seeds override")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    p_run = sub.add_parser("run", help="run one experiment config across its seeds")
    p_run.add_argument("config")
    common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run several configs on a shared protocol")
    p_cmp.add_argument("configs", nargs="+")
    p_cmp.add_argument("--bins", type=int, default=20)
    p_cmp.add_argument("--per-episode", action="store_true",
                       help="histogram episode totals instead of per-step costs")
    common(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    p_sum = sub.add_parser("summarize", help="histogram costs from written run directories")
    p_sum.add_argument("dir")
    p_sum.add_argument("--bins", type=int, default=20)
    p_sum.add_argument("--per-episode", action="store_true")
    common(p_sum)
    p_sum.set_defaults(func=_cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SmpcError as exc:
        for cls, code in _EXIT_CODES:
            if isinstance(exc, cls):
                print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
