"""Experiment harness: config files, closed-loop runs, comparisons, summaries.

Configs are strict YAML (unknown keys are fatal) with defaults applied at
load time. A run executes one closed receding-horizon loop per seed and
persists per-step rows and per-episode footers as CSV; given the same config
bytes and seed the CSVs are byte-identical across runs and worker counts, so
wall-clock timing is kept out of them (it lives on the in-memory records and
in the printed summary only).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .controllers import CONTROLLER_NAMES, CONTROLLER_STEPS, ControllerConfig
from .envs import EnvModel, TaskSpec, make_env
from .errors import ConfigError, InputError, StepFailure
from .rollout import SeedSpec

# Config-file key -> ControllerConfig field.
PARAM_KEYS = {
    "samples": "n_samples",
    "horizon": "horizon",
    "lambda": "temperature",
    "alpha": "learning_rate",
    "cycles": "cycles",
    "elites": "n_elite",
    "cov_floor": "cov_floor",
    "init_std": "init_std",
    "shift_fill": "shift_fill",
    "covariance_mode": "covariance_mode",
    "cma_weighting": "cma_weighting",
    "inner_center": "inner_center",
    "reset_cov": "reset_cov",
}
_INT_PARAMS = {"samples", "horizon", "cycles", "elites"}
_FLOAT_PARAMS = {"lambda", "alpha", "cov_floor", "init_std"}
_BOOL_PARAMS = {"reset_cov"}

_TOP_KEYS = (
    "environment",
    "env",
    "task",
    "controller",
    "params",
    "episode_steps",
    "seeds",
    "workers",
    "output_dir",
    "label",
)
_TASK_KEYS = ("waypoints", "tolerance", "target_speed")


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully validated experiment: environment + task + controller + protocol."""

    environment: str
    controller: str
    params: ControllerConfig
    task: TaskSpec
    env_params: dict = field(default_factory=dict)
    episode_steps: int = 100
    seeds: tuple[int, ...] = tuple(range(20))
    workers: int = 1
    output_dir: str | None = None
    label: str = ""

    def build_env(self) -> EnvModel:
        return make_env(self.environment, task=self.task, params=dict(self.env_params))

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return serialize_config(self) == serialize_config(other)


@dataclass(frozen=True)
class StepRow:
    """One deterministic per-step record of a closed-loop episode."""

    step: int
    action: tuple[float, ...]
    stage_cost: float
    cum_cost: float
    best_cost: float
    mean_cost: float
    exploration: float
    state: tuple[float, ...]


@dataclass
class ExperimentRecord:
    """One closed-loop episode: ordered rows plus the episode footer."""

    seed: int
    rows: list[StepRow]
    success: bool
    total_cost: float
    steps_to_goal: int | None
    failed: bool
    wall_s: float  # informational; never written to the deterministic CSVs


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _thaw(value):
    if isinstance(value, tuple):
        return [_thaw(v) for v in value]
    return value


def _require_mapping(obj, name: str) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(obj).__name__}")
    return obj


def _coerce_param(key: str, value):
    if key in _INT_PARAMS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"params.{key}: expected an integer, got {value!r}")
        return value
    if key in _FLOAT_PARAMS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"params.{key}: expected a number, got {value!r}")
        return float(value)
    if key in _BOOL_PARAMS:
        if not isinstance(value, bool):
            raise ConfigError(f"params.{key}: expected true/false, got {value!r}")
        return value
    if not isinstance(value, str):
        raise ConfigError(f"params.{key}: expected a string, got {value!r}")
    return value


def load_config(source) -> ExperimentConfig:
    """Load and validate an experiment config from a YAML file path or dict.

    Defaults are applied (sample count 30, horizon 40, temperature 0.1,
    3 update cycles, and the environment's stock task); unknown keys and
    out-of-range values raise :class:`ConfigError` naming the offending key.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"config parse error in {path}: {exc}") from exc
    else:
        raw = source
    raw = _require_mapping(raw, "config")
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigError(f"{key}: unknown key")

    if "environment" not in raw:
        raise ConfigError("environment: required key is missing")
    environment = raw["environment"]
    if "controller" not in raw:
        raise ConfigError("controller: required key is missing")
    controller = raw["controller"]
    if controller not in CONTROLLER_NAMES:
        raise ConfigError(f"controller: unknown name {controller!r}; expected one of {CONTROLLER_NAMES}")

    env_params = {k: _freeze(v) for k, v in _require_mapping(raw.get("env"), "env").items()}

    params_raw = _require_mapping(raw.get("params"), "params")
    kwargs = {}
    for key, value in params_raw.items():
        if key not in PARAM_KEYS:
            raise ConfigError(f"params.{key}: unknown key")
        kwargs[PARAM_KEYS[key]] = _coerce_param(key, value)
    params = ControllerConfig(**kwargs).resolved_for(controller)

    # The stock environment supplies the default task; explicit task keys
    # override it field by field.
    default_env = make_env(environment)
    task_raw = _require_mapping(raw.get("task"), "task")
    for key in task_raw:
        if key not in _TASK_KEYS:
            raise ConfigError(f"task.{key}: unknown key")
    base = default_env.task
    task = TaskSpec(
        waypoints=_freeze(task_raw.get("waypoints", base.waypoints)),
        tolerance=task_raw.get("tolerance", base.tolerance),
        target_speed=task_raw.get("target_speed", base.target_speed),
    )

    episode_steps = raw.get("episode_steps", 100)
    if isinstance(episode_steps, bool) or not isinstance(episode_steps, int) or episode_steps < 0:
        raise ConfigError(f"episode_steps: expected an integer >= 0, got {episode_steps!r}")

    seeds = raw.get("seeds", list(range(20)))
    if isinstance(seeds, int):
        seeds = [seeds]
    if (
        not isinstance(seeds, (list, tuple))
        or len(seeds) == 0
        or any(isinstance(s, bool) or not isinstance(s, int) or s < 0 for s in seeds)
    ):
        raise ConfigError(f"seeds: expected a non-empty list of integers >= 0, got {seeds!r}")

    workers = raw.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 0:
        raise ConfigError(f"workers: expected an integer >= 0, got {workers!r}")

    output_dir = raw.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError(f"output_dir: expected a string, got {output_dir!r}")

    label = raw.get("label", controller)
    if not isinstance(label, str) or not label:
        raise ConfigError(f"label: expected a non-empty string, got {label!r}")

    cfg = ExperimentConfig(
        environment=environment,
        controller=controller,
        params=params,
        task=task,
        env_params=env_params,
        episode_steps=episode_steps,
        seeds=tuple(seeds),
        workers=workers,
        output_dir=output_dir,
        label=label,
    )
    cfg.build_env()  # fail fast on bad env params
    return cfg


def serialize_config(cfg: ExperimentConfig) -> dict:
    """Canonical plain-dict form of a config; load(serialize(cfg)) == cfg."""
    reverse = {v: k for k, v in PARAM_KEYS.items()}
    params = {}
    for f in dataclasses.fields(ControllerConfig):
        params[reverse[f.name]] = getattr(cfg.params, f.name)
    out = {
        "environment": cfg.environment,
        "controller": cfg.controller,
        "params": params,
        "task": {
            "waypoints": _thaw(cfg.task.waypoints),
            "tolerance": cfg.task.tolerance,
            "target_speed": cfg.task.target_speed,
        },
        "episode_steps": cfg.episode_steps,
        "seeds": list(cfg.seeds),
        "workers": cfg.workers,
        "label": cfg.label,
    }
    if cfg.env_params:
        out["env"] = {k: _thaw(v) for k, v in sorted(cfg.env_params.items())}
    if cfg.output_dir is not None:
        out["output_dir"] = cfg.output_dir
    return out


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(serialize_config(cfg), sort_keys=True)


def run_episode(cfg: ExperimentConfig, env: EnvModel, seed: int, workers: int | None = None) -> ExperimentRecord:
    """One closed receding-horizon loop: step, apply, record, until done.

    A controller step failure marks the episode failed and keeps the partial
    rows.
    """
    workers = cfg.workers if workers is None else workers
    step_fn = CONTROLLER_STEPS[cfg.controller]
    policy = cfg.params.initial_policy(env.control_dim)
    state = env.initial_state()
    rows: list[StepRow] = []
    cum = 0.0
    success = False
    failed = False
    steps_to_goal: int | None = None
    t0 = time.perf_counter()
    for k in range(cfg.episode_steps):
        try:
            action, policy, diag = step_fn(policy, env, state, cfg.params, SeedSpec(seed, k), workers)
        except StepFailure:
            failed = True
            break
        stage = env.stage_cost(state, action)
        state = env.transition(state, action)
        cum += stage
        rows.append(
            StepRow(
                step=k,
                action=tuple(float(a) for a in action),
                stage_cost=float(stage),
                cum_cost=float(cum),
                best_cost=diag.best_cost,
                mean_cost=diag.mean_cost,
                exploration=diag.exploration,
                state=tuple(float(s) for s in state),
            )
        )
        if not success and bool(env.success_mask(state[None, :])[0]):
            success = True
            steps_to_goal = k + 1
            break
    return ExperimentRecord(
        seed=seed,
        rows=rows,
        success=success,
        total_cost=cum,
        steps_to_goal=steps_to_goal,
        failed=failed,
        wall_s=time.perf_counter() - t0,
    )


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> list[ExperimentRecord]:
    """Run the configured episode once per seed, in seed order."""
    env = cfg.build_env()
    return [run_episode(cfg, env, seed, workers) for seed in cfg.seeds]


# ---------------------------------------------------------------------------
# Comparison and histograms
# ---------------------------------------------------------------------------


@dataclass
class ComparisonReport:
    """Paired multi-controller results on a shared environment and seed list."""

    labels: list[str]
    seeds: list[int]
    totals: dict[str, list[float]]  # label -> per-seed episode totals
    medians: dict[str, float]
    iqr: dict[str, tuple[float, float]]
    win_ratio: dict[str, float]
    success_rate: dict[str, float]
    histogram: list[tuple[str, float, float, int, float]]
    per_episode_hist: bool


def _unique_labels(cfgs) -> list[str]:
    seen: dict[str, int] = {}
    labels = []
    for cfg in cfgs:
        base = cfg.label or cfg.controller
        seen[base] = seen.get(base, 0) + 1
        labels.append(base if seen[base] == 1 else f"{base}-{seen[base]}")
    return labels


def check_comparable(cfgs: list[ExperimentConfig]) -> None:
    """Fair-comparison contract: same env, task, seeds, and sample budget."""
    if len(cfgs) < 2:
        raise ConfigError("compare: need at least two configs")
    head = cfgs[0]
    for cfg in cfgs[1:]:
        if cfg.environment != head.environment or cfg.env_params != head.env_params:
            raise ConfigError("compare: configs use different environments")
        if cfg.task != head.task:
            raise ConfigError("compare: configs use different tasks")
        if cfg.seeds != head.seeds:
            raise ConfigError("compare: configs use different seed lists")
        if cfg.episode_steps != head.episode_steps:
            raise ConfigError("compare: configs use different episode lengths")
        if cfg.params.n_samples != head.params.n_samples:
            raise ConfigError(
                "compare: per-step simulation budgets differ "
                f"({cfg.params.n_samples} vs {head.params.n_samples} samples)"
            )


def summarize_costs(
    records_by_label: dict[str, list[ExperimentRecord]],
    bins: int,
    per_episode: bool = False,
) -> list[tuple[str, float, float, int, float]]:
    """Shared-range binned cost densities, one histogram per label.

    Rows are (label, bin_left, bin_right, count, density); per label the
    densities integrate to one.
    """
    if not isinstance(bins, int) or bins < 1:
        raise InputError(f"bins must be a positive integer, got {bins}")
    if not records_by_label or all(len(r) == 0 for r in records_by_label.values()):
        raise InputError("no records to summarize")
    values = {}
    for label, records in records_by_label.items():
        if per_episode:
            vals = [r.total_cost for r in records]
        else:
            vals = [row.stage_cost for r in records for row in r.rows]
        values[label] = np.asarray(vals, dtype=np.float64)
    pooled = np.concatenate([v for v in values.values() if v.size])
    if pooled.size == 0:
        raise InputError("records contain no cost samples")
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:  # degenerate range: one unit-width bin centered on the value
        lo, hi = lo - 0.5, hi + 0.5
    rows = []
    for label, vals in values.items():
        counts, edges = np.histogram(vals, bins=bins, range=(lo, hi))
        width = edges[1] - edges[0]
        total = max(vals.size, 1)
        for b in range(bins):
            density = counts[b] / (total * width)
            rows.append((label, float(edges[b]), float(edges[b + 1]), int(counts[b]), float(density)))
    return rows


def compare_controllers(
    cfgs: list[ExperimentConfig],
    workers: int | None = None,
    bins: int = 20,
    per_episode_hist: bool = False,
) -> tuple[ComparisonReport, dict[str, list[ExperimentRecord]]]:
    """Run each config on the shared protocol and build the paired report.

    Ties on a seed split the win equally, so a controller compared against
    itself scores a win ratio of 0.5.
    """
    check_comparable(cfgs)
    labels = _unique_labels(cfgs)
    records_by_label: dict[str, list[ExperimentRecord]] = {}
    for label, cfg in zip(labels, cfgs):
        records_by_label[label] = run_experiment(cfg, workers)
    totals = {label: [r.total_cost for r in recs] for label, recs in records_by_label.items()}
    medians = {label: float(np.median(t)) for label, t in totals.items()}
    iqr = {
        label: (float(np.percentile(t, 25)), float(np.percentile(t, 75)))
        for label, t in totals.items()
    }
    success_rate = {
        label: float(np.mean([r.success for r in recs])) for label, recs in records_by_label.items()
    }
    seeds = list(cfgs[0].seeds)
    scores = {label: 0.0 for label in labels}
    for i in range(len(seeds)):
        per_seed = np.array([totals[label][i] for label in labels])
        best = per_seed.min()
        winners = [label for label, v in zip(labels, per_seed) if v == best]
        for w in winners:
            scores[w] += 1.0 / len(winners)
    win_ratio = {label: scores[label] / len(seeds) for label in labels}
    histogram = summarize_costs(records_by_label, bins, per_episode=per_episode_hist)
    report = ComparisonReport(
        labels=labels,
        seeds=seeds,
        totals=totals,
        medians=medians,
        iqr=iqr,
        win_ratio=win_ratio,
        success_rate=success_rate,
        histogram=histogram,
        per_episode_hist=per_episode_hist,
    )
    return report, records_by_label


# ---------------------------------------------------------------------------
# CSV persistence (deterministic byte-for-byte given config + seed)
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def steps_header(env: EnvModel) -> list[str]:
    actions = [f"action_{i}" for i in range(env.control_dim)]
    return (
        ["step"]
        + actions
        + ["stage_cost", "cum_cost", "best_cost", "mean_cost", "exploration"]
        + [f"state_{label}" for label in env.state_labels]
    )


def write_run(
    records: list[ExperimentRecord], out_dir, env: EnvModel, cfg: ExperimentConfig
) -> list[Path]:
    """Persist one run: steps_<seed>.csv per seed, episodes.csv, meta.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    header = steps_header(env)
    for record in records:
        path = out / f"steps_{record.seed}.csv"
        _write_csv(
            path,
            header,
            (
                [row.step, *row.action, row.stage_cost, row.cum_cost,
                 row.best_cost, row.mean_cost, row.exploration, *row.state]
                for row in record.rows
            ),
        )
        written.append(path)
    episodes = out / "episodes.csv"
    _write_csv(
        episodes,
        ["seed", "steps", "total_cost", "success", "steps_to_goal", "failed"],
        (
            [r.seed, len(r.rows), r.total_cost, r.success, r.steps_to_goal, r.failed]
            for r in records
        ),
    )
    written.append(episodes)
    meta = out / "meta.json"
    meta.write_text(json.dumps({"config": serialize_config(cfg)}, sort_keys=True, indent=2) + "\n")
    return written


def write_histogram(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(path, ["label", "bin_left", "bin_right", "count", "density"], rows)
    return path


def write_comparison(report: ComparisonReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "compare_summary.csv"
    _write_csv(
        summary,
        ["label", "median_total", "iqr_low", "iqr_high", "win_ratio", "success_rate"],
        (
            [label, report.medians[label], report.iqr[label][0], report.iqr[label][1],
             report.win_ratio[label], report.success_rate[label]]
            for label in report.labels
        ),
    )
    per_seed = out / "compare_per_seed.csv"
    _write_csv(
        per_seed,
        ["seed"] + report.labels,
        (
            [seed] + [report.totals[label][i] for label in report.labels]
            for i, seed in enumerate(report.seeds)
        ),
    )
    hist = write_histogram(report.histogram, out / "compare_hist.csv")
    return [summary, per_seed, hist]


def read_run(run_dir) -> tuple[str, ExperimentConfig | None, list[ExperimentRecord]]:
    """Load a previously written run directory back into records."""
    run_dir = Path(run_dir)
    episodes = run_dir / "episodes.csv"
    if not episodes.exists():
        raise InputError(f"not a run directory (no episodes.csv): {run_dir}")
    label, cfg = run_dir.name, None
    meta = run_dir / "meta.json"
    if meta.exists():
        data = json.loads(meta.read_text())
        cfg = load_config(data["config"])
        label = cfg.label
    records = []
    with episodes.open() as fh:
        for rec in csv.DictReader(fh):
            seed = int(rec["seed"])
            rows = []
            steps_path = run_dir / f"steps_{seed}.csv"
            if steps_path.exists():
                with steps_path.open() as sfh:
                    for raw in csv.DictReader(sfh):
                        action = tuple(
                            float(v) for k, v in raw.items() if k.startswith("action_")
                        )
                        state = tuple(float(v) for k, v in raw.items() if k.startswith("state_"))
                        rows.append(
                            StepRow(
                                step=int(raw["step"]),
                                action=action,
                                stage_cost=float(raw["stage_cost"]),
                                cum_cost=float(raw["cum_cost"]),
                                best_cost=float(raw["best_cost"]),
                                mean_cost=float(raw["mean_cost"]),
                                exploration=float(raw["exploration"]),
                                state=state,
                            )
                        )
            records.append(
                ExperimentRecord(
                    seed=seed,
                    rows=rows,
                    success=rec["success"] == "true",
                    total_cost=float(rec["total_cost"]),
                    steps_to_goal=int(rec["steps_to_goal"]) if rec["steps_to_goal"] else None,
                    failed=rec["failed"] == "true",
                    wall_s=0.0,
                )
            )
    return label, cfg, records


def run_summary_text(label: str, records: list[ExperimentRecord]) -> str:
    totals = np.array([r.total_cost for r in records])
    succ = float(np.mean([r.success for r in records]))
    goal_steps = [r.steps_to_goal for r in records if r.steps_to_goal is not None]
    med_goal = f"{int(np.median(goal_steps))}" if goal_steps else "-"
    q1, q3 = np.percentile(totals, 25), np.percentile(totals, 75)
    wall = np.sum([r.wall_s for r in records])
    return (
        f"{label}: seeds={len(records)} median_total={np.median(totals):.4f} "
        f"IQR=[{q1:.4f}, {q3:.4f}] success_rate={succ:.2f} "
        f"median_steps_to_goal={med_goal} wall={wall:.1f}s"
    )
