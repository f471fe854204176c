"""Command-line interface.

Subcommands:
  analyze   run the full pipeline over logs + registry and emit report files
  mop       per-episode entropy-onset detection, or threshold calibration
  simulate  generate synthetic corpora (study logs, step matrices, trajectories)
  validate  schema and consistency checks only, no analysis
  cost      token-cost accounting from a pricing stream

Exit codes: 0 success, 1 usage error, 2 input validation failure,
3 pipeline or internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .meltdown import (
    MeltdownError,
    MopConfig,
    calibrate_mop_baseline,
    calibrate_mop_f1,
    detect_mop,
)
from .metrics import MetricError, REGRESSORS
from .report import (
    InputError,
    PipelineError,
    PipelineOptions,
    compute_cost,
    emit_report,
    load_pricing,
    run_pipeline,
)
from .simulate import (
    DEFAULT_TOOL_POOL,
    SIM_MODELS,
    SimConfig,
    SimulationError,
    TrajectoryProfile,
    generate_trajectory,
    predicted_failcount_variance,
    predicted_success_bound,
    simulate_agent_study,
    simulate_steps,
    trajectory_episode,
)
from .trajectory import (
    BUCKETS,
    RegistryError,
    Subtask,
    TaskSpec,
    cross_validate,
    load_task_registry,
    parse_episode_log,
    write_episode_log,
    write_task_registry,
)

__all__ = ["build_parser", "entrypoint", "main"]

_FORMATS = ("csv", "json", "markdown")


class _UsageError(Exception):
    """Bad command line; exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _bucket_list(text: str) -> tuple[str, ...]:
    names = tuple(part.strip() for part in text.split(",") if part.strip())
    unknown = [n for n in names if n not in BUCKETS]
    if not names or unknown:
        raise ValueError(f"bucket list {text!r} must name buckets from {BUCKETS}")
    return names


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ValueError(f"{text!r} is not a comma-separated float list") from None


def build_parser() -> _Parser:
    parser = _Parser(prog="reliakit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    analyze = sub.add_parser("analyze", help="full metric pipeline over episode logs")
    analyze.add_argument("--logs", nargs="+", required=True, metavar="PATH",
                         help="episode log files (newline-delimited records)")
    analyze.add_argument("--registry", required=True, metavar="PATH",
                         help="task registry file")
    analyze.add_argument("--pricing", metavar="PATH",
                         help="pricing stream; enables the cost table")
    analyze.add_argument("--out", required=True, metavar="DIR",
                         help="output directory for report files")
    analyze.add_argument("--format", action="append", choices=_FORMATS,
                         help="output format; repeatable (default: all)")
    analyze.add_argument("--seed", type=int, default=0)
    analyze.add_argument("--bootstrap-b", type=int, default=10000,
                         help="bootstrap resamples for VAF intervals (0 disables)")
    analyze.add_argument("--ci-level", type=float, default=0.95)
    analyze.add_argument("--ci-method", choices=("wald", "wilson"), default="wald")
    analyze.add_argument("--mop-theta", type=float, default=1.711,
                         help="entropy level threshold in bits")
    analyze.add_argument("--mop-delta", type=float, default=0.0,
                         help="required entropy rise over one window span")
    analyze.add_argument("--mop-window", type=int, default=5)
    analyze.add_argument("--vaf-num", type=_bucket_list, default=("long", "very_long"),
                         metavar="BUCKETS", help="comma-separated numerator buckets")
    analyze.add_argument("--vaf-den", type=_bucket_list, default=("short", "medium"),
                         metavar="BUCKETS", help="comma-separated denominator buckets")
    analyze.add_argument("--regressor", choices=tuple(REGRESSORS),
                         default="bucket_index_1to4")
    analyze.add_argument("--emit-series", action="store_true",
                         help="write per-episode entropy series sidecars")
    analyze.set_defaults(handler=_cmd_analyze)

    mop = sub.add_parser("mop", help="entropy-onset detection or calibration")
    mop.add_argument("--logs", nargs="+", required=True, metavar="PATH")
    mop.add_argument("--out", metavar="DIR",
                     help="write mop.csv there instead of stdout")
    mop.add_argument("--mop-theta", type=float, default=1.711)
    mop.add_argument("--mop-delta", type=float, default=0.0)
    mop.add_argument("--mop-window", type=int, default=5)
    mop.add_argument("--calibrate", choices=("f1", "baseline"),
                     help="calibrate thresholds instead of detecting")
    mop.add_argument("--labels", metavar="PATH",
                     help="newline-delimited {episode_id, meltdown} records (f1 mode)")
    mop.add_argument("--percentile", type=float, default=0.95,
                     help="baseline percentile (baseline mode)")
    mop.set_defaults(handler=_cmd_mop)

    simulate = sub.add_parser("simulate", help="generate synthetic corpora")
    simulate.add_argument("--mode", choices=("study", "steps", "trajectories"),
                          required=True)
    simulate.add_argument("--out", required=True, metavar="DIR")
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--tasks-per-bucket", type=int, default=33)
    simulate.add_argument("--k", type=int, default=3, help="repeats per task")
    simulate.add_argument("--p", type=_float_list, default=(0.93, 0.94, 0.84, 0.82),
                          metavar="P4", help="pass rates: short,medium,long,very_long")
    simulate.add_argument("--model-id", default="sim-agent")
    simulate.add_argument("--scaffold", default="react")
    simulate.add_argument("--sim-model", choices=SIM_MODELS, default="iid")
    simulate.add_argument("--epsilon", type=float, default=0.05,
                          help="per-step failure rate")
    simulate.add_argument("--rho", type=float, default=0.0)
    simulate.add_argument("--gamma", type=float, default=0.0,
                          help="hazard growth rate")
    simulate.add_argument("--horizon", type=int, default=30)
    simulate.add_argument("--episodes", type=int, default=1000)
    simulate.add_argument("--profile", choices=("rote", "coherent", "spiral"),
                          default="spiral")
    simulate.add_argument("--length", type=int, default=40)
    simulate.add_argument("--spiral-start", type=int, default=20)
    simulate.add_argument("--count", type=int, default=10,
                          help="trajectories to generate")
    simulate.set_defaults(handler=_cmd_simulate)

    validate = sub.add_parser("validate", help="schema checks only")
    validate.add_argument("--logs", nargs="+", required=True, metavar="PATH")
    validate.add_argument("--registry", metavar="PATH",
                          help="also cross-check episodes against this registry")
    validate.set_defaults(handler=_cmd_validate)

    cost = sub.add_parser("cost", help="token-cost accounting only")
    cost.add_argument("--logs", nargs="+", required=True, metavar="PATH")
    cost.add_argument("--pricing", required=True, metavar="PATH")
    cost.add_argument("--out", metavar="DIR",
                      help="write cost.csv there instead of stdout")
    cost.set_defaults(handler=_cmd_cost)

    return parser


def _cmd_analyze(args: argparse.Namespace) -> int:
    formats = list(dict.fromkeys(args.format)) if args.format else list(_FORMATS)
    options = PipelineOptions(
        seed=args.seed,
        bootstrap_b=args.bootstrap_b,
        ci_level=args.ci_level,
        ci_method=args.ci_method,
        mop=MopConfig(window_w=args.mop_window, theta_h=args.mop_theta,
                      delta=args.mop_delta),
        vaf_numerator=tuple(args.vaf_num),
        vaf_denominator=tuple(args.vaf_den),
        regressor=args.regressor,
        emit_series=args.emit_series,
    )
    bundle = run_pipeline(args.logs, args.registry, args.pricing, options)
    written: list[Path] = []
    for fmt in formats:
        written.extend(emit_report(bundle, fmt, args.out))
    counts = bundle.run_metadata["episodes"]
    print(f"analyzed {counts['analyzed']} episodes"
          f" ({counts['infra_excluded']} infra-excluded,"
          f" {counts['join_excluded']} join-excluded);"
          f" wrote {len(set(written))} files to {args.out}")
    return 0


def _load_episodes(paths: Sequence[str]) -> list:
    episodes = []
    seen: set[str] = set()
    for path in paths:
        file_eps, _ = parse_episode_log(path)
        for ep in file_eps:
            if ep.episode_id not in seen:
                seen.add(ep.episode_id)
                episodes.append(ep)
    if not episodes:
        raise InputError("parse: no valid episodes")
    return episodes


def _load_labels(path: str) -> dict[str, bool]:
    labels: dict[str, bool] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RegistryError(f"labels line {lineno}: malformed JSON: {exc}") from exc
            if (not isinstance(record, dict)
                    or not isinstance(record.get("episode_id"), str)
                    or not isinstance(record.get("meltdown"), bool)):
                raise RegistryError(
                    f"labels line {lineno}: need episode_id (string) and meltdown (bool)")
            labels[record["episode_id"]] = record["meltdown"]
    return labels


def _cmd_mop(args: argparse.Namespace) -> int:
    episodes = _load_episodes(args.logs)
    if args.calibrate == "f1":
        if not args.labels:
            raise _UsageError("--calibrate f1 requires --labels")
        labels = _load_labels(args.labels)
        missing = sorted(ep.episode_id for ep in episodes
                         if ep.episode_id not in labels)
        if missing:
            raise InputError(f"labels: no label for episodes: {', '.join(missing[:5])}"
                             + (" ..." if len(missing) > 5 else ""))
        labeled = [(ep, labels[ep.episode_id]) for ep in episodes]
        result = calibrate_mop_f1(labeled, w=args.mop_window)
        print(f"theta_h={result.theta_h} delta={result.delta}"
              f" f1={result.f1:.4f} precision={result.precision:.4f}"
              f" recall={result.recall:.4f}")
        return 0
    if args.calibrate == "baseline":
        theta, delta = calibrate_mop_baseline(episodes, percentile=args.percentile,
                                              w=args.mop_window)
        print(f"theta_h={theta} delta={delta}")
        return 0

    config = MopConfig(window_w=args.mop_window, theta_h=args.mop_theta,
                       delta=args.mop_delta)
    rows = []
    for ep in episodes:
        result = detect_mop(ep, config)
        rows.append((ep.episode_id,
                     "" if result.onset_step is None else result.onset_step,
                     repr(result.max_entropy), result.too_short, result.melted))
    header = ("episode_id", "onset_step", "max_entropy", "too_short", "melted")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "mop.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        print(f"wrote {out / 'mop.csv'} ({len(rows)} episodes)")
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.mode == "study":
        if len(args.p) != len(BUCKETS):
            raise _UsageError(f"--p needs {len(BUCKETS)} rates, got {len(args.p)}")
        per_bucket = dict(zip(BUCKETS, args.p))
        corpus = simulate_agent_study(per_bucket, args.tasks_per_bucket, args.k,
                                      args.seed, model_id=args.model_id,
                                      scaffold=args.scaffold)
        write_task_registry(corpus.tasks, out / "tasks.jsonl")
        write_episode_log(corpus.episodes, out / "episodes.jsonl")
        print(f"wrote {len(corpus.tasks)} tasks and {len(corpus.episodes)} episodes"
              f" to {out}")
        return 0
    if args.mode == "steps":
        config = SimConfig(model=args.sim_model, epsilon=args.epsilon,
                           horizon_t=args.horizon, episodes=args.episodes,
                           seed=args.seed, rho=args.rho, hazard_gamma=args.gamma)
        failures = simulate_steps(config)
        np.savetxt(out / "steps.csv", failures.astype(int), fmt="%d", delimiter=",")
        fail_counts = failures.sum(axis=1)
        summary = {
            "model": config.model,
            "epsilon": config.epsilon,
            "rho": config.rho,
            "hazard_gamma": config.hazard_gamma,
            "horizon_t": config.horizon_t,
            "episodes": config.episodes,
            "seed": config.seed,
            "observed_all_success_rate": float(np.mean(fail_counts == 0)),
            "observed_failcount_variance": float(np.var(fail_counts)),
            "predicted_failcount_variance": predicted_failcount_variance(
                config.epsilon, config.rho, config.horizon_t),
            "predicted_success_lower_bound": predicted_success_bound(
                config.epsilon, config.rho, config.horizon_t),
        }
        (out / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"wrote {out / 'steps.csv'} and {out / 'summary.json'}")
        return 0

    spiral_start = args.spiral_start if args.profile == "spiral" else None
    profile = TrajectoryProfile(profile=args.profile, tool_pool=DEFAULT_TOOL_POOL,
                                spiral_start=spiral_start)
    task = TaskSpec(
        task_id="traj-task-00000", domain="SE", bucket="long",
        human_minutes_estimate=75.0, agent_steps_estimate=args.length,
        subtasks=(Subtask("s1", 0.25, ""), Subtask("s2", 0.35, ""),
                  Subtask("s3", 0.20, ""), Subtask("s4", 0.20, "")),
    )
    episodes = []
    for i in range(args.count):
        steps = generate_trajectory(profile, args.length, args.seed + i)
        episodes.append(trajectory_episode(
            f"traj-{args.profile}-{i:05d}", task, steps,
            model_id=args.model_id, scaffold=args.scaffold, repeat_index=i + 1))
    write_task_registry([task], out / "tasks.jsonl")
    write_episode_log(episodes, out / "episodes.jsonl")
    print(f"wrote {len(episodes)} {args.profile} trajectories to {out}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    n_errors = 0
    n_warnings = 0
    episodes = []
    reports = []
    for path in args.logs:
        file_eps, file_reports = parse_episode_log(path)
        episodes.extend(file_eps)
        reports.extend(file_reports)
    if args.registry:
        registry = {t.task_id: t for t in load_task_registry(args.registry)}
        _, join_reports = cross_validate(episodes, registry)
        reports.extend(join_reports)
    for report in reports:
        for issue in report.errors:
            n_errors += 1
            print(f"ERROR {report.episode_id} {issue.code}: {issue.message}")
        for issue in report.warnings:
            n_warnings += 1
            print(f"WARNING {report.episode_id} {issue.code}: {issue.message}")
    print(f"{len(episodes)} episodes parsed, {n_errors} errors, {n_warnings} warnings")
    return 2 if n_errors else 0


def _cmd_cost(args: argparse.Namespace) -> int:
    episodes = _load_episodes(args.logs)
    pricing = load_pricing(args.pricing)
    report = compute_cost(episodes, pricing)
    rows = [
        (model_id, mc.n_episodes, mc.tokens_in, mc.tokens_out, repr(mc.total_cost))
        for model_id, mc in report.per_model.items()
    ]
    rows.append(("(all)", len(report.per_episode),
                 sum(c.tokens_in for c in report.per_episode),
                 sum(c.tokens_out for c in report.per_episode),
                 repr(report.total_cost)))
    header = ("model_id", "n_episodes", "tokens_in", "tokens_out", "total_cost")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "cost.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        print(f"wrote {out / 'cost.csv'}")
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "handler", None):
            parser.print_help(sys.stderr)
            return 1
        return args.handler(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (RegistryError, InputError, MeltdownError, SimulationError,
            MetricError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - catch-all for exit-code contract
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())
