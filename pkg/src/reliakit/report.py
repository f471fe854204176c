"""Full analysis pipeline and file emission.

run_pipeline ingests episode logs, the task registry, and optionally a
pricing stream, and produces a ReportBundle: run metadata plus the named
tables (rdc, gds_pass, vaf, domain, scaffold_delta, meltdown, cost,
decomposition). emit_report renders a bundle to files in one format.

Determinism contract: the bundle and every emitted byte are a pure
function of (input file contents, options). Nothing here reads clocks,
hostnames, or environment.

Error taxonomy: InputError marks problems with what the user supplied
(unreadable paths, malformed registry, no valid episodes, missing pricing)
and maps to exit code 2 in the CLI; PipelineError marks internal failures
(exit code 3). Both carry the owning stage name in their message. A bundle
is only returned, and files only written, after every stage has finished,
so partial table sets are never written on stage failure.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .meltdown import MeltdownCell, MopConfig, detect_mop, meltdown_table
from .metrics import (
    DEFAULT_VAF_DENOMINATOR,
    DEFAULT_VAF_NUMERATOR,
    DegenerateStatisticError,
    MetricCurve,
    MetricError,
    REGRESSORS,
    decomposition_gain,
    domain_stratify,
    outcome_groups,
    per_task_pass1,
    rdc,
    rds,
    scaffold_delta,
    vaf,
)
from .trajectory import (
    BUCKETS,
    Episode,
    RegistryError,
    TaskSpec,
    ValidationIssue,
    ValidationReport,
    cross_validate,
    load_task_registry,
    parse_episode_log,
)

__all__ = [
    "CostReport",
    "EpisodeCost",
    "InputError",
    "ModelCost",
    "PipelineError",
    "PipelineOptions",
    "PricingEntry",
    "ReportBundle",
    "Table",
    "TABLE_ORDER",
    "compute_cost",
    "emit_report",
    "load_pricing",
    "run_pipeline",
]


class InputError(Exception):
    """A problem with user-supplied inputs; CLI exit code 2."""


class PipelineError(Exception):
    """An internal pipeline failure; CLI exit code 3."""


# --- pricing ---------------------------------------------------------------

@dataclass(frozen=True)
class PricingEntry:
    model_id: str
    input_per_million: float
    output_per_million: float


def load_pricing(source: str | Path | Iterable[str]) -> list[PricingEntry]:
    """Load a pricing stream: one record per line with model_id and
    per-million token prices. Defects raise RegistryError with the line."""
    entries: list[PricingEntry] = []
    seen: dict[str, int] = {}
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    else:
        lines = list(source)
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RegistryError(f"pricing line {lineno}: malformed JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise RegistryError(f"pricing line {lineno}: record is not an object")
        model_id = record.get("model_id")
        if not isinstance(model_id, str) or not model_id:
            raise RegistryError(f"pricing line {lineno}: model_id must be a non-empty string")
        if model_id in seen:
            raise RegistryError(
                f"pricing line {lineno}: duplicate model_id {model_id!r}"
                f" (first seen on line {seen[model_id]})")
        prices = {}
        for key in ("input_per_million", "output_per_million"):
            value = record.get(key)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
                raise RegistryError(f"pricing line {lineno}: {key} must be a non-negative number")
            prices[key] = float(value)
        seen[model_id] = lineno
        entries.append(PricingEntry(model_id=model_id, **prices))
    return entries


@dataclass(frozen=True)
class EpisodeCost:
    episode_id: str
    model_id: str
    tokens_in: int
    tokens_out: int
    cost: float


@dataclass(frozen=True)
class ModelCost:
    n_episodes: int
    tokens_in: int
    tokens_out: int
    total_cost: float


@dataclass(frozen=True)
class CostReport:
    per_episode: tuple[EpisodeCost, ...]
    per_model: Mapping[str, ModelCost]
    total_cost: float


def compute_cost(episodes: Iterable[Episode], pricing: Sequence[PricingEntry]) -> CostReport:
    """Token cost per episode and aggregates, at per-million prices.

    Every model present in the episodes must have a pricing entry; the
    error lists all that are missing. Aggregation uses exact summation so
    the grand total equals the sum of per-episode costs.
    """
    prices = {p.model_id: p for p in pricing}
    episode_list = list(episodes)
    missing = sorted({ep.model_id for ep in episode_list} - set(prices))
    if missing:
        raise InputError(f"cost: no pricing entry for models: {', '.join(missing)}")
    per_episode: list[EpisodeCost] = []
    for ep in episode_list:
        entry = prices[ep.model_id]
        step_costs = [
            (s.tokens_in * entry.input_per_million + s.tokens_out * entry.output_per_million) / 1e6
            for s in ep.steps
        ]
        per_episode.append(EpisodeCost(
            episode_id=ep.episode_id,
            model_id=ep.model_id,
            tokens_in=sum(s.tokens_in for s in ep.steps),
            tokens_out=sum(s.tokens_out for s in ep.steps),
            cost=math.fsum(step_costs),
        ))
    per_model: dict[str, ModelCost] = {}
    for model_id in sorted({c.model_id for c in per_episode}):
        rows = [c for c in per_episode if c.model_id == model_id]
        per_model[model_id] = ModelCost(
            n_episodes=len(rows),
            tokens_in=sum(c.tokens_in for c in rows),
            tokens_out=sum(c.tokens_out for c in rows),
            total_cost=math.fsum(c.cost for c in rows),
        )
    return CostReport(
        per_episode=tuple(per_episode),
        per_model=per_model,
        total_cost=math.fsum(c.cost for c in per_episode),
    )


# --- options and bundle -----------------------------------------------------

@dataclass(frozen=True)
class PipelineOptions:
    seed: int = 0
    bootstrap_b: int = 10000
    ci_level: float = 0.95
    ci_method: str = "wald"
    mop: MopConfig = field(default_factory=MopConfig)
    vaf_numerator: tuple[str, ...] = DEFAULT_VAF_NUMERATOR
    vaf_denominator: tuple[str, ...] = DEFAULT_VAF_DENOMINATOR
    regressor: str = "bucket_index_1to4"
    emit_series: bool = False

    def __post_init__(self) -> None:
        if self.regressor not in REGRESSORS:
            raise InputError(f"options: unknown regressor {self.regressor!r}")
        if self.ci_method not in ("wald", "wilson"):
            raise InputError(f"options: unknown ci_method {self.ci_method!r}")
        for name, buckets in (("vaf_numerator", self.vaf_numerator),
                              ("vaf_denominator", self.vaf_denominator)):
            if not buckets or any(b not in BUCKETS for b in buckets):
                raise InputError(f"options: bad {name} bucket set {buckets!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "bootstrap_b": self.bootstrap_b,
            "ci_level": self.ci_level,
            "ci_method": self.ci_method,
            "mop": {"window_w": self.mop.window_w, "theta_h": self.mop.theta_h,
                    "delta": self.mop.delta},
            "vaf_numerator": list(self.vaf_numerator),
            "vaf_denominator": list(self.vaf_denominator),
            "regressor": self.regressor,
            "emit_series": self.emit_series,
        }


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # one of: str, int, fraction, number, currency


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]
    rows: tuple[tuple, ...]  # None cells are suppressed values


TABLE_ORDER = ("rdc", "gds_pass", "vaf", "domain", "scaffold_delta",
               "meltdown", "cost", "decomposition")


@dataclass(frozen=True)
class ReportBundle:
    run_metadata: dict[str, Any]
    tables: Mapping[str, Table]
    series: Mapping[str, tuple[tuple[int, float], ...]]


# --- pipeline ---------------------------------------------------------------

def _read_input(path: str | Path, stage: str) -> tuple[bytes, str, int]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"{stage}: cannot read {path}: {exc}") from exc
    digest = hashlib.sha256(data).hexdigest()
    lines = sum(1 for ln in data.splitlines() if ln.strip())
    return data, digest, lines


def _count_issue(reports: Iterable[ValidationReport], code: str) -> int:
    total = 0
    for report in reports:
        issues: tuple[ValidationIssue, ...] = report.errors + report.warnings
        if any(issue.code == code for issue in issues):
            total += 1
    return total


def _pooled_pass1(episodes: Sequence[Episode], registry: Mapping[str, TaskSpec],
                  buckets: Sequence[str]) -> float | None:
    pool = [ep for ep in episodes if registry[ep.task_id].bucket in buckets]
    if not pool:
        return None
    return sum(1 for ep in pool if ep.passed) / len(pool)


def run_pipeline(
    log_paths: Sequence[str | Path],
    registry_path: str | Path,
    pricing_path: str | Path | None = None,
    options: PipelineOptions | None = None,
) -> ReportBundle:
    """Run every analysis stage over the given inputs. See module docstring
    for the error taxonomy; the bundle is complete or absent, never partial.
    """
    opts = options or PipelineOptions()
    if not log_paths:
        raise InputError("parse: no log paths given")

    # registry
    registry_bytes, registry_sha, registry_lines = _read_input(registry_path, "registry")
    try:
        tasks = load_task_registry(io.StringIO(registry_bytes.decode("utf-8")))
    except RegistryError as exc:
        raise InputError(f"registry: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise InputError(f"registry: {registry_path} is not UTF-8: {exc}") from exc
    registry = {t.task_id: t for t in tasks}

    # parse (with cross-file dedup keeping the first occurrence)
    log_meta = []
    episodes: list[Episode] = []
    reports: list[ValidationReport] = []
    seen_ids: set[str] = set()
    for path in log_paths:
        data, sha, lines = _read_input(path, "parse")
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"parse: {path} is not UTF-8: {exc}") from exc
        file_eps, file_reports = parse_episode_log(io.StringIO(text))
        reports.extend(file_reports)
        for ep in file_eps:
            if ep.episode_id in seen_ids:
                reports.append(ValidationReport(
                    episode_id=ep.episode_id,
                    warnings=(ValidationIssue(
                        "duplicate_episode_id",
                        f"{path}: duplicate of {ep.episode_id!r} from an earlier log;"
                        " keeping the first"),),
                ))
                continue
            seen_ids.add(ep.episode_id)
            episodes.append(ep)
        log_meta.append({"path": str(path), "sha256": sha, "lines": lines})
    if not episodes:
        raise InputError("parse: no valid episodes")

    # join
    joined, join_reports = cross_validate(episodes, registry)
    reports.extend(join_reports)
    analysis = [ep for ep in joined if not ep.is_infra_failure]
    n_infra = len(joined) - len(analysis)
    if not analysis:
        raise InputError("join: no valid episodes remain after registry join"
                         " and infra exclusion")

    # pricing
    pricing = None
    pricing_meta = None
    if pricing_path is not None:
        pricing_bytes, pricing_sha, pricing_lines = _read_input(pricing_path, "cost")
        try:
            pricing = load_pricing(io.StringIO(pricing_bytes.decode("utf-8")))
        except RegistryError as exc:
            raise InputError(f"cost: {exc}") from exc
        except UnicodeDecodeError as exc:
            raise InputError(f"cost: {pricing_path} is not UTF-8: {exc}") from exc
        pricing_meta = {"path": str(pricing_path), "sha256": pricing_sha,
                        "lines": pricing_lines}

    try:
        tables, series = _build_tables(analysis, episodes, registry, pricing, opts)
    except (InputError, PipelineError):
        raise
    except Exception as exc:  # pragma: no cover - defensive stage wrapper
        raise PipelineError(f"metrics: {exc!r}") from exc

    n_parse_errors = sum(1 for r in reports if r.fatal and not _is_join_code(r))
    n_join_excluded = sum(1 for r in reports if r.fatal and _is_join_code(r))
    n_duplicates = _count_issue(reports, "duplicate_episode_id")
    total_lines = sum(m["lines"] for m in log_meta)
    counts = {
        "log_lines": total_lines,
        "parse_errors": n_parse_errors,
        "duplicates": n_duplicates,
        "parsed": len(episodes),
        "join_excluded": n_join_excluded,
        "infra_excluded": n_infra,
        "analyzed": len(analysis),
    }
    conservation = (
        total_lines == n_parse_errors + n_duplicates + len(episodes)
        and len(episodes) == n_join_excluded + n_infra + len(analysis)
    )

    options_dict = opts.to_dict()
    config_hash = hashlib.sha256(
        json.dumps(options_dict, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()
    issue_counts: dict[str, int] = {}
    for report in reports:
        for issue in report.errors + report.warnings:
            issue_counts[issue.code] = issue_counts.get(issue.code, 0) + 1

    metadata = {
        "schema_version": "1",
        "generator": {"name": "reliakit", "version": _package_version()},
        "inputs": {
            "logs": log_meta,
            "registry": {"path": str(registry_path), "sha256": registry_sha,
                         "lines": registry_lines},
            "pricing": pricing_meta,
        },
        "options": options_dict,
        "config_hash": config_hash,
        "episodes": counts,
        "conservation_holds": conservation,
        "validation_issues": {code: issue_counts[code] for code in sorted(issue_counts)},
    }
    return ReportBundle(run_metadata=metadata, tables=tables, series=series)


def _is_join_code(report: ValidationReport) -> bool:
    return any(issue.code in ("unknown_task", "subtask_mismatch") for issue in report.errors)


def _package_version() -> str:
    from . import __version__
    return __version__


def _build_tables(
    analysis: Sequence[Episode],
    all_parsed: Sequence[Episode],
    registry: Mapping[str, TaskSpec],
    pricing: Sequence[PricingEntry] | None,
    opts: PipelineOptions,
) -> tuple[dict[str, Table], dict[str, tuple[tuple[int, float], ...]]]:
    selections = sorted({(ep.model_id, ep.scaffold) for ep in analysis})

    rdc_rows: list[tuple] = []
    gds_rows: list[tuple] = []
    vaf_rows: list[tuple] = []
    decomp_rows: list[tuple] = []
    curves: dict[tuple[str, str], MetricCurve] = {}
    for model_id, scaffold in selections:
        pass_curve = rdc(analysis, registry, "pass1", model_id=model_id, scaffold=scaffold,
                         ci_level=opts.ci_level, ci_method=opts.ci_method)
        gds_curve = rdc(analysis, registry, "gds", model_id=model_id, scaffold=scaffold)
        curves[(model_id, scaffold)] = pass_curve
        for bucket, point in pass_curve.points.items():
            rdc_rows.append((model_id, scaffold, bucket, point.value,
                             point.ci_low, point.ci_high, point.n_tasks, point.n_episodes))
            gds_point = gds_curve.points[bucket]
            gds_rows.append((model_id, scaffold, bucket, gds_point.value, point.value,
                             gds_point.n_tasks, gds_point.n_episodes))

        groups = outcome_groups(analysis, registry, model_id=model_id, scaffold=scaffold)
        per_task = per_task_pass1(groups)
        own = [ep for ep in analysis
               if ep.model_id == model_id and ep.scaffold == scaffold]
        den_pass = _pooled_pass1(own, registry, opts.vaf_denominator)
        num_pass = _pooled_pass1(own, registry, opts.vaf_numerator)
        try:
            result = vaf(per_task, registry, opts.vaf_numerator, opts.vaf_denominator,
                         model_id=model_id, b=opts.bootstrap_b, ci_level=opts.ci_level,
                         seed=opts.seed)
            vaf_rows.append((model_id, scaffold, result.vaf, result.ci_low, result.ci_high,
                             result.n_num_tasks, result.n_den_tasks,
                             "+".join(result.numerator_buckets),
                             "+".join(result.denominator_buckets),
                             den_pass, num_pass, "ok"))
        except DegenerateStatisticError:
            vaf_rows.append((model_id, scaffold, None, None, None, None, None,
                             "+".join(opts.vaf_numerator), "+".join(opts.vaf_denominator),
                             den_pass, num_pass, "degenerate_denominator"))
        except MetricError:
            vaf_rows.append((model_id, scaffold, None, None, None, None, None,
                             "+".join(opts.vaf_numerator), "+".join(opts.vaf_denominator),
                             den_pass, num_pass, "unavailable"))

        short = pass_curve.points.get("short")
        very_long = pass_curve.points.get("very_long")
        gain = decomposition_gain(pass_curve) if short and very_long else None
        try:
            slope = rds(pass_curve, opts.regressor)
        except MetricError:
            slope = None
        decomp_rows.append((model_id, scaffold,
                            short.value if short else None,
                            very_long.value if very_long else None,
                            gain, slope, opts.regressor))

    domain = domain_stratify(analysis, registry, "gds")
    domain_rows: list[tuple] = []
    for dom in sorted({d for d, _ in domain.cells}):
        values = []
        counts = []
        for bucket in BUCKETS:
            cell = domain.cells.get((dom, bucket))
            values.append(cell.value if cell else None)
            counts.append(cell.n_episodes if cell else 0)
        domain_rows.append((dom, *values, domain.drops.get(dom), *counts))

    scaffold_rows = [
        (row.model_id, row.react_value, row.memory_value, row.delta, row.label,
         row.n_react, row.n_memory)
        for row in scaffold_delta(analysis, registry)
    ]

    melt = meltdown_table(analysis, registry, opts.mop)
    melt_rows = [
        (model_id, bucket, cell.rate, cell.median_onset, cell.n_events,
         cell.n_episodes, cell.n_too_short)
        for (model_id, bucket), cell in melt.items()
    ]

    tables: dict[str, Table] = {}
    tables["rdc"] = Table("rdc", (
        Column("model_id", "str"), Column("scaffold", "str"), Column("bucket", "str"),
        Column("pass1", "fraction"), Column("ci_low", "fraction"), Column("ci_high", "fraction"),
        Column("n_tasks", "int"), Column("n_episodes", "int"),
    ), tuple(rdc_rows))
    tables["gds_pass"] = Table("gds_pass", (
        Column("model_id", "str"), Column("scaffold", "str"), Column("bucket", "str"),
        Column("gds", "fraction"), Column("pass1", "fraction"),
        Column("n_tasks", "int"), Column("n_episodes", "int"),
    ), tuple(gds_rows))
    tables["vaf"] = Table("vaf", (
        Column("model_id", "str"), Column("scaffold", "str"),
        Column("vaf", "number"), Column("ci_low", "number"), Column("ci_high", "number"),
        Column("n_num_tasks", "int"), Column("n_den_tasks", "int"),
        Column("numerator_buckets", "str"), Column("denominator_buckets", "str"),
        Column("denominator_pass1", "fraction"), Column("numerator_pass1", "fraction"),
        Column("status", "str"),
    ), tuple(vaf_rows))
    tables["domain"] = Table("domain", (
        Column("domain", "str"),
        Column("short", "fraction"), Column("medium", "fraction"),
        Column("long", "fraction"), Column("very_long", "fraction"),
        Column("drop", "fraction"),
        Column("n_short", "int"), Column("n_medium", "int"),
        Column("n_long", "int"), Column("n_very_long", "int"),
    ), tuple(domain_rows))
    tables["scaffold_delta"] = Table("scaffold_delta", (
        Column("model_id", "str"),
        Column("react_gds", "fraction"), Column("memory_gds", "fraction"),
        Column("delta", "fraction"), Column("label", "str"),
        Column("n_react", "int"), Column("n_memory", "int"),
    ), tuple(scaffold_rows))
    tables["meltdown"] = Table("meltdown", (
        Column("model_id", "str"), Column("bucket", "str"),
        Column("rate", "fraction"), Column("median_onset", "int"),
        Column("n_events", "int"), Column("n_episodes", "int"), Column("n_too_short", "int"),
    ), tuple(melt_rows))
    if pricing is not None:
        cost = compute_cost(all_parsed, pricing)
        cost_rows: list[tuple] = [
            (model_id, mc.n_episodes, mc.tokens_in, mc.tokens_out, mc.total_cost,
             mc.total_cost / mc.n_episodes)
            for model_id, mc in cost.per_model.items()
        ]
        cost_rows.append(("(all)", len(cost.per_episode),
                          sum(c.tokens_in for c in cost.per_episode),
                          sum(c.tokens_out for c in cost.per_episode),
                          cost.total_cost,
                          cost.total_cost / len(cost.per_episode)))
        tables["cost"] = Table("cost", (
            Column("model_id", "str"), Column("n_episodes", "int"),
            Column("tokens_in", "int"), Column("tokens_out", "int"),
            Column("total_cost", "currency"), Column("mean_cost_per_episode", "currency"),
        ), tuple(cost_rows))
    tables["decomposition"] = Table("decomposition", (
        Column("model_id", "str"), Column("scaffold", "str"),
        Column("pass1_short", "fraction"), Column("pass1_very_long", "fraction"),
        Column("gain", "fraction"), Column("rds_slope", "number"),
        Column("regressor", "str"),
    ), tuple(decomp_rows))

    series: dict[str, tuple[tuple[int, float], ...]] = {}
    if opts.emit_series:
        for ep in analysis:
            series[ep.episode_id] = detect_mop(ep, opts.mop).entropy_series
    return tables, series


# --- emission ----------------------------------------------------------------

def _format_markdown(value: Any, kind: str) -> str:
    if value is None:
        return "---"
    if kind == "fraction":
        return f"{100.0 * value:.1f}%"
    if kind == "number":
        return f"{value:.6g}"
    if kind == "currency":
        return f"{value:.4f}"
    return str(value)


def _format_csv(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _safe_filename(episode_id: str) -> str:
    cleaned = re.sub(r"[^A-Za-z0-9._-]", "_", episode_id)
    if cleaned != episode_id:
        digest = hashlib.sha256(episode_id.encode("utf-8")).hexdigest()[:12]
        cleaned = f"{cleaned}-{digest}"
    return cleaned


def _write(path: Path, text: str) -> Path:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"emit: cannot write {path}: {exc}") from exc
    return path


def emit_report(bundle: ReportBundle, fmt: str, out_dir: str | Path) -> list[Path]:
    """Render every table of the bundle in one format, plus run metadata
    and any entropy-series sidecars. Returns the written paths.

    Markdown renders fractions as one-decimal percentages and suppressed
    cells as "---"; csv leaves suppressed cells empty and json renders
    them as null, with full float precision in both.
    """
    if fmt not in ("csv", "json", "markdown"):
        raise InputError(f"emit: unknown format {fmt!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"emit: cannot create {out}: {exc}") from exc

    written: list[Path] = []
    written.append(_write(
        out / "run_metadata.json",
        json.dumps(bundle.run_metadata, indent=2, sort_keys=True) + "\n"))

    for name in TABLE_ORDER:
        table = bundle.tables.get(name)
        if table is None:
            continue
        if fmt == "csv":
            buffer = io.StringIO()
            writer = csv.writer(buffer, lineterminator="\n")
            writer.writerow([c.name for c in table.columns])
            for row in table.rows:
                writer.writerow([_format_csv(v) for v in row])
            written.append(_write(out / f"{name}.csv", buffer.getvalue()))
        elif fmt == "json":
            payload = {
                "name": table.name,
                "columns": [{"name": c.name, "kind": c.kind} for c in table.columns],
                "rows": [
                    {c.name: v for c, v in zip(table.columns, row)}
                    for row in table.rows
                ],
            }
            written.append(_write(out / f"{name}.json",
                                  json.dumps(payload, indent=2) + "\n"))
        else:
            lines = [
                "| " + " | ".join(c.name for c in table.columns) + " |",
                "| " + " | ".join("---" for _ in table.columns) + " |",
            ]
            for row in table.rows:
                cells = [_format_markdown(v, c.kind) for c, v in zip(table.columns, row)]
                lines.append("| " + " | ".join(cells) + " |")
            written.append(_write(out / f"{name}.md", "\n".join(lines) + "\n"))

    if bundle.series:
        series_dir = out / "series"
        try:
            series_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InputError(f"emit: cannot create {series_dir}: {exc}") from exc
        for episode_id in sorted(bundle.series):
            payload = {
                "episode_id": episode_id,
                "series": [[t, h] for t, h in bundle.series[episode_id]],
            }
            written.append(_write(series_dir / f"{_safe_filename(episode_id)}.json",
                                  json.dumps(payload, indent=2) + "\n"))
    return written
