"""Population-level reliability statistics over episode collections.

Inputs are the immutable episodes and tasks from :mod:`reliakit.trajectory`.
Everything here is a pure function; episodes whose termination is
``infra_error`` are excluded from every denominator before any statistic
is formed. Rates are kept as fractions throughout; formatting to percent
happens only at the report boundary.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .rng import substream
from .trajectory import BUCKETS, Episode, TaskSpec, episode_gds

__all__ = [
    "BUCKET_MINUTES_MIDPOINT",
    "DEFAULT_GEOMETRIC_EXPONENTS",
    "DEFAULT_VAF_DENOMINATOR",
    "DEFAULT_VAF_NUMERATOR",
    "REGRESSORS",
    "SCAFFOLD_NEUTRAL_BAND",
    "CurvePoint",
    "DegenerateStatisticError",
    "MetricCurve",
    "MetricError",
    "MetricWarning",
    "ScaffoldComparison",
    "DomainCell",
    "DomainTable",
    "TaskOutcomeGroup",
    "VafResult",
    "bootstrap_ci",
    "decomposition_gain",
    "domain_stratify",
    "early_failure_rate",
    "geometric_baseline",
    "ols_slope",
    "outcome_groups",
    "pass_at_1",
    "pass_pow_k",
    "per_task_pass1",
    "rdc",
    "rds",
    "scaffold_delta",
    "superlinearity_ratio",
    "vaf",
    "wald_ci",
    "wald_halfwidth",
    "wald_interval",
    "wilson_ci",
    "wilson_interval",
]


class MetricError(ValueError):
    """Raised when a statistic's preconditions are not met."""


class DegenerateStatisticError(MetricError):
    """A statistic is undefined on this input (for example a zero-variance
    denominator); this signals a saturated or floored population, not a bug."""


class MetricWarning(UserWarning):
    """Soft statistical issues: ragged repeat counts, skipped groups."""


# Midpoint of each duration bucket's human-minutes band, used as the
# physical-time regressor for decay slopes.
BUCKET_MINUTES_MIDPOINT = {"short": 2.5, "medium": 17.5, "long": 75.0, "very_long": 150.0}

REGRESSORS = ("bucket_index_1to4", "bucket_index_0to3", "human_minutes_midpoint")

DEFAULT_VAF_NUMERATOR = ("long", "very_long")
DEFAULT_VAF_DENOMINATOR = ("short", "medium")

# short/medium/long exponents follow the worked early-decay examples; the
# very_long value extrapolates the doubling pattern and reports label it so.
DEFAULT_GEOMETRIC_EXPONENTS = {"short": 1, "medium": 2, "long": 4, "very_long": 8}

SCAFFOLD_NEUTRAL_BAND = 0.03
# Absolute grace applied to the neutrality band so a delta that is 0.03 in
# exact arithmetic is not pushed over the boundary by float residue.
_NEUTRAL_GRACE = 1e-9


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def _pvar(values: Sequence[float]) -> float:
    """Population variance with order-independent summation."""
    m = _mean(values)
    return math.fsum((v - m) ** 2 for v in values) / len(values)


def _countable(episodes: Iterable[Episode]) -> list[Episode]:
    return [ep for ep in episodes if not ep.is_infra_failure]


# --- outcome grouping -----------------------------------------------------

@dataclass(frozen=True)
class TaskOutcomeGroup:
    """All repeats of one (task, model, scaffold) triple.

    ``repeats`` holds (passed, gds) per episode in input order.
    """

    task_id: str
    model_id: str
    scaffold: str
    repeats: tuple[tuple[bool, float], ...]

    @property
    def k(self) -> int:
        return len(self.repeats)


def outcome_groups(
    episodes: Iterable[Episode],
    registry: Mapping[str, TaskSpec],
    *,
    model_id: str | None = None,
    scaffold: str | None = None,
) -> list[TaskOutcomeGroup]:
    """Group non-infra episodes by (task, model, scaffold), in input order."""
    collected: dict[tuple[str, str, str], list[tuple[bool, float]]] = {}
    for ep in _countable(episodes):
        if model_id is not None and ep.model_id != model_id:
            continue
        if scaffold is not None and ep.scaffold != scaffold:
            continue
        task = registry.get(ep.task_id)
        if task is None:
            raise MetricError(f"episode {ep.episode_id!r}: task {ep.task_id!r} not in registry")
        key = (ep.task_id, ep.model_id, ep.scaffold)
        collected.setdefault(key, []).append((ep.passed, episode_gds(ep, task)))
    return [
        TaskOutcomeGroup(task_id=t, model_id=m, scaffold=s, repeats=tuple(reps))
        for (t, m, s), reps in collected.items()
    ]


def pass_at_1(groups: Sequence[TaskOutcomeGroup]) -> float:
    """Fraction of all episodes (every repeat counted) that passed."""
    total = sum(g.k for g in groups)
    if total == 0:
        raise MetricError("pass_at_1: empty input")
    passed = sum(1 for g in groups for ok, _ in g.repeats if ok)
    return passed / total


def pass_pow_k(groups: Sequence[TaskOutcomeGroup]) -> float:
    """Fraction of tasks whose every repeat passed, each group judged at
    its own k. Ragged ks are legal but flagged, since a group that lost a
    repeat faces an easier all-pass bar."""
    if not groups:
        raise MetricError("pass_pow_k: empty input")
    ks = sorted({g.k for g in groups})
    if len(ks) > 1:
        warnings.warn(f"pass_pow_k: mixed repeat counts {ks}; using each group's own k",
                      MetricWarning, stacklevel=2)
    elif ks[0] < 2:
        warnings.warn("pass_pow_k: k=1 groups reduce this to pass_at_1",
                      MetricWarning, stacklevel=2)
    all_pass = sum(1 for g in groups if all(ok for ok, _ in g.repeats))
    return all_pass / len(groups)


def per_task_pass1(groups: Sequence[TaskOutcomeGroup]) -> dict[str, float]:
    """Per-task pass fraction over that task's own repeats.

    Groups must come from a single (model, scaffold) selection; a repeated
    task_id would silently conflate models, so it is an error here.
    """
    out: dict[str, float] = {}
    for g in groups:
        if g.task_id in out:
            raise MetricError(
                f"per_task_pass1: task {g.task_id!r} appears in more than one group;"
                " filter to a single model and scaffold first")
        out[g.task_id] = sum(1 for ok, _ in g.repeats if ok) / g.k
    return out


# --- confidence intervals -------------------------------------------------

def _z(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise MetricError(f"confidence level {level} outside (0, 1)")
    return NormalDist().inv_cdf((1.0 + level) / 2.0)


def wald_halfwidth(p_hat: float, n: int, level: float = 0.95) -> float:
    """Unclamped normal-approximation half-width z * sqrt(p(1-p)/n)."""
    if n < 1:
        raise MetricError("wald_halfwidth: n must be >= 1")
    return _z(level) * math.sqrt(p_hat * (1.0 - p_hat) / n)


def wald_interval(p_hat: float, n: int, level: float = 0.95) -> tuple[float, float]:
    """Wald interval around an already-computed proportion, clamped to [0, 1].

    Degenerate at p_hat 0 or 1 by construction: the half-width collapses
    before clamping ever applies.
    """
    if not 0.0 <= p_hat <= 1.0:
        raise MetricError(f"wald_interval: p_hat {p_hat} outside [0, 1]")
    half = wald_halfwidth(p_hat, n, level)
    return max(0.0, p_hat - half), min(1.0, p_hat + half)


def wald_ci(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if not isinstance(successes, int) or not isinstance(n, int):
        raise MetricError("wald_ci: successes and n must be integers")
    if n < 1 or not 0 <= successes <= n:
        raise MetricError(f"wald_ci: need 0 <= successes <= n with n >= 1, got {successes}/{n}")
    return wald_interval(successes / n, n, level)


def wilson_interval(p_hat: float, n: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval; better behaved near 0/1 than Wald."""
    if not 0.0 <= p_hat <= 1.0:
        raise MetricError(f"wilson_interval: p_hat {p_hat} outside [0, 1]")
    if n < 1:
        raise MetricError("wilson_interval: n must be >= 1")
    z = _z(level)
    denom = 1.0 + z * z / n
    center = (p_hat + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4 * n * n))
    low = max(0.0, center - half)
    high = min(1.0, center + half)
    # At the boundaries the score equation has an exact root at p_hat itself;
    # evaluating it in floats leaves dust that would exclude the estimate.
    if p_hat == 0.0:
        low = 0.0
    if p_hat == 1.0:
        high = 1.0
    return low, high


def wilson_ci(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n < 1 or not 0 <= successes <= n:
        raise MetricError(f"wilson_ci: need 0 <= successes <= n with n >= 1, got {successes}/{n}")
    return wilson_interval(successes / n, n, level)


_CI_METHODS: dict[str, Callable[[float, int, float], tuple[float, float]]] = {
    "wald": wald_interval,
    "wilson": wilson_interval,
}


# --- decay curves ---------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    value: float
    n_tasks: int
    ci_low: float
    ci_high: float
    n_episodes: int


@dataclass(frozen=True)
class MetricCurve:
    """Bucket-indexed reliability curve for one (model, scaffold) selection.

    ``points`` is keyed by bucket name in duration order. The interval is a
    task-count Wald/Wilson interval for pass1; for passk and gds no interval
    method is defined and the interval collapses to the point value.
    """

    metric_name: str
    points: Mapping[str, CurvePoint]


_CURVE_METRICS = ("pass1", "passk", "gds")


def rdc(
    episodes: Iterable[Episode],
    registry: Mapping[str, TaskSpec],
    metric: str = "pass1",
    *,
    model_id: str | None = None,
    scaffold: str | None = None,
    ci_level: float = 0.95,
    ci_method: str = "wald",
) -> MetricCurve:
    """Reliability decay curve: duration bucket to metric value.

    The confidence interval for pass1 is computed at the bucket's task
    count, not its episode count: repeats of one task share the task and
    are not independent draws, and the task count is what reproduces the
    published interval widths.
    """
    if metric not in _CURVE_METRICS:
        raise MetricError(f"rdc: unknown metric {metric!r} (expected one of {_CURVE_METRICS})")
    if ci_method not in _CI_METHODS:
        raise MetricError(f"rdc: unknown ci_method {ci_method!r}")
    selected = []
    for ep in _countable(episodes):
        if model_id is not None and ep.model_id != model_id:
            continue
        if scaffold is not None and ep.scaffold != scaffold:
            continue
        selected.append(ep)
    if not selected:
        raise MetricError(f"rdc: no episodes for model={model_id!r} scaffold={scaffold!r}")

    by_bucket: dict[str, list[Episode]] = {}
    for ep in selected:
        task = registry.get(ep.task_id)
        if task is None:
            raise MetricError(f"episode {ep.episode_id!r}: task {ep.task_id!r} not in registry")
        by_bucket.setdefault(task.bucket, []).append(ep)

    points: dict[str, CurvePoint] = {}
    for bucket in BUCKETS:
        eps = by_bucket.get(bucket)
        if not eps:
            continue
        groups = outcome_groups(eps, registry)
        n_tasks = len(groups)
        n_episodes = sum(g.k for g in groups)
        if metric == "pass1":
            value = pass_at_1(groups)
            low, high = _CI_METHODS[ci_method](value, n_tasks, ci_level)
        elif metric == "passk":
            value = pass_pow_k(groups)
            low = high = value
        else:
            value = _mean([gds for g in groups for _, gds in g.repeats])
            low = high = value
        points[bucket] = CurvePoint(value=value, n_tasks=n_tasks,
                                    ci_low=low, ci_high=high, n_episodes=n_episodes)
    return MetricCurve(metric_name=metric, points=points)


def ols_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ys against xs."""
    if len(xs) != len(ys):
        raise MetricError("ols_slope: length mismatch")
    n = len(xs)
    if n < 2:
        raise MetricError("ols_slope: need at least 2 points")
    x_bar = _mean(xs)
    y_bar = _mean(ys)
    sxx = math.fsum((x - x_bar) ** 2 for x in xs)
    if sxx == 0.0:
        raise MetricError("ols_slope: zero regressor variance")
    sxy = math.fsum((x - x_bar) * (y - y_bar) for x, y in zip(xs, ys))
    return sxy / sxx


def rds(curve: MetricCurve, regressor: str = "bucket_index_1to4") -> float:
    """Decay slope of a curve against the chosen duration regressor."""
    if regressor not in REGRESSORS:
        raise MetricError(f"rds: unknown regressor {regressor!r} (expected one of {REGRESSORS})")
    xs: list[float] = []
    ys: list[float] = []
    for i, bucket in enumerate(BUCKETS):
        point = curve.points.get(bucket)
        if point is None:
            continue
        if regressor == "bucket_index_1to4":
            xs.append(float(i + 1))
        elif regressor == "bucket_index_0to3":
            xs.append(float(i))
        else:
            xs.append(BUCKET_MINUTES_MIDPOINT[bucket])
        ys.append(point.value)
    return ols_slope(xs, ys)


# --- variance amplification -----------------------------------------------

@dataclass(frozen=True)
class VafResult:
    model_id: str
    vaf: float
    ci_low: float
    ci_high: float
    numerator_buckets: tuple[str, ...]
    denominator_buckets: tuple[str, ...]
    n_num_tasks: int
    n_den_tasks: int


def _bucket_values(
    per_task: Mapping[str, float],
    task_meta: Mapping[str, TaskSpec],
    buckets: Sequence[str],
) -> list[float]:
    chosen = []
    for task_id in sorted(per_task):
        task = task_meta.get(task_id)
        if task is None:
            raise MetricError(f"vaf: task {task_id!r} not in registry")
        if task.bucket in buckets:
            chosen.append(per_task[task_id])
    return chosen


def _variance_ratio(num_values: Sequence[float], den_values: Sequence[float]) -> float:
    if min(den_values) == max(den_values):
        raise DegenerateStatisticError(
            "vaf: denominator task-level variance is zero"
            " (all denominator tasks have identical pass fractions;"
            " the model is saturated or floored on those buckets)")
    return _pvar(num_values) / _pvar(den_values)


def vaf(
    per_task: Mapping[str, float],
    task_meta: Mapping[str, TaskSpec],
    numerator_buckets: Sequence[str] = DEFAULT_VAF_NUMERATOR,
    denominator_buckets: Sequence[str] = DEFAULT_VAF_DENOMINATOR,
    *,
    model_id: str = "",
    b: int = 0,
    ci_level: float = 0.95,
    seed: int = 0,
) -> VafResult:
    """Ratio of task-level pass-fraction population variances.

    With ``b`` > 0 a percentile bootstrap interval is attached, resampling
    the numerator and denominator task sets independently; with ``b`` = 0
    the interval collapses to the point estimate.
    """
    for name, buckets in (("numerator", numerator_buckets), ("denominator", denominator_buckets)):
        unknown = [bk for bk in buckets if bk not in BUCKETS]
        if unknown or not buckets:
            raise MetricError(f"vaf: bad {name} bucket set {tuple(buckets)!r}")
    num_values = _bucket_values(per_task, task_meta, numerator_buckets)
    den_values = _bucket_values(per_task, task_meta, denominator_buckets)
    if len(num_values) < 2 or len(den_values) < 2:
        raise MetricError(
            f"vaf: need at least 2 tasks per side, got {len(num_values)} numerator"
            f" and {len(den_values)} denominator")
    point = _variance_ratio(num_values, den_values)
    if b:
        low, high = bootstrap_ci(_variance_ratio, (num_values, den_values),
                                 b=b, level=ci_level, seed=seed)
    else:
        low = high = point
    return VafResult(
        model_id=model_id, vaf=point, ci_low=low, ci_high=high,
        numerator_buckets=tuple(numerator_buckets),
        denominator_buckets=tuple(denominator_buckets),
        n_num_tasks=len(num_values), n_den_tasks=len(den_values),
    )


def bootstrap_ci(
    statistic: Callable[..., float],
    units: Sequence,
    b: int = 10000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval from B task-level resamples.

    ``units`` is either one sequence of records (resampled as a single
    pool, passed to ``statistic`` as one argument) or a tuple of sequences
    (each pool resampled independently, passed as separate arguments); the
    independent form is what ratio statistics need. Resample ``i`` draws
    from its own substream of ``seed``, so the interval is reproducible
    and independent of evaluation order. Resamples on which the statistic
    is degenerate are dropped; more than 20% of them is an error.
    """
    if b < 1000:
        raise MetricError(f"bootstrap_ci: b={b} is below the 1000-resample floor")
    if not 0.0 < level < 1.0:
        raise MetricError(f"bootstrap_ci: level {level} outside (0, 1)")
    if isinstance(units, tuple) and units and all(isinstance(u, (list, tuple)) for u in units):
        pools: tuple[Sequence, ...] = units
        single = False
    else:
        pools = (units,)
        single = True
    if any(len(pool) == 0 for pool in pools):
        raise MetricError("bootstrap_ci: empty resampling pool")

    values: list[float] = []
    degenerate = 0
    for i in range(b):
        gen = substream(seed, "bootstrap", i)
        samples = []
        for pool in pools:
            n = len(pool)
            idx = gen.integers(0, n, size=n)
            samples.append([pool[j] for j in idx])
        try:
            stat = statistic(samples[0]) if single else statistic(*samples)
        except DegenerateStatisticError:
            degenerate += 1
            continue
        values.append(float(stat))
    if degenerate > 0.2 * b:
        raise MetricError(
            f"bootstrap_ci: statistic degenerate on {degenerate / b:.1%} of {b} resamples"
            " (more than the 20% tolerance)")
    tail = 100.0 * (1.0 - level) / 2.0
    low, high = np.percentile(values, [tail, 100.0 - tail])
    return float(low), float(high)


# --- stratification and deltas ---------------------------------------------

@dataclass(frozen=True)
class DomainCell:
    value: float
    n_episodes: int


@dataclass(frozen=True)
class DomainTable:
    """Domain-by-bucket cell means plus each domain's very_long minus short
    drop (negative when reliability decays with horizon)."""

    metric_name: str
    cells: Mapping[tuple[str, str], DomainCell]
    drops: Mapping[str, float]


def domain_stratify(
    episodes: Iterable[Episode],
    registry: Mapping[str, TaskSpec],
    metric: str = "gds",
) -> DomainTable:
    if metric not in ("gds", "pass1"):
        raise MetricError(f"domain_stratify: unknown metric {metric!r}")
    values: dict[tuple[str, str], list[float]] = {}
    for ep in _countable(episodes):
        task = registry.get(ep.task_id)
        if task is None:
            raise MetricError(f"episode {ep.episode_id!r}: task {ep.task_id!r} not in registry")
        v = episode_gds(ep, task) if metric == "gds" else float(ep.passed)
        values.setdefault((task.domain, task.bucket), []).append(v)

    domains = sorted({d for d, _ in values})
    cells: dict[tuple[str, str], DomainCell] = {}
    drops: dict[str, float] = {}
    for domain in domains:
        for bucket in BUCKETS:
            cell = values.get((domain, bucket))
            if cell:
                cells[(domain, bucket)] = DomainCell(value=_mean(cell), n_episodes=len(cell))
        short = cells.get((domain, "short"))
        very_long = cells.get((domain, "very_long"))
        if short is not None and very_long is not None:
            drops[domain] = very_long.value - short.value
    return DomainTable(metric_name=metric, cells=cells, drops=drops)


@dataclass(frozen=True)
class ScaffoldComparison:
    model_id: str
    react_value: float
    memory_value: float
    delta: float
    label: str
    n_react: int
    n_memory: int


def scaffold_delta(
    episodes: Iterable[Episode],
    registry: Mapping[str, TaskSpec],
    buckets: Sequence[str] = ("long", "very_long"),
) -> list[ScaffoldComparison]:
    """Memory-minus-react mean GDS per model on the selected buckets.

    |delta| <= 0.03 is labeled neutral (inclusive, with float grace);
    otherwise the sign decides hurts/helps. Models missing either scaffold
    are skipped with a warning rather than guessed at.
    """
    unknown = [bk for bk in buckets if bk not in BUCKETS]
    if unknown or not buckets:
        raise MetricError(f"scaffold_delta: bad bucket set {tuple(buckets)!r}")
    gds_values: dict[str, dict[str, list[float]]] = {}
    for ep in _countable(episodes):
        task = registry.get(ep.task_id)
        if task is None:
            raise MetricError(f"episode {ep.episode_id!r}: task {ep.task_id!r} not in registry")
        if task.bucket not in buckets:
            continue
        gds_values.setdefault(ep.model_id, {}).setdefault(ep.scaffold, []).append(
            episode_gds(ep, task))

    rows: list[ScaffoldComparison] = []
    for model_id in sorted(gds_values):
        per_scaffold = gds_values[model_id]
        if "react" not in per_scaffold or "memory" not in per_scaffold:
            present = sorted(per_scaffold)
            warnings.warn(
                f"scaffold_delta: model {model_id!r} has only {present}; skipped",
                MetricWarning, stacklevel=2)
            continue
        react = _mean(per_scaffold["react"])
        memory = _mean(per_scaffold["memory"])
        delta = memory - react
        if abs(delta) <= SCAFFOLD_NEUTRAL_BAND + _NEUTRAL_GRACE:
            label = "neutral"
        elif delta < 0:
            label = "hurts"
        else:
            label = "helps"
        rows.append(ScaffoldComparison(
            model_id=model_id, react_value=react, memory_value=memory, delta=delta,
            label=label, n_react=len(per_scaffold["react"]), n_memory=len(per_scaffold["memory"]),
        ))
    return rows


def early_failure_rate(
    episodes: Iterable[Episode],
    registry: Mapping[str, TaskSpec],
) -> dict[str, float]:
    """Per-bucket fraction of episodes whose first subtask outcome is false."""
    counts: dict[str, list[int]] = {}
    for ep in _countable(episodes):
        task = registry.get(ep.task_id)
        if task is None:
            raise MetricError(f"episode {ep.episode_id!r}: task {ep.task_id!r} not in registry")
        if not ep.subtask_outcomes:
            raise MetricError(f"episode {ep.episode_id!r}: no subtask outcomes recorded")
        total_early = counts.setdefault(task.bucket, [0, 0])
        total_early[0] += 1
        total_early[1] += 0 if ep.subtask_outcomes[0] else 1
    return {bucket: counts[bucket][1] / counts[bucket][0]
            for bucket in BUCKETS if bucket in counts}


# --- baselines and endpoints ------------------------------------------------

def geometric_baseline(
    p_short: float,
    exponent_map: Mapping[str, float] | None = None,
) -> dict[str, float]:
    """Predicted per-bucket pass rate if decay were geometric in p_short."""
    if not 0.0 <= p_short <= 1.0:
        raise MetricError(f"geometric_baseline: p_short {p_short} outside [0, 1]")
    exponents = DEFAULT_GEOMETRIC_EXPONENTS if exponent_map is None else exponent_map
    for bucket, exp in exponents.items():
        if bucket not in BUCKETS:
            raise MetricError(f"geometric_baseline: unknown bucket {bucket!r}")
        if exp <= 0:
            raise MetricError(f"geometric_baseline: exponent for {bucket!r} must be positive")
    return {bucket: p_short ** exponents[bucket] for bucket in BUCKETS if bucket in exponents}


def superlinearity_ratio(
    predicted: Mapping[str, float],
    observed: Mapping[str, float],
) -> dict[str, float]:
    """predicted / observed per bucket; > 1 means decay beat the geometric
    baseline. A zero observed rate yields inf, which reports must flag."""
    out: dict[str, float] = {}
    for bucket in BUCKETS:
        if bucket not in predicted or bucket not in observed:
            continue
        obs = observed[bucket]
        out[bucket] = math.inf if obs == 0 else predicted[bucket] / obs
    return out


def decomposition_gain(curve: MetricCurve) -> float:
    """Signed short-bucket minus very_long-bucket value of a curve."""
    short = curve.points.get("short")
    very_long = curve.points.get("very_long")
    if short is None or very_long is None:
        missing = [b for b in ("short", "very_long") if curve.points.get(b) is None]
        raise MetricError(f"decomposition_gain: curve missing {missing} endpoints")
    return short.value - very_long.value
