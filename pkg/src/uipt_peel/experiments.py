"""Monte Carlo harness: configs, censored survival curves, tail fits, two-sample and contingency tests,
and deterministic parallel execution over replicates.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

WORKERS_ENV = "UIPT_PEEL_WORKERS"


class InsufficientTailMass(ValueError):
    """Too few grid points or exceedances for a tail fit."""


class UnderPooledTable(ValueError):
    """A contingency table has expected counts below the pooling threshold."""


class ReplicateError(RuntimeError):
    def __init__(self, replicate: int, message: str):
        super().__init__(f"replicate {replicate}: {message}")
        self.replicate = replicate
        self.message = message

    def __reduce__(self):
        return (type(self), (self.replicate, self.message))


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class GridSpec:
    base: float
    count: int
    ratio: float = 10 ** 0.25

    def points(self) -> np.ndarray:
        return self.base * self.ratio ** np.arange(self.count)

    @property
    def maximum(self) -> float:
        return float(self.points()[-1])

    def to_text(self) -> str:
        return f"{self.base!r},{self.count},{self.ratio!r}"

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) not in (2, 3):
            raise ValueError(f"grid needs base,count[,ratio]: {text!r}")
        ratio = float(parts[2]) if len(parts) == 3 else 10 ** 0.25
        return cls(base=float(parts[0]), count=int(parts[1]), ratio=ratio)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run.

    ``grid``/``fit_range`` describe the step-count grid (theta and perimeter);
    ``volume_grid``/``volume_fit_range`` the volume grid.  Fit ranges are
    inclusive grid indices.
    """

    master_seed: int = 42
    replicates: int = 100_000
    step_cap: int = 10_000
    volume_cap: int = 10_000_000
    grid: GridSpec = GridSpec(100.0, 9)
    fit_range: tuple = (0, 8)
    volume_grid: GridSpec = GridSpec(100.0, 17)
    volume_fit_range: tuple = (0, 16)
    significance: float = 1e-3
    workers: int = 1
    start: tuple = (1, 1)
    root_coloring: str = "fixed"
    volume_stop: int = 0
    max_steps: int = 100_000_000
    quadruples: int = 100_000
    lambda_runs: int = 100_000
    lambda_cap: int = 20
    time_cap: float = 1e5
    legs: int = 200_000
    up_legs: int = 1_000_000
    annealed_draws: int = 10_000_000
    harris_walks: int = 1_000_000
    sampler_draws: int = 1_000_000

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        if self.step_cap < 1 or self.volume_cap < 1:
            raise ValueError("caps must be positive")
        if not 0 < self.significance < 1:
            raise ValueError("significance must lie in (0, 1)")
        if self.root_coloring not in ("fixed", "random"):
            raise ValueError("root_coloring must be 'fixed' or 'random'")
        for rng_, grid, cap, name, cap_name in (
                (self.fit_range, self.grid, self.step_cap, "grid", "step_cap"),
                (self.volume_fit_range, self.volume_grid, self.volume_cap, "volume_grid", "volume_cap")):
            lo, hi = rng_
            if not 0 <= lo < hi < grid.count:
                raise ValueError(f"fit range {rng_} outside {name}")
            if grid.maximum > cap * (1 + 1e-12):
                raise ValueError(f"{name} maximum {grid.maximum:g} exceeds {cap_name} = {cap}")
        r0, b0 = self.start
        if r0 < 1 or b0 < 0 or r0 + b0 < 2:
            raise ValueError("invalid start")

    @property
    def effective_workers(self) -> int:
        env = os.environ.get(WORKERS_ENV)
        if env:
            return max(1, int(env))
        return max(1, self.workers)

    @property
    def effective_volume_stop(self) -> int:
        return int(self.volume_stop) if self.volume_stop > 0 else int(math.ceil(round(self.volume_grid.maximum, 6)))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, GridSpec):
                v = {"base": v.base, "count": v.count, "ratio": v.ratio}
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, GridSpec):
                text = v.to_text()
            elif isinstance(v, tuple):
                text = ",".join(str(x) for x in v)
            else:
                text = repr(v) if isinstance(v, float) else str(v)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"


def _coerce(name: str, text: str, current):
    if isinstance(current, GridSpec):
        return GridSpec.parse(text)
    if isinstance(current, tuple):
        return tuple(int(x) for x in text.split(","))
    if isinstance(current, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(float(text)) if "e" in text.lower() else int(text)
    if isinstance(current, float):
        return float(text)
    return text


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) over ``base``.  Unknown keys raise."""
    base = base or ExperimentConfig()
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        value = value.strip().strip('"')
        changes[key] = _coerce(key, value, getattr(base, key))
    return base.replace(**changes)


def load_config(path: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


# ---------------------------------------------------------------------------
# survival curves and tail fits


def wilson_interval(count, total, level: float = 0.95):
    """Wilson score intervals for each entry of ``count`` out of ``total``."""
    lows, highs = [], []
    for c in np.atleast_1d(count):
        ci = stats.binomtest(int(c), int(total)).proportion_ci(confidence_level=level, method="wilson")
        lows.append(ci.low)
        highs.append(ci.high)
    return np.array(lows), np.array(highs)


@dataclass
class SurvivalCurve:
    grid: np.ndarray
    counts: np.ndarray
    total: int
    lower: np.ndarray
    upper: np.ndarray

    @property
    def prob(self) -> np.ndarray:
        return self.counts / self.total

    def merge(self, other: "SurvivalCurve") -> "SurvivalCurve":
        if not np.array_equal(self.grid, other.grid):
            raise ValueError("grids differ")
        return _curve(self.grid, self.counts + other.counts, self.total + other.total)

    def rows(self):
        for g, c, lo, hi in zip(self.grid, self.counts, self.lower, self.upper):
            yield float(g), int(c), c / self.total, float(lo), float(hi)


def _curve(grid, counts, total):
    lo, hi = wilson_interval(counts, total)
    return SurvivalCurve(grid=np.asarray(grid, float), counts=np.asarray(counts, np.int64),
                         total=int(total), lower=lo, upper=hi)


def estimate_survival(values, grid, censored=None) -> SurvivalCurve:
    """Empirical P(X > g) on the grid.

    A censored value is a lower bound: the true X is larger.  Every censored
    value must exceed the grid maximum, otherwise some grid point cannot be
    decided and a ValueError is raised.
    """
    values = np.asarray(values)
    grid = np.asarray(grid, float)
    if values.size == 0:
        raise ValueError("no samples")
    if censored is None:
        censored = np.zeros(values.shape, bool)
    censored = np.asarray(censored, bool)
    if censored.any() and values[censored].min() < grid.max():
        raise ValueError("grid point above the censoring level of some sample")
    sorted_vals = np.sort(values)
    counts = values.size - np.searchsorted(sorted_vals, grid, side="right")
    return _curve(grid, counts, values.size)


@dataclass(frozen=True)
class TailFit:
    slope: float
    stderr: float
    method: str
    fit_range: tuple

    def to_dict(self):
        return {"slope": self.slope, "stderr": self.stderr, "method": self.method,
                "fit_range": list(self.fit_range)}


def fit_tail_exponent(curve: SurvivalCurve, fit_range=None, min_count: int = 100) -> TailFit:
    """Least-squares slope of log P(X > g) against log g over grid indices lo..hi."""
    lo, hi = fit_range if fit_range is not None else (0, len(curve.grid) - 1)
    idx = np.arange(lo, hi + 1)
    if idx.size < 4:
        raise InsufficientTailMass("need at least 4 grid points")
    if curve.counts[idx].min() < min_count:
        raise InsufficientTailMass(f"fewer than {min_count} exceedances at some grid point")
    if curve.counts[idx[0]] == curve.counts[idx[-1]]:
        raise InsufficientTailMass("survival curve does not decay over the fit range")
    res = stats.linregress(np.log(curve.grid[idx]), np.log(curve.prob[idx]))
    return TailFit(slope=float(res.slope), stderr=float(res.stderr), method="loglog_ols",
                   fit_range=(float(curve.grid[lo]), float(curve.grid[hi])))


def hill_estimate(values, x_min: float, censored=None) -> TailFit:
    """Pareto maximum-likelihood tail index above x_min, allowing right-censored values."""
    values = np.asarray(values, float)
    if censored is None:
        censored = np.zeros(values.shape, bool)
    censored = np.asarray(censored, bool)
    above = values > x_min
    k = int((above & ~censored).sum())
    if k < 10:
        raise InsufficientTailMass("too few exceedances for the Hill estimator")
    total_log = float(np.log(values[above] / x_min).sum())
    alpha = k / total_log
    return TailFit(slope=-alpha, stderr=alpha / math.sqrt(k), method="hill",
                   fit_range=(float(x_min), math.inf))


def stabilization(curve: SurvivalCurve, exponent: float) -> dict:
    """P(X > g) g^exponent across the grid and its relative spread max/min - 1."""
    scaled = curve.prob * curve.grid ** exponent
    return {"scaled": scaled.tolist(), "spread": float(scaled.max() / scaled.min() - 1.0)}


# ---------------------------------------------------------------------------
# tests


@dataclass(frozen=True)
class StatResult:
    statistic: float
    pvalue: float
    dof: int = 0


def ks_two_sample(a, b) -> StatResult:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    res = stats.ks_2samp(a, b, method="asymp")
    return StatResult(float(res.statistic), float(res.pvalue))


def chi_square_independence(table, min_expected: float = 5.0) -> StatResult:
    table = np.asarray(table, float)
    if table.ndim != 2 or min(table.shape) < 2:
        raise ValueError("need a two-way table with at least 2 rows and 2 columns")
    expected = stats.contingency.expected_freq(table)
    if expected.min() < min_expected:
        raise UnderPooledTable(f"expected count {expected.min():.3g} below {min_expected}")
    res = stats.chi2_contingency(table, correction=False)
    return StatResult(float(res.statistic), float(res.pvalue), int(res.dof))


def pool_bins(observed, expected, min_expected: float = 5.0):
    """Merge neighbouring bins (right to left) until every expected count reaches min_expected."""
    obs_out, exp_out = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed[::-1], expected[::-1]):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if not obs_out:
            raise UnderPooledTable("total expected count below the pooling threshold")
        obs_out[-1] += o_acc
        exp_out[-1] += e_acc
    return np.array(obs_out[::-1]), np.array(exp_out[::-1])


def chi_square_gof(observed, probs, min_expected: float = 5.0) -> StatResult:
    """Pearson goodness of fit; ``probs`` must sum to 1 over the listed categories."""
    observed = np.asarray(observed, float)
    probs = np.asarray(probs, float)
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("category probabilities must sum to 1")
    total = observed.sum()
    obs, exp = pool_bins(observed, probs * total, min_expected)
    if obs.size < 2:
        raise UnderPooledTable("need at least two pooled categories")
    stat = float(((obs - exp) ** 2 / exp).sum())
    dof = obs.size - 1
    return StatResult(stat, float(stats.chi2.sf(stat, dof)), dof)


def binomial_z(count: int, total: int, p: float) -> float:
    return (count - total * p) / math.sqrt(total * p * (1 - p))


# ---------------------------------------------------------------------------
# parallel execution


def chunk_bounds(n: int, chunks: int):
    edges = np.linspace(0, n, chunks + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_chunks(fn, n: int, workers: int, args=(), chunk_size: int = 2000):
    """Apply ``fn(lo, hi, *args)`` over replicate ranges and return results in range order.

    ``fn`` must be a module-level function so it can be shipped to worker
    processes.  Because each replicate owns its own stream, results do not
    depend on the number of workers.
    """
    bounds = chunk_bounds(n, max(1, math.ceil(n / chunk_size)))
    if workers <= 1 or len(bounds) == 1:
        return [fn(lo, hi, *args) for lo, hi in bounds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, lo, hi, *args) for lo, hi in bounds]
        return [f.result() for f in futures]


@dataclass
class Criterion:
    name: str
    value: object
    target: object
    tolerance: object
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"name": self.name, "value": _jsonable(self.value), "target": _jsonable(self.target),
               "tolerance": _jsonable(self.tolerance), "pass": bool(self.passed)}
        if self.detail:
            out["detail"] = _jsonable(self.detail)
        return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def run_suite(config: ExperimentConfig, suite_id: str, out_dir: str | None = None) -> dict:
    """Run one named suite and return its report (also written to ``out_dir`` when given)."""
    from . import suites

    return suites.run_suite(config, suite_id, out_dir)
