"""Replication studies: generate many datasets from one plan and score the recovery.

Each replicate draws an n-row dataset, re-estimates every marginal parameter
by the method of moments and every pairwise correlation, and builds a 95%
interval for each. Aggregated over replicates this gives the usual table of
true value (TV), average estimate (AE), standard deviation (SD), relative bias
(RB, %), standardized bias (SB, %), root mean square error (RMSE) and
coverage rate (CR, %).

Intervals: Fisher z for correlations, bootstrap percentile (B=500) for
marginal parameters. Within a replicate one bootstrap index matrix is shared
by all columns.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.special import ndtri

from . import _kernels, streams
from .calibration import CalibrationOptions
from .config import RunConfig, parse_config
from .engine import GenerationPlan, build_plan, generate
from .exceptions import EstimationError
from .marginals import PARAM_NAMES, Family, mom_from_moments

DEFAULT_REPLICATIONS = 200
BOOTSTRAP_B = 500
PRESET_FILES = ("gp", "nb", "binomial", "mixed")
SIZES = {"small": 200, "large": 2000}


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    specs: tuple
    sigma_star: np.ndarray
    n: int
    replications: int = DEFAULT_REPLICATIONS
    labels: tuple | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.n < 2:
            raise ValueError("n must be >= 2")

    @classmethod
    def from_config(cls, cfg: RunConfig, n=None, replications=None):
        n = n if n is not None else cfg.n
        if n is None:
            raise ValueError("scenario needs a sample size n")
        R = replications if replications is not None else (cfg.replications or DEFAULT_REPLICATIONS)
        labels = tuple(cfg.labels) if cfg.labels else None
        return cls(cfg.name, tuple(cfg.margins), np.asarray(cfg.correlation, dtype=float), int(n), int(R), labels)


def _column_names(scenario):
    J = len(scenario.specs)
    if scenario.labels:
        return list(scenario.labels)
    return [str(j + 1) for j in range(J)]


def parameter_labels(scenario):
    """Row labels in table order: marginal parameters, then correlations."""
    cols = _column_names(scenario)
    out = []
    for s, c in zip(scenario.specs, cols):
        out.extend(f"{name}_{c}" for name in PARAM_NAMES[s.family])
    J = len(cols)
    for i in range(J):
        for j in range(i + 1, J):
            out.append(f"rho_{i + 1}{j + 1}" if J < 10 else f"rho_{i + 1}_{j + 1}")
    return out


def true_values(scenario):
    tv = []
    for s in scenario.specs:
        tv.extend(float(v) for v in s.params())
    J = len(scenario.specs)
    tv.extend(float(scenario.sigma_star[i, j]) for i in range(J) for j in range(i + 1, J))
    return np.array(tv)


# -- intervals --------------------------------------------------------------


def fisher_interval(r, n, level=0.95):
    """Fisher z interval for a Pearson correlation."""
    if n < 4:
        raise ValueError("Fisher interval needs n >= 4")
    zc = float(ndtri(0.5 + level / 2))
    z = math.atanh(max(min(r, 1 - 1e-15), -1 + 1e-15))
    half = zc / math.sqrt(n - 3)
    return math.tanh(z - half), math.tanh(z + half)


def _bootstrap_param_draws(x, family, idx):
    """MoM parameter pairs for each bootstrap resample (NaN where infeasible)."""
    n = idx.shape[1]
    s1, s2 = _kernels.bootstrap_sums(x, idx)
    s1 = np.asarray(s1, dtype=np.float64)
    s2 = np.asarray(s2, dtype=np.float64)
    mean = s1 / n
    var = (s2 - s1 * mean) / (n - 1)
    return mom_from_moments(mean, var, family)


def _percentile_interval(draws, level):
    good = draws[np.isfinite(draws)]
    if good.size < 2:
        return (math.nan, math.nan)
    a = (1 - level) / 2 * 100
    lo, hi = np.percentile(good, [a, 100 - a])
    return float(lo), float(hi)


def ci_for_estimate(sample, kind, level=0.95, family=None, stream=None, B=BOOTSTRAP_B):
    """95% (by default) interval for a correlation or for MoM parameters.

    Parameters
    ----------
    sample : array_like
        ``(n, 2)`` columns for ``kind="correlation"``; a 1-d integer sample for
        ``kind="marginal_param"``.
    kind : {"correlation", "marginal_param"}
    family : Family or str
        Required for marginal parameters.
    stream : numpy.random.Generator
        Required for marginal parameters (bootstrap resampling).

    Returns
    -------
    tuple
        ``(lo, hi)`` for a correlation; ``((lo, hi), (lo, hi))`` for the two
        parameters of the family, in table order.
    """
    x = np.asarray(sample)
    n = x.shape[0]
    if n < 30:
        raise ValueError("interval needs at least 30 observations")
    if kind == "correlation":
        if x.ndim != 2 or x.shape[1] != 2:
            raise ValueError("correlation interval needs an (n, 2) sample")
        if np.issubdtype(x.dtype, np.integer):
            r = _kernels.pearson_from_sums(n, *_kernels.pair_sums(x[:, 0], x[:, 1]))
        else:
            r = float(np.corrcoef(x[:, 0], x[:, 1])[0, 1])
        return fisher_interval(r, n, level)
    if kind != "marginal_param":
        raise ValueError(f"unknown interval kind {kind!r}")
    if family is None or stream is None:
        raise ValueError("marginal_param intervals need a family and a stream")
    if x.ndim != 1:
        raise ValueError("marginal_param interval needs a 1-d sample")
    idx = stream.integers(0, n, size=(B, n))
    a, b = _bootstrap_param_draws(np.asarray(x, dtype=np.int64), Family.parse(family), idx)
    finite = np.isfinite(a)
    if not finite.any() or (np.ptp(a[finite]) == 0 and np.ptp(b[finite]) == 0):
        raise EstimationError("bootstrap is degenerate (all resamples give the same estimate)")
    return _percentile_interval(a, level), _percentile_interval(b, level)


# -- table ------------------------------------------------------------------


@dataclass(frozen=True)
class EvalRow:
    label: str
    tv: float
    ae: float
    sd: float
    rb: float
    sb: float
    rmse: float
    cr: float
    used: int
    excluded: int


def summarize(label, tv, est, covered):
    """One table row from per-replicate estimates; NaN entries are exclusions.

    ``covered`` holds 1/0 per replicate, NaN where no interval was available.
    """
    est = np.asarray(est, dtype=float)
    ok = np.isfinite(est)
    e = est[ok]
    used = int(ok.sum())
    excluded = int(est.size - used)
    if used == 0:
        raise EstimationError(f"{label}: estimation failed in every replicate")
    ae = float(e.mean())
    sd = float(e.std(ddof=1)) if used > 1 else math.nan
    bias = abs(ae - tv)
    rb = bias / abs(tv) * 100 if tv != 0 else math.nan
    sb = bias / sd * 100 if sd > 0 else math.nan
    rmse = float(np.sqrt(np.mean((e - tv) ** 2)))
    cov = np.asarray(covered, dtype=float)
    cov = cov[np.isfinite(cov)]
    cr = float(cov.mean() * 100) if cov.size else math.nan
    return EvalRow(label, float(tv), ae, sd, rb, sb, rmse, cr, used, excluded)


@dataclass(frozen=True, eq=False)
class EvalTable:
    """Aggregated replication results plus the raw per-replicate estimates."""

    scenario: str
    n: int
    replications: int
    seed: int
    rows: tuple
    estimates: np.ndarray  # (R, P), NaN for excluded replicates
    covered: np.ndarray  # (R, P), 1/0, NaN when no interval
    notes: tuple = field(default=())

    def row(self, label) -> EvalRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    @property
    def labels(self):
        return [r.label for r in self.rows]

    def correlation_rows(self):
        return [r for r in self.rows if r.label.startswith("rho_")]

    def parameter_rows(self):
        return [r for r in self.rows if not r.label.startswith("rho_")]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "TV", "AE", "SD", "RB", "SB", "RMSE", "CR", "used", "excluded"])
        for r in self.rows:
            w.writerow([r.label, repr(r.tv), repr(r.ae), repr(r.sd), repr(r.rb), repr(r.sb),
                        repr(r.rmse), repr(r.cr), r.used, r.excluded])
        return buf.getvalue()

    def format(self):
        head = (f"{'':<12}{'TV':>9}{'AE':>10}{'SD':>9}{'RB':>9}{'SB':>9}"
                f"{'RMSE':>9}{'CR (%)':>8}")
        lines = [f"{self.scenario}: N={self.n}, R={self.replications}, seed={self.seed}", head,
                 "-" * len(head)]
        for group, rows in (("Parameters", self.parameter_rows()), ("Correlation", self.correlation_rows())):
            lines.append(group)
            for r in rows:
                lines.append(
                    f"{r.label:<12}{r.tv:>9.4f}{r.ae:>10.4f}{_fmt(r.sd):>9}{_fmt(r.rb):>9}"
                    f"{_fmt(r.sb):>9}{r.rmse:>9.4f}{_fmt(r.cr, 1):>8}"
                    + (f"  ({r.excluded} excluded)" if r.excluded else "")
                )
        lines.extend(self.notes)
        return "\n".join(lines)


def _fmt(v, digits=4):
    return "n/a" if not math.isfinite(v) else f"{v:.{digits}f}"


# -- driver -----------------------------------------------------------------


def replicate_once(plan: GenerationPlan, scenario: Scenario, seed, r, level=0.95, B=BOOTSTRAP_B):
    """Estimates and coverage flags for replicate r (both length P)."""
    ds = generate(plan, scenario.n, streams.derive_seed(seed, streams.REPLICATE, r))
    x = ds.data
    n = scenario.n
    tv = true_values(scenario)
    est, cov = [], []
    idx = streams.derive(seed, streams.BOOTSTRAP, r).integers(0, n, size=(B, n))
    for j, s in enumerate(scenario.specs):
        col = x[:, j]
        mean = col.sum() / n
        var = float(((col - mean) ** 2).sum()) / (n - 1)
        pa, pb = mom_from_moments(mean, var, s.family)
        if not math.isfinite(pa):
            est.extend([math.nan, math.nan])
            cov.extend([math.nan, math.nan])
            continue
        est.extend([pa, pb])
        ba, bb = _bootstrap_param_draws(col, s.family, idx)
        for draws in (ba, bb):
            lo, hi = _percentile_interval(draws, level)
            k = len(cov)
            cov.append(math.nan if math.isnan(lo) else float(lo <= tv[k] <= hi))
    J = len(scenario.specs)
    for i in range(J):
        for j in range(i + 1, J):
            rho = _kernels.pearson_from_sums(n, *_kernels.pair_sums(x[:, i], x[:, j]))
            est.append(rho)
            if math.isfinite(rho):
                lo, hi = fisher_interval(rho, n, level)
                cov.append(float(lo <= tv[len(cov)] <= hi))
            else:
                cov.append(math.nan)
    return np.array(est), np.array(cov)


def run_replication(scenario: Scenario, seed, opts: CalibrationOptions | None = None,
                    plan: GenerationPlan | None = None, level=0.95, B=BOOTSTRAP_B) -> EvalTable:
    """Build the plan once, then run ``scenario.replications`` replicates.

    Replicate r generates with the seed derived from (seed, REPLICATE, r) and
    bootstraps with the (seed, BOOTSTRAP, r) stream, so results do not depend
    on execution order.
    """
    if plan is None:
        opts = CalibrationOptions(seed=seed) if opts is None else opts
        plan = build_plan(scenario.specs, scenario.sigma_star, opts,
                          labels=scenario.labels)
    labels = parameter_labels(scenario)
    tv = true_values(scenario)
    R = scenario.replications
    est = np.empty((R, tv.size))
    cov = np.empty((R, tv.size))
    for r in range(R):
        est[r], cov[r] = replicate_once(plan, scenario, seed, r, level, B)
    rows = tuple(summarize(lab, t, est[:, k], cov[:, k]) for k, (lab, t) in enumerate(zip(labels, tv)))
    notes = []
    if R == 1:
        notes.append("R=1: SD and SB are undefined")
    return EvalTable(scenario.name, scenario.n, R, int(seed), rows, est, cov, tuple(notes))


# -- presets ----------------------------------------------------------------


def load_preset_config(name) -> RunConfig:
    text = resources.files("multidiscrete").joinpath(f"presets/{name}.json").read_text(encoding="utf-8")
    return parse_config(json.loads(text))


def preset_scenarios(replications=DEFAULT_REPLICATIONS):
    """The four simulation scenarios at N=200 ("-small") and N=2000 ("-large")."""
    out = []
    for base in PRESET_FILES:
        cfg = load_preset_config(base)
        for size, n in SIZES.items():
            labels = tuple(cfg.labels) if cfg.labels else None
            out.append(Scenario(f"{base}-{size}", tuple(cfg.margins), np.asarray(cfg.correlation),
                                n, replications, labels))
    return out


def preset(name, replications=DEFAULT_REPLICATIONS) -> Scenario:
    for s in preset_scenarios(replications):
        if s.name == name:
            return s
    raise KeyError(f"unknown preset {name!r}; choose from "
                   + ", ".join(s.name for s in preset_scenarios()))
