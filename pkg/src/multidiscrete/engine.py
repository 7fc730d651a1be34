"""Plan building and data generation.

``build_plan`` does the expensive part once (truncation, collapsing, bounds,
calibration, latent matrix); ``generate`` then draws datasets of any size from
the plan with no further root finding.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from . import gaussian_core as gc
from . import streams
from .calibration import CalibrationOptions, PairCalibration, calibrate_matrix
from .collapse import CollapsedMargin, Side, collapse_margin, expand
from .corr_bounds import check_target_matrix, ep_binary_bounds
from .exceptions import InfeasibleCorrelationError, SpecError
from .marginals import MarginalSpec, TruncatedPmf, require_valid, truncate_support

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class GenerationPlan:
    """Everything ``generate`` needs. Treat as immutable."""

    specs: tuple
    pmfs: tuple
    margins: tuple
    sigma_star: np.ndarray
    sigma_b: np.ndarray
    sigma_latent: np.ndarray
    binary_repair: gc.PdRepairReport
    latent_repair: gc.PdRepairReport
    calibrations: tuple
    options: CalibrationOptions
    labels: tuple
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        for name in ("sigma_star", "sigma_b", "sigma_latent"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        J = len(self.specs)
        if not (len(self.pmfs) == len(self.margins) == len(self.labels) == J):
            raise ValueError("plan components disagree on the number of margins")
        for name in ("sigma_star", "sigma_b", "sigma_latent"):
            if getattr(self, name).shape != (J, J):
                raise ValueError(f"{name} must be {J}x{J}")

    @property
    def dim(self):
        return len(self.specs)

    @property
    def p_b(self):
        return np.array([m.p_b for m in self.margins])

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "labels": list(self.labels),
            "options": self.options.to_dict(),
            "margins": [
                {"spec": s.to_dict(), "pmf": _pmf_to_dict(p), "collapse": _collapse_to_dict(m)}
                for s, p, m in zip(self.specs, self.pmfs, self.margins)
            ],
            "sigma_star": self.sigma_star.tolist(),
            "sigma_b": self.sigma_b.tolist(),
            "sigma_latent": self.sigma_latent.tolist(),
            "binary_repair": self.binary_repair.to_dict(),
            "latent_repair": self.latent_repair.to_dict(),
            "calibrations": [c.to_dict() for c in self.calibrations],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, d):
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SpecError(f"unsupported plan schema version {version!r}")
        specs, pmfs, margins = [], [], []
        for m in d["margins"]:
            specs.append(MarginalSpec.from_dict(m["spec"]))
            pmf = _pmf_from_dict(m["pmf"])
            pmfs.append(pmf)
            margins.append(_collapse_from_dict(m["collapse"], pmf))
        return cls(
            tuple(specs), tuple(pmfs), tuple(margins),
            np.asarray(d["sigma_star"], dtype=float),
            np.asarray(d["sigma_b"], dtype=float),
            np.asarray(d["sigma_latent"], dtype=float),
            gc.PdRepairReport.from_dict(d["binary_repair"]),
            gc.PdRepairReport.from_dict(d["latent_repair"]),
            tuple(PairCalibration.from_dict(c) for c in d["calibrations"]),
            CalibrationOptions.from_dict(d["options"]),
            tuple(d["labels"]),
            version,
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def sha256(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _pmf_to_dict(p: TruncatedPmf):
    return {"offset": int(p.offset), "raw_mass": p.raw_mass, "probs": p.probs.tolist()}


def _pmf_from_dict(d):
    return TruncatedPmf(np.asarray(d["probs"], dtype=float), int(d["offset"]), float(d["raw_mass"]))


def _collapse_to_dict(m: CollapsedMargin):
    return {
        "median": int(m.median),
        "median_side": m.median_side.value,
        "p_b": m.p_b,
        "zero": _pmf_to_dict(m.cond_zero),
        "one": _pmf_to_dict(m.cond_one),
    }


def _collapse_from_dict(d, source):
    return CollapsedMargin(
        source, int(d["median"]), Side(d["median_side"]), float(d["p_b"]),
        _pmf_from_dict(d["zero"]), _pmf_from_dict(d["one"]),
    )


def save_plan(plan: GenerationPlan, path):
    Path(path).write_text(plan.to_json(), encoding="utf-8")


def load_plan(path) -> GenerationPlan:
    return GenerationPlan.from_json(Path(path).read_text(encoding="utf-8"))


# -- building ---------------------------------------------------------------


def latent_matrix(margins, sigma_b):
    """Per-pair tetrachoric solves of the binary matrix, then PD repair."""
    J = len(margins)
    out = np.eye(J)
    for i in range(J):
        for j in range(i + 1, J):
            lo, hi = ep_binary_bounds(margins[i].p_b, margins[j].p_b)
            d = min(max(float(sigma_b[i, j]), lo), hi)
            out[i, j] = out[j, i] = gc.solve_tetrachoric(margins[i].p_b, margins[j].p_b, d)
    return gc.nearest_pd(out)


def build_plan(specs, sigma_star, opts: CalibrationOptions | None = None, labels=None,
               workers=None) -> GenerationPlan:
    """Validate, truncate, collapse, check bounds, calibrate and solve the latent matrix.

    Raises
    ------
    SpecError
        Invalid margin or correlation matrix.
    InfeasibleCorrelationError
        Some target is outside its bounds; ``report`` holds the BoundsReport.
    CalibrationError
        Some pair did not converge; ``calibrations`` holds every pair's result.
    """
    opts = CalibrationOptions() if opts is None else opts
    specs = tuple(specs)
    if not specs:
        raise SpecError("need at least one margin")
    for s in specs:
        require_valid(s)
    try:
        sigma_star = gc.check_correlation_matrix(sigma_star, "target correlation matrix")
    except ValueError as exc:
        raise SpecError(str(exc)) from exc
    J = len(specs)
    if sigma_star.shape != (J, J):
        raise SpecError(f"target correlation matrix is {sigma_star.shape}, expected {(J, J)}")
    labels = tuple(labels) if labels is not None else tuple(f"X{j + 1}" for j in range(J))
    if len(labels) != J:
        raise SpecError(f"{len(labels)} labels for {J} margins")

    pmfs = tuple(truncate_support(s) for s in specs)
    margins = tuple(collapse_margin(p) for p in pmfs)

    report = check_target_matrix(margins, sigma_star, opts.n_gsc, opts.seed)
    if not report.feasible:
        names = ", ".join(p.label for p in report.infeasible_pairs())
        raise InfeasibleCorrelationError(f"infeasible target correlation(s): {names}", report)
    for p in report.marginal_pairs():
        log.warning("%s target %.4f is within %.2g of a bound [%.4f, %.4f]",
                    p.label, p.target, report.band, p.lower, p.upper)

    cal = calibrate_matrix(margins, sigma_star, opts, bounds=report, workers=workers)
    latent = latent_matrix(margins, cal.sigma_b)
    return GenerationPlan(
        specs, pmfs, margins, sigma_star, cal.sigma_b, latent.repaired,
        cal.repair, latent, cal.pairs, opts, labels,
    )


# -- generation -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    data: np.ndarray
    labels: tuple
    seed: int
    plan_sha256: str = ""
    _corr: list = field(default_factory=list, repr=False)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def corr(self):
        if not self._corr:
            self._corr.append(empirical_corr(self.data))
        return self._corr[0]

    def to_csv(self):
        lines = [",".join(self.labels)]
        lines.extend(",".join(map(str, row)) for row in self.data.tolist())
        return "\n".join(lines) + "\n"

    def metadata(self):
        return {
            "seed": self.seed,
            "n": self.n,
            "labels": list(self.labels),
            "plan_sha256": self.plan_sha256,
            "empirical_corr": self.corr.tolist(),
        }


def generate(plan: GenerationPlan, n, seed) -> Dataset:
    """Draw n rows: latent normals, dichotomize at z(p_b), expand each column.

    The latent draws use the LATENT stream and column j's expansion uses the
    EXPAND stream keyed by j, so the output depends only on (plan, n, seed).
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    z = gc.mvn_sample(plan.sigma_latent, n, streams.derive(seed, streams.LATENT))
    y = gc.dichotomize(z, plan.p_b)
    data = np.empty((n, plan.dim), dtype=np.int64)
    for j, m in enumerate(plan.margins):
        data[:, j] = expand(m, y[:, j], streams.derive(seed, streams.EXPAND, j))
    return Dataset(data, plan.labels, int(seed), plan.sha256())


def empirical_corr(data):
    """Pearson correlation matrix.

    Integer data uses exact integer sums, so the result does not depend on
    summation order or backend.
    """
    if isinstance(data, Dataset):
        data = data.data
    x = np.asarray(data)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a 2-d array with at least 2 rows")
    J = x.shape[1]
    out = np.eye(J)
    if np.issubdtype(x.dtype, np.integer):
        cols = [np.ascontiguousarray(x[:, j], dtype=np.int64) for j in range(J)]
        for j in range(J):
            if np.all(cols[j] == cols[j][0]):
                raise ValueError(f"column {j + 1} has zero variance")
        for i in range(J):
            for j in range(i + 1, J):
                out[i, j] = out[j, i] = _kernels.pearson_from_sums(
                    x.shape[0], *_kernels.pair_sums(cols[i], cols[j])
                )
        return out
    xc = x - x.mean(axis=0)
    ss = np.sqrt((xc * xc).sum(axis=0))
    if np.any(ss == 0):
        raise ValueError("zero-variance column")
    c = (xc.T @ xc) / np.outer(ss, ss)
    c = (c + c.T) / 2
    np.fill_diagonal(c, 1.0)
    return np.clip(c, -1.0, 1.0)


def write_dataset(ds: Dataset, csv_path, meta_path=None):
    """CSV (header row, LF endings) plus a JSON metadata companion.

    The metadata path defaults to ``<csv_path>.meta.json``.
    """
    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path else csv_path.with_name(csv_path.name + ".meta.json")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(ds.to_csv())
    meta_path.write_text(json.dumps(ds.metadata(), indent=1) + "\n", encoding="utf-8")
    return csv_path, meta_path
