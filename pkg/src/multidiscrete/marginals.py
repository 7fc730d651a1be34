"""Generalized Poisson, negative binomial and binomial margins.

Parameterizations
-----------------
Generalized Poisson ``GP(theta, lam)``::

    P(X = x) = theta (theta + lam x)^(x-1) exp(-theta - lam x) / x!

with ``theta > 0`` and ``max(-1, -theta/m) <= lam < 1``; for ``lam < 0`` the
support ends at ``m``, the largest integer with ``theta + m lam > 0`` (and
``m >= 4`` is required). Mean ``theta/(1-lam)``, variance ``theta/(1-lam)^3``.

Negative binomial ``NB(r, p)`` counts failures before the r-th success:
mean ``r(1-p)/p``, variance ``r(1-p)/p^2``.

Binomial ``Bin(n, p)``: mean ``np``, variance ``np(1-p)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .exceptions import EstimationError, SpecError

TAIL_EPS = 1e-10
MAX_SUPPORT = 10**6


class Family(str, enum.Enum):
    GP = "gp"
    NB = "nb"
    BINOMIAL = "binomial"

    @classmethod
    def parse(cls, value):
        if isinstance(value, Family):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "gp": cls.GP,
            "gpd": cls.GP,
            "generalized_poisson": cls.GP,
            "generalizedpoisson": cls.GP,
            "nb": cls.NB,
            "negative_binomial": cls.NB,
            "negativebinomial": cls.NB,
            "b": cls.BINOMIAL,
            "bin": cls.BINOMIAL,
            "binomial": cls.BINOMIAL,
        }
        try:
            return aliases[key]
        except KeyError:
            raise SpecError(f"unknown family {value!r}") from None


PARAM_NAMES = {
    Family.GP: ("theta", "lambda"),
    Family.NB: ("r", "p"),
    Family.BINOMIAL: ("n", "p"),
}


@dataclass(frozen=True)
class MarginalSpec:
    """One margin: a family tag plus the parameters of that family only."""

    family: Family
    theta: float | None = None
    lam: float | None = None
    r: int | None = None
    n: int | None = None
    p: float | None = None

    @classmethod
    def gp(cls, theta, lam):
        return cls(Family.GP, theta=float(theta), lam=float(lam))

    @classmethod
    def nb(cls, r, p):
        return cls(Family.NB, r=r, p=float(p))

    @classmethod
    def binomial(cls, n, p):
        return cls(Family.BINOMIAL, n=n, p=float(p))

    def params(self):
        """Parameter values in table order (see ``PARAM_NAMES``)."""
        if self.family is Family.GP:
            return (self.theta, self.lam)
        if self.family is Family.NB:
            return (self.r, self.p)
        return (self.n, self.p)

    def to_dict(self):
        names = PARAM_NAMES[self.family]
        return {"family": self.family.value, **dict(zip(names, self.params()))}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        fam = Family.parse(d.pop("family"))
        names = PARAM_NAMES[fam]
        missing = [k for k in names if k not in d]
        extra = sorted(set(d) - set(names))
        if missing or extra:
            raise SpecError(
                f"{fam.value} margin needs keys {list(names)}; "
                f"missing {missing}, unexpected {extra}"
            )
        a, b = (d[k] for k in names)
        if fam is Family.GP:
            return cls.gp(a, b)
        if fam is Family.NB:
            return cls.nb(a, b)
        return cls.binomial(a, b)

    def __str__(self):
        names = PARAM_NAMES[self.family]
        args = ", ".join(f"{k}={v}" for k, v in zip(names, self.params()))
        return f"{self.family.value}({args})"


@dataclass(frozen=True)
class Violation:
    field: str
    constraint: str
    value: object

    def __str__(self):
        return f"{self.field}={self.value!r} violates {self.constraint}"


@dataclass(frozen=True)
class ValidationReport:
    spec: MarginalSpec
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def messages(self):
        return [str(v) for v in self.violations]


def gp_support_limit(theta, lam):
    """Largest integer m with ``theta + m*lam > 0`` (``None`` when lam >= 0)."""
    if lam >= 0:
        return None
    m = math.ceil(theta / -lam) - 1
    while m > 0 and theta + m * lam <= 0:
        m -= 1
    while theta + (m + 1) * lam > 0:
        m += 1
    return m


def _is_int(x):
    if isinstance(x, (bool, np.bool_)):
        return False
    if isinstance(x, (int, np.integer)):
        return True
    return isinstance(x, (float, np.floating)) and math.isfinite(x) and float(x).is_integer()


def _finite(x):
    try:
        return math.isfinite(float(x))
    except (TypeError, ValueError):
        return False


def validate_spec(spec: MarginalSpec) -> ValidationReport:
    """Check parameter ranges; never raises, returns every violated constraint."""
    bad = []
    fam = spec.family
    if fam is Family.GP:
        theta, lam = spec.theta, spec.lam
        if not _finite(theta) or theta <= 0:
            bad.append(Violation("theta", "θ > 0", theta))
        if not _finite(lam) or lam >= 1:
            bad.append(Violation("lambda", "λ < 1", lam))
        elif lam < 0:
            if lam < -1:
                bad.append(Violation("lambda", "λ >= -1", lam))
            elif _finite(theta) and theta > 0:
                m = gp_support_limit(theta, lam)
                if m < 4:
                    bad.append(
                        Violation("lambda", "λ >= max(-1, -θ/m) with m >= 4", lam)
                    )
    else:
        count_name, count = ("r", spec.r) if fam is Family.NB else ("n", spec.n)
        if not _is_int(count) or count < 1:
            bad.append(Violation(count_name, f"{count_name} integer >= 1", count))
        if not _finite(spec.p) or not 0 < spec.p < 1:
            bad.append(Violation("p", "0 < p < 1", spec.p))
    return ValidationReport(spec, tuple(bad))


def require_valid(spec):
    report = validate_spec(spec)
    if not report.ok:
        raise SpecError(f"invalid {spec}: " + "; ".join(report.messages()))
    return spec


def logpmf(spec: MarginalSpec, k):
    """Log point probabilities; ``-inf`` outside the support."""
    require_valid(spec)
    k = np.asarray(k)
    kf = k.astype(float)
    out = np.full(kf.shape, -np.inf)
    fam = spec.family
    if fam is Family.GP:
        theta, lam = spec.theta, spec.lam
        m = gp_support_limit(theta, lam)
        ok = kf >= 0
        if m is not None:
            ok &= kf <= m
        kk = kf[ok]
        out[ok] = (
            math.log(theta) + (kk - 1) * np.log(theta + lam * kk) - theta - lam * kk - gammaln(kk + 1)
        )
    elif fam is Family.NB:
        r, p = float(spec.r), spec.p
        ok = kf >= 0
        kk = kf[ok]
        out[ok] = (
            gammaln(r + kk) - gammaln(kk + 1) - gammaln(r) + r * math.log(p) + kk * math.log1p(-p)
        )
    else:
        n, p = int(spec.n), spec.p
        ok = (kf >= 0) & (kf <= n)
        kk = kf[ok]
        out[ok] = (
            gammaln(n + 1) - gammaln(kk + 1) - gammaln(n - kk + 1)
            + kk * math.log(p) + (n - kk) * math.log1p(-p)
        )
    return out if out.ndim else float(out)


def pmf(spec: MarginalSpec, k):
    """P(X = k), evaluated in log space."""
    return np.exp(logpmf(spec, k))


def moments(spec: MarginalSpec):
    """Closed-form ``(mean, variance)``."""
    require_valid(spec)
    if spec.family is Family.GP:
        d = 1.0 - spec.lam
        return spec.theta / d, spec.theta / d**3
    if spec.family is Family.NB:
        q = 1.0 - spec.p
        return spec.r * q / spec.p, spec.r * q / spec.p**2
    return spec.n * spec.p, spec.n * spec.p * (1.0 - spec.p)


@dataclass(frozen=True, eq=False)
class TruncatedPmf:
    """Finite PMF on the contiguous support ``offset .. offset + len(probs) - 1``.

    ``probs`` are normalized to total mass 1; ``raw_mass`` keeps the mass the
    untruncated family placed on the support before normalization.
    """

    probs: np.ndarray
    offset: int = 0
    raw_mass: float = 1.0
    cdf: np.ndarray = field(init=False, repr=False)
    mean: float = field(init=False)
    variance: float = field(init=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0 or np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise SpecError("probabilities must be a non-empty nonnegative vector")
        probs.setflags(write=False)
        cdf = np.cumsum(probs)
        cdf.setflags(write=False)
        k = self.offset + np.arange(probs.size)
        mean = float(np.dot(k, probs))
        var = float(np.dot((k - mean) ** 2, probs))
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "cdf", cdf)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    @property
    def support_max(self):
        return self.offset + self.probs.size - 1

    @property
    def support(self):
        return self.offset + np.arange(self.probs.size)

    @property
    def deficit(self):
        return 1.0 - self.raw_mass

    def __eq__(self, other):
        if not isinstance(other, TruncatedPmf):
            return NotImplemented
        return (
            self.offset == other.offset
            and self.raw_mass == other.raw_mass
            and np.array_equal(self.probs, other.probs)
        )

    __hash__ = None


def _scan_upper_limit(spec, mean, sd, cap):
    """Smallest K such that every k > K has pmf <= TAIL_EPS (scan past the mode)."""
    hi = int(min(cap + 1, max(64, math.ceil(mean + 12 * sd + 16))))
    while True:
        p = pmf(spec, np.arange(hi))
        mode = int(np.argmax(p))
        below = np.flatnonzero(p[mode + 1:] <= TAIL_EPS)
        if below.size:
            return mode + int(below[0]), p
        if hi > cap:
            return None, p
        hi = min(2 * hi, cap + 1)


def truncate_support(spec: MarginalSpec) -> TruncatedPmf:
    """Tabulate the PMF on ``0..K`` with the pseudo upper limit K.

    Binomial margins use ``K = n``. GP and NB margins scan upward from the mode;
    K is the last value before the first point probability <= 1e-10 (the tail
    decays monotonically past the mode). Under-dispersed GP never goes past m.
    """
    require_valid(spec)
    if spec.family is Family.BINOMIAL:
        probs = pmf(spec, np.arange(int(spec.n) + 1))
    else:
        mean, var = moments(spec)
        cap = MAX_SUPPORT
        if spec.family is Family.GP and spec.lam < 0:
            cap = min(cap, gp_support_limit(spec.theta, spec.lam))
        K, p = _scan_upper_limit(spec, mean, math.sqrt(var), cap)
        if K is None:
            if cap < MAX_SUPPORT:
                K = cap
            else:
                raise SpecError(f"{spec}: no pseudo upper limit below {MAX_SUPPORT}")
        probs = p[: K + 1]
    raw = float(probs.sum())
    return TruncatedPmf(probs / raw, 0, raw)


def quantile(pmf_: TruncatedPmf, u):
    """Smallest support point k with ``cdf[k] > u``; u beyond the last CDF value maps to K."""
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(~(u_arr >= 0)) or np.any(u_arr >= 1):
        raise ValueError("u must lie in [0, 1)")
    idx = np.minimum(np.searchsorted(pmf_.cdf, u_arr, side="right"), pmf_.probs.size - 1)
    out = pmf_.offset + idx
    return int(out) if out.ndim == 0 else out.astype(np.int64)


@dataclass(frozen=True)
class ParamEstimate:
    """Method-of-moments estimates. ``r``/``n`` stay unrounded; see ``rounded``."""

    family: Family
    sample_mean: float
    sample_variance: float
    theta: float | None = None
    lam: float | None = None
    r: float | None = None
    n: float | None = None
    p: float | None = None

    def params(self):
        if self.family is Family.GP:
            return (self.theta, self.lam)
        if self.family is Family.NB:
            return (self.r, self.p)
        return (self.n, self.p)

    def rounded(self):
        """Spec with the count parameter rounded up to an integer (GP unchanged)."""
        if self.family is Family.GP:
            return MarginalSpec.gp(self.theta, self.lam)
        if self.family is Family.NB:
            return MarginalSpec.nb(math.ceil(self.r), self.p)
        return MarginalSpec.binomial(math.ceil(self.n), self.p)


def mom_from_moments(mean, var, family):
    """Vectorized moment inversion; returns the two parameter arrays.

    Entries with infeasible moments (NB needs var > mean, binomial var < mean,
    GP var > 0) come back as NaN.
    """
    fam = Family.parse(family)
    m = np.asarray(mean, dtype=np.float64)
    v = np.asarray(var, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam is Family.GP:
            ok = (m > 0) & (v > 0)
            s = np.sqrt(m / v)
            a, b = m * s, 1.0 - s
        elif fam is Family.NB:
            ok = (m > 0) & (v > m)
            a, b = m * m / (v - m), m / v
        else:
            ok = (m > 0) & (v > 0) & (v < m)
            b = 1.0 - v / m
            a = m / b
    a = np.where(ok, a, np.nan)
    b = np.where(ok, b, np.nan)
    if a.ndim == 0:
        return float(a), float(b)
    return a, b


def mom_estimate(sample, family) -> ParamEstimate:
    """Method-of-moments fit from the sample mean and (n-1) sample variance."""
    fam = Family.parse(family)
    x = np.asarray(sample)
    if x.ndim != 1 or x.size < 2:
        raise EstimationError("need a 1-d sample of size >= 2")
    if np.any(x < 0):
        raise EstimationError("sample must be nonnegative")
    mbar = float(x.mean())
    vbar = float(x.var(ddof=1))
    a, b = mom_from_moments(mbar, vbar, fam)
    if math.isnan(a):
        need = {Family.GP: "variance > 0", Family.NB: "variance > mean",
                Family.BINOMIAL: "0 < variance < mean"}[fam]
        raise EstimationError(
            f"{fam.value}: infeasible moments mean={mbar:.6g} var={vbar:.6g} ({need})"
        )
    if fam is Family.GP:
        return ParamEstimate(fam, mbar, vbar, theta=a, lam=b)
    if fam is Family.NB:
        return ParamEstimate(fam, mbar, vbar, r=a, p=b)
    return ParamEstimate(fam, mbar, vbar, n=a, p=b)
