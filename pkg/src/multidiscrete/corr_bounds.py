"""Attainable correlation bounds.

Two sources bound a target correlation between discrete margins:

* GSC (generate, sort, correlate): Pearson correlation of comonotone and
  antimonotone samples from the two margins approximates the Frechet-Hoeffding
  bounds on the discrete scale.
* Binary-pair bounds on the collapsed variables. Because expansion multiplies
  the binary correlation by the product of the two margins' attenuation
  factors, the binary bounds translate to the discrete scale as
  ``attenuation * ep_bounds``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, streams
from .marginals import TruncatedPmf, quantile


def ep_binary_bounds(p_i, p_j):
    """Range of Pearson correlations attainable by two Bernoulli variables."""
    if not (0 < p_i < 1 and 0 < p_j < 1):
        raise ValueError("binary probabilities must lie strictly in (0, 1)")
    q_i, q_j = 1.0 - p_i, 1.0 - p_j
    lower = max(-math.sqrt(p_i * p_j / (q_i * q_j)), -math.sqrt(q_i * q_j / (p_i * p_j)))
    upper = min(math.sqrt(p_i * q_j / (q_i * p_j)), math.sqrt(q_i * p_j / (p_i * q_j)))
    return lower, upper


def int_pearson(x, y):
    """Pearson correlation of two integer vectors from exact integer sums."""
    sums = _kernels.pair_sums(x, y)
    return _kernels.pearson_from_sums(len(x), *sums)


def gsc_bounds(a: TruncatedPmf, b: TruncatedPmf, n, stream):
    """Approximate (lower, upper) correlation bounds by generate-sort-correlate.

    Draws n uniforms; both margins are read off the same uniforms (comonotone,
    upper bound) and against the reversed order (antimonotone, lower bound).
    """
    if n < 10_000:
        raise ValueError("GSC needs n >= 10000")
    if a.variance <= 0 or b.variance <= 0:
        raise ValueError("GSC needs margins with positive variance")
    u = np.sort(stream.random(n))
    xa = quantile(a, u)
    xb = quantile(b, u)
    upper = int_pearson(xa, xb)
    lower = int_pearson(xa, xb[::-1])
    return lower, upper


@dataclass(frozen=True)
class PairBounds:
    i: int
    j: int
    target: float
    gsc_lower: float
    gsc_upper: float
    ep_lower: float
    ep_upper: float
    attenuation: float
    verdict: str = field(default="")

    @property
    def lower(self):
        return max(self.gsc_lower, self.attenuation * self.ep_lower)

    @property
    def upper(self):
        return min(self.gsc_upper, self.attenuation * self.ep_upper)

    @property
    def implied_binary(self):
        """Binary-pair correlation the target needs after attenuation."""
        return self.target / self.attenuation

    @property
    def source(self):
        """Which bound binds on the side the target sits on."""
        if self.target < 0:
            return "GSC" if self.gsc_lower >= self.attenuation * self.ep_lower else "EP"
        return "GSC" if self.gsc_upper <= self.attenuation * self.ep_upper else "EP"

    @property
    def label(self):
        return f"rho_{self.i + 1}{self.j + 1}" if max(self.i, self.j) < 9 else f"rho_{self.i + 1}_{self.j + 1}"

    def to_dict(self):
        return {
            "pair": [self.i + 1, self.j + 1],
            "target": self.target,
            "lower": self.lower,
            "upper": self.upper,
            "source": self.source,
            "verdict": self.verdict,
            "gsc": [self.gsc_lower, self.gsc_upper],
            "binary": [self.ep_lower, self.ep_upper],
            "attenuation": self.attenuation,
            "implied_binary": self.implied_binary,
        }


@dataclass(frozen=True)
class BoundsReport:
    pairs: tuple
    band: float = 0.01

    @property
    def feasible(self):
        return all(p.verdict != "infeasible" for p in self.pairs)

    def infeasible_pairs(self):
        return [p for p in self.pairs if p.verdict == "infeasible"]

    def marginal_pairs(self):
        return [p for p in self.pairs if p.verdict == "marginal"]

    def to_dict(self):
        return {"feasible": self.feasible, "band": self.band, "pairs": [p.to_dict() for p in self.pairs]}

    def format(self):
        head = f"{'pair':<9}{'target':>9}{'lower':>9}{'upper':>9}  {'src':<4}{'implied_b':>10}  verdict"
        lines = [head, "-" * len(head)]
        for p in self.pairs:
            lines.append(
                f"{p.label:<9}{p.target:>9.4f}{p.lower:>9.4f}{p.upper:>9.4f}  {p.source:<4}"
                f"{p.implied_binary:>10.4f}  {p.verdict}"
            )
        return "\n".join(lines)


def _verdict(target, lower, upper, band):
    if target < lower or target > upper:
        return "infeasible"
    if target != 0 and (target - lower < band or upper - target < band):
        return "marginal"
    return "feasible"


def pair_bounds(a, b, target, n_gsc, stream, i=0, j=1, band=0.01):
    """Bounds for one pair of collapsed margins."""
    g_lo, g_hi = gsc_bounds(a.source, b.source, n_gsc, stream)
    e_lo, e_hi = ep_binary_bounds(a.p_b, b.p_b)
    att = a.attenuation * b.attenuation
    pb = PairBounds(i, j, float(target), g_lo, g_hi, e_lo, e_hi, att)
    return PairBounds(i, j, float(target), g_lo, g_hi, e_lo, e_hi, att, _verdict(target, pb.lower, pb.upper, band))


def check_target_matrix(margins, sigma, n_gsc=100_000, seed=0, band=0.01) -> BoundsReport:
    """Check every off-diagonal target against GSC and binary-pair bounds.

    ``margins`` are :class:`~multidiscrete.collapse.CollapsedMargin` objects.
    Each pair (i, j) uses its own GSC stream keyed by the pair indices.
    A feasible target within ``band`` of a bound is reported as ``marginal``.
    """
    sigma = np.asarray(sigma, dtype=float)
    J = len(margins)
    if sigma.shape != (J, J):
        raise ValueError(f"correlation matrix is {sigma.shape}, expected {(J, J)}")
    pairs = []
    for i in range(J):
        for j in range(i + 1, J):
            stream = streams.derive(seed, streams.GSC, i, j)
            pairs.append(pair_bounds(margins[i], margins[j], sigma[i, j], n_gsc, stream, i, j, band))
    return BoundsReport(tuple(pairs), band)
