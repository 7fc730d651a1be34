"""Median collapsing of a discrete margin to a binary variable, and its reverse."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exceptions import DegenerateMarginError
from .marginals import TruncatedPmf


class Side(str, enum.Enum):
    ZERO = "zero"
    ONE = "one"


@dataclass(frozen=True, eq=False)
class CollapsedMargin:
    """A margin split at its median M into categories 0 (low) and 1 (high).

    Values below M are category 0, values above M are category 1, and M itself
    sits on ``median_side``. ``cond_zero`` and ``cond_one`` are the source PMF
    restricted to each category and renormalized.
    """

    source: TruncatedPmf
    median: int
    median_side: Side
    p_b: float
    cond_zero: TruncatedPmf
    cond_one: TruncatedPmf

    @property
    def threshold(self):
        """Smallest value in category 1."""
        return self.cond_one.offset

    @property
    def attenuation(self):
        """Correlation between the discrete variable and its binary collapse.

        Expansion draws independently within each category, so a binary-pair
        correlation ``d`` becomes ``d * a_i.attenuation * a_j.attenuation``
        on the discrete scale.
        """
        q = 1.0 - self.p_b
        spread = self.cond_one.mean - self.cond_zero.mean
        return math.sqrt(self.p_b * q) * spread / math.sqrt(self.source.variance)

    def __eq__(self, other):
        if not isinstance(other, CollapsedMargin):
            return NotImplemented
        return (
            self.median == other.median
            and self.median_side == other.median_side
            and self.p_b == other.p_b
            and self.source == other.source
            and self.cond_zero == other.cond_zero
            and self.cond_one == other.cond_one
        )

    __hash__ = None


def collapse_margin(pmf: TruncatedPmf) -> CollapsedMargin:
    """Dichotomize at the median, sending M to whichever side puts E[Y] closer to 0.5.

    The median is the smallest k with ``cdf[k] >= 0.5``. An exact tie sends M
    to category 1.
    """
    probs = pmf.probs
    m_idx = int(np.searchsorted(pmf.cdf, 0.5, side="left"))
    m_idx = min(m_idx, probs.size - 1)
    with_m = float(probs[m_idx:].sum())
    without_m = float(probs[m_idx + 1:].sum())
    if abs(with_m - 0.5) <= abs(without_m - 0.5):
        side, split, p_b = Side.ONE, m_idx, with_m
    else:
        side, split, p_b = Side.ZERO, m_idx + 1, without_m
    if split <= 0 or split >= probs.size or not 0.0 < p_b < 1.0:
        raise DegenerateMarginError(
            f"margin on {pmf.offset}..{pmf.support_max} collapses to a constant "
            f"(p_b={p_b:.6g}); needs mass on both sides of the median"
        )
    zero = TruncatedPmf(probs[:split] / (1.0 - p_b), pmf.offset)
    one = TruncatedPmf(probs[split:] / p_b, pmf.offset + split)
    return CollapsedMargin(pmf, pmf.offset + m_idx, side, p_b, zero, one)


def expand(margin: CollapsedMargin, binary, stream):
    """Replace each binary entry by a draw from its category's conditional PMF.

    One uniform is consumed per entry, in input order, whatever its category.
    """
    binary = np.asarray(binary)
    if binary.ndim != 1:
        raise ValueError("binary must be a 1-d vector")
    if binary.size and not np.all((binary == 0) | (binary == 1)):
        raise ValueError("binary entries must be 0 or 1")
    u = stream.random(binary.size)
    return _kernels.expand_column(
        binary,
        u,
        margin.cond_zero.offset,
        margin.cond_zero.cdf,
        margin.cond_one.offset,
        margin.cond_one.cdf,
    )
