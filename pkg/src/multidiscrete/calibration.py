"""Intermediate binary correlation search.

For each pair of collapsed margins the binary correlation ``delta_b`` is tuned
by simulation until binary data generated at ``delta_b`` and expanded back to
the discrete scale shows the target correlation ``delta_star``.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gaussian_core as gc
from . import streams
from .collapse import CollapsedMargin, expand
from .corr_bounds import PairBounds, ep_binary_bounds, gsc_bounds, int_pearson
from .exceptions import CalibrationError, InfeasibleCorrelationError

EDGE_SHRINK = 1e-4


@dataclass(frozen=True)
class CalibrationOptions:
    n_binary: int = 100_000
    tolerance: float = 0.001
    step_fraction: float = 0.5
    max_iterations: int = 50
    seed: int = 0
    n_gsc: int = 100_000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.n_binary < 10_000:
            raise ValueError("n_binary must be >= 10000")
        if not 0 < self.step_fraction <= 1:
            raise ValueError("step_fraction must lie in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.n_gsc < 10_000:
            raise ValueError("n_gsc must be >= 10000")

    def to_dict(self):
        return {
            "n_binary": self.n_binary,
            "tolerance": self.tolerance,
            "step_fraction": self.step_fraction,
            "max_iterations": self.max_iterations,
            "seed": self.seed,
            "n_gsc": self.n_gsc,
        }

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown calibration option(s): {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class PairCalibration:
    """Outcome of one pair's search.

    ``trajectory`` holds ``(delta_b, delta_star_c)`` for each simulated
    iteration. A zero target is solved exactly (independent binaries expand
    to independent discrete columns) and has an empty trajectory.
    """

    i: int
    j: int
    delta_star: float
    delta_b: float
    delta_star_c: float
    iterations: int
    converged: bool
    trajectory: tuple = field(default=())

    def to_dict(self):
        return {
            "pair": [self.i, self.j],
            "delta_star": self.delta_star,
            "delta_b": self.delta_b,
            "delta_star_c": self.delta_star_c,
            "iterations": self.iterations,
            "converged": self.converged,
            "trajectory": [list(t) for t in self.trajectory],
        }

    @classmethod
    def from_dict(cls, d):
        i, j = d["pair"]
        return cls(
            int(i), int(j), float(d["delta_star"]), float(d["delta_b"]), float(d["delta_star_c"]),
            int(d["iterations"]), bool(d["converged"]),
            tuple((float(a), float(b)) for a, b in d["trajectory"]),
        )


def simulate_pair_corr(a: CollapsedMargin, b: CollapsedMargin, delta_b, n, stream):
    """Discrete-scale correlation after generating n binary pairs at delta_b and expanding."""
    rho = gc.solve_tetrachoric(a.p_b, b.p_b, delta_b)
    z = gc.mvn_sample(np.array([[1.0, rho], [rho, 1.0]]), n, stream)
    y = gc.dichotomize(z, [a.p_b, b.p_b])
    xa = expand(a, y[:, 0], stream)
    xb = expand(b, y[:, 1], stream)
    return int_pearson(xa, xb)


def _check_start(a, b, delta_star, opts, stream, bounds):
    lo, hi = ep_binary_bounds(a.p_b, b.p_b)
    if not lo <= delta_star <= hi:
        raise InfeasibleCorrelationError(
            f"target {delta_star:.6g} outside binary bounds [{lo:.6g}, {hi:.6g}]"
        )
    if bounds is None:
        g_lo, g_hi = gsc_bounds(a.source, b.source, opts.n_gsc, stream)
    else:
        g_lo, g_hi = bounds.gsc_lower, bounds.gsc_upper
    if not g_lo <= delta_star <= g_hi:
        raise InfeasibleCorrelationError(
            f"target {delta_star:.6g} outside GSC bounds [{g_lo:.6g}, {g_hi:.6g}]"
        )
    needed = delta_star / (a.attenuation * b.attenuation)
    if not lo <= needed <= hi:
        raise InfeasibleCorrelationError(
            f"target {delta_star:.6g} needs binary correlation {needed:.6g}, "
            f"outside [{lo:.6g}, {hi:.6g}]"
        )
    return lo + EDGE_SHRINK, hi - EDGE_SHRINK


def calibrate_pair(a: CollapsedMargin, b: CollapsedMargin, delta_star, opts: CalibrationOptions,
                   stream, pair=(0, 1), bounds: PairBounds | None = None) -> PairCalibration:
    """Search for the binary correlation that reproduces ``delta_star`` after expansion.

    Starts at ``delta_b = delta_star`` and updates
    ``delta_b += step_fraction * (delta_star - delta_star_c)``, clamped to the
    binary bounds shrunk by 1e-4, with fresh draws from ``stream`` each
    iteration. Non-convergence is returned with ``converged=False``.

    Raises
    ------
    InfeasibleCorrelationError
        If the target lies outside the GSC or binary bounds, or needs a binary
        correlation outside the binary bounds once attenuation is accounted for.
    """
    delta_star = float(delta_star)
    i, j = pair
    if delta_star == 0.0:
        return PairCalibration(i, j, 0.0, 0.0, 0.0, 0, True, ())
    lo, hi = _check_start(a, b, delta_star, opts, stream, bounds)
    delta_b = min(max(delta_star, lo), hi)
    traj = []
    for it in range(1, opts.max_iterations + 1):
        got = simulate_pair_corr(a, b, delta_b, opts.n_binary, stream)
        traj.append((delta_b, got))
        if abs(delta_star - got) <= opts.tolerance:
            return PairCalibration(i, j, delta_star, delta_b, got, it, True, tuple(traj))
        delta_b = min(max(delta_b + opts.step_fraction * (delta_star - got), lo), hi)
    last_b, last_c = traj[-1]
    return PairCalibration(i, j, delta_star, last_b, last_c, opts.max_iterations, False, tuple(traj))


@dataclass(frozen=True, eq=False)
class MatrixCalibration:
    sigma_b: np.ndarray
    repair: gc.PdRepairReport
    pairs: tuple

    def __iter__(self):
        # unpacks as (matrix, repair report, pair list)
        return iter((self.sigma_b, self.repair, list(self.pairs)))


def _pair_job(args):
    a, b, target, opts, i, j, bounds = args
    stream = streams.derive(opts.seed, streams.CALIBRATE, i, j)
    return calibrate_pair(a, b, target, opts, stream, (i, j), bounds)


def default_workers():
    try:
        return max(1, int(os.environ.get("MULTIDISCRETE_WORKERS", "1")))
    except ValueError:
        return 1


def calibrate_matrix(margins, sigma_star, opts: CalibrationOptions, bounds=None,
                     workers=None) -> MatrixCalibration:
    """Calibrate every pair on its own stream, assemble, and repair to PD.

    Parameters
    ----------
    margins : list of CollapsedMargin
    sigma_star : array_like
        Target correlation matrix.
    bounds : BoundsReport, optional
        Precomputed bounds; when given, GSC is not re-run per pair.
    workers : int, optional
        Process count. Defaults to ``MULTIDISCRETE_WORKERS`` or 1. Results do
        not depend on it.
    """
    sigma_star = gc.check_correlation_matrix(sigma_star, "target correlation matrix")
    J = len(margins)
    if sigma_star.shape != (J, J):
        raise ValueError(f"target matrix is {sigma_star.shape}, expected {(J, J)}")
    lookup = {(p.i, p.j): p for p in bounds.pairs} if bounds is not None else {}
    jobs = [
        (margins[i], margins[j], float(sigma_star[i, j]), opts, i, j, lookup.get((i, j)))
        for i in range(J)
        for j in range(i + 1, J)
    ]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            results = list(ex.map(_pair_job, jobs))
    else:
        results = [_pair_job(job) for job in jobs]

    failed = [r for r in results if not r.converged]
    if failed:
        names = ", ".join(f"({r.i + 1},{r.j + 1})" for r in failed)
        raise CalibrationError(f"calibration did not converge for pair(s) {names}", results)

    sigma_b = np.eye(J)
    for r in results:
        sigma_b[r.i, r.j] = sigma_b[r.j, r.i] = r.delta_b
    repair = gc.nearest_pd(sigma_b)
    return MatrixCalibration(repair.repaired, repair, tuple(results))


def trajectories_csv(pairs):
    """Rows ``i,j,iteration,delta_b,delta_star_c`` (1-based pair indices)."""
    lines = ["i,j,iteration,delta_b,delta_star_c"]
    for p in pairs:
        for k, (db, dc) in enumerate(p.trajectory, start=1):
            lines.append(f"{p.i + 1},{p.j + 1},{k},{db!r},{dc!r}")
    return "\n".join(lines) + "\n"


__all__ = [
    "CalibrationOptions",
    "PairCalibration",
    "MatrixCalibration",
    "calibrate_pair",
    "calibrate_matrix",
    "simulate_pair_corr",
    "trajectories_csv",
]
