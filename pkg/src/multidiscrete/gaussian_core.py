"""Latent normal machinery for correlated binary generation.

Contains the standard normal quantile, the bivariate normal CDF, the
tetrachoric root solve that maps a binary-pair correlation to a latent normal
correlation, nearest correlation matrix repair, multivariate normal sampling
and dichotomization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .exceptions import DegenerateMarginError, InfeasibleCorrelationError, RepairError

RHO_EDGE = 1.0 - 1e-9
PD_THRESHOLD = 1e-8
NEGATIVE_NOISE = -1e-10

# Gauss-Legendre nodes/weights on [-1, 1] (positive half), orders 6, 12, 20.
_GL = {
    6: (
        (0.9324695142031522, 0.6612093864662647, 0.2386191860831970),
        (0.1713244923791705, 0.3607615730481384, 0.4679139345726904),
    ),
    12: (
        (0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
         0.5873179542866171, 0.3678314989981802, 0.1252334085114692),
        (0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
         0.2031674267230659, 0.2334925365383547, 0.2491470458134029),
    ),
    20: (
        (0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
         0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
         0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
         0.07652652113349733),
        (0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
         0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
         0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
         0.1527533871307259),
    ),
}


def _gl_nodes(order):
    x, w = _GL[order]
    x = np.asarray(x)
    w = np.asarray(w)
    return np.concatenate([-x, x]), np.concatenate([w, w])


def std_normal_quantile(p):
    """z with Phi(z) = p, for 0 < p < 1."""
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(~((p_arr > 0) & (p_arr < 1))):
        raise ValueError("p must lie strictly between 0 and 1")
    z = ndtri(p_arr)
    return float(z) if z.ndim == 0 else z


def _bvn_upper(h, k, r):
    """P(X > h, Y > k) for a standard bivariate normal with correlation r.

    Drezner and Wesolowsky's single-integral reduction evaluated with
    Gauss-Legendre quadrature, following Genz's arrangement (three
    quadrature orders by |r|, and a separate expansion for |r| >= 0.925).
    """
    if r == 0.0:
        return float(ndtr(-h) * ndtr(-k))
    ar = abs(r)
    if ar < 0.3:
        x, w = _gl_nodes(6)
    elif ar < 0.75:
        x, w = _gl_nodes(12)
    else:
        x, w = _gl_nodes(20)
    hk = h * k
    if ar < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r)
        sn = np.sin(asr * (x + 1.0) / 2.0)
        bvn = float(np.dot(w, np.exp((sn * hk - hs) / (1.0 - sn * sn))))
        return bvn * asr / (4.0 * math.pi) + float(ndtr(-h) * ndtr(-k))

    if r < 0:
        k = -k
        hk = -hk
    bvn = 0.0
    if ar < 1.0:
        as_ = (1.0 - r) * (1.0 + r)
        a = math.sqrt(as_)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        bvn = a * math.exp(-(bs / as_ + hk) / 2.0) * (
            1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0
        )
        if hk > -160.0:
            b = math.sqrt(bs)
            bvn -= (
                math.exp(-hk / 2.0) * math.sqrt(2.0 * math.pi) * float(ndtr(-b / a)) * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
            )
        a = a / 2.0
        xs = (a * (x + 1.0)) ** 2
        rs = np.sqrt(1.0 - xs)
        with np.errstate(under="ignore"):
            terms = np.exp(-(bs / xs + hk) / 2.0) * (
                np.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs))
            )
        bvn = -(bvn + a * float(np.dot(w, terms))) / (2.0 * math.pi)
    if r > 0:
        bvn += float(ndtr(-max(h, k)))
    else:
        bvn = -bvn + max(0.0, float(ndtr(-h)) - float(ndtr(-k)))
    return bvn


def bvn_cdf(x1, x2, rho):
    """Standard bivariate normal CDF ``P(Z1 <= x1, Z2 <= x2)`` with correlation rho.

    Infinite limits reduce to the univariate CDF; ``|rho| = 1`` is treated as
    the comonotone / antimonotone limit.
    """
    x1 = float(x1)
    x2 = float(x2)
    rho = float(rho)
    if math.isnan(x1) or math.isnan(x2) or not math.isfinite(rho):
        raise ValueError("bvn_cdf needs non-NaN limits and a finite correlation")
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [-1, 1]")
    if x1 == -math.inf or x2 == -math.inf:
        return 0.0
    if x1 == math.inf:
        return float(ndtr(x2))
    if x2 == math.inf:
        return float(ndtr(x1))
    if rho == 1.0:
        return float(ndtr(min(x1, x2)))
    if rho == -1.0:
        return max(float(ndtr(x1)) - float(ndtr(-x2)), 0.0)
    p = _bvn_upper(-x1, -x2, rho)
    return min(max(p, 0.0), 1.0)


def ep_target(p_j, p_k, delta):
    """Right-hand side of the tetrachoric equation: P(Y_j = 1, Y_k = 1)."""
    return delta * math.sqrt(p_j * (1 - p_j) * p_k * (1 - p_k)) + p_j * p_k


def binary_corr_from_latent(p_j, p_k, rho):
    """Binary-pair correlation induced by thresholding latent normals at z(p)."""
    p11 = bvn_cdf(std_normal_quantile(p_j), std_normal_quantile(p_k), rho)
    return (p11 - p_j * p_k) / math.sqrt(p_j * (1 - p_j) * p_k * (1 - p_k))


def solve_tetrachoric(p_j, p_k, delta, tol=1e-8):
    """Latent correlation rho with ``Phi2(z(p_j), z(p_k); rho) = ep_target(p_j, p_k, delta)``.

    Bracketed Brent search on ``[-1 + 1e-9, 1 - 1e-9]``. A delta sitting on
    an attainable bound returns the bracket endpoint.
    """
    from .corr_bounds import ep_binary_bounds

    for name, p in (("p_j", p_j), ("p_k", p_k)):
        if not 0.0 < p < 1.0:
            raise DegenerateMarginError(f"{name}={p} must lie strictly in (0, 1)")
    lo_b, hi_b = ep_binary_bounds(p_j, p_k)
    slack = 1e-12
    if not lo_b - slack <= delta <= hi_b + slack:
        raise InfeasibleCorrelationError(
            f"binary correlation {delta:.6g} outside attainable [{lo_b:.6g}, {hi_b:.6g}] "
            f"for p=({p_j:.6g}, {p_k:.6g})"
        )
    if delta == 0.0:
        return 0.0
    zj = std_normal_quantile(p_j)
    zk = std_normal_quantile(p_k)
    target = ep_target(p_j, p_k, delta)

    def f(r):
        return bvn_cdf(zj, zk, r) - target

    f_lo = f(-RHO_EDGE)
    f_hi = f(RHO_EDGE)
    if f_lo > 0:
        if f_lo <= tol or delta <= lo_b + slack:
            return -RHO_EDGE
        raise InfeasibleCorrelationError(f"tetrachoric root not bracketed (delta={delta})")
    if f_hi < 0:
        if -f_hi <= tol or delta >= hi_b - slack:
            return RHO_EDGE
        raise InfeasibleCorrelationError(f"tetrachoric root not bracketed (delta={delta})")
    rho = brentq(f, -RHO_EDGE, RHO_EDGE, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(f(rho)) > tol:
        raise InfeasibleCorrelationError(f"tetrachoric residual {f(rho):.3g} exceeds {tol}")
    return float(rho)


@dataclass(frozen=True, eq=False)
class PdRepairReport:
    input: np.ndarray
    repaired: np.ndarray
    was_repaired: bool
    min_eig_before: float
    min_eig_after: float
    iterations: int = 0

    @property
    def max_abs_change(self):
        return float(np.max(np.abs(self.repaired - self.input)))

    def to_dict(self):
        return {
            "input": self.input.tolist(),
            "repaired": self.repaired.tolist(),
            "was_repaired": self.was_repaired,
            "min_eig_before": self.min_eig_before,
            "min_eig_after": self.min_eig_after,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["input"], dtype=float),
            np.asarray(d["repaired"], dtype=float),
            bool(d["was_repaired"]),
            float(d["min_eig_before"]),
            float(d["min_eig_after"]),
            int(d["iterations"]),
        )


def check_correlation_matrix(a, name="matrix"):
    """Validate a symmetric unit-diagonal matrix with entries in [-1, 1]."""
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12:
        raise ValueError(f"{name} is not symmetric")
    if np.any(np.diag(a) != 1.0):
        raise ValueError(f"{name} must have a unit diagonal")
    if np.any(np.abs(a) > 1.0):
        raise ValueError(f"{name} has entries outside [-1, 1]")
    return (a + a.T) / 2.0


def _min_eig(a):
    return float(np.linalg.eigvalsh(a)[0])


def _psd_projection(a, floor=0.0):
    w, v = np.linalg.eigh(a)
    return (v * np.maximum(w, floor)) @ v.T


def _unit_diag(a):
    d = np.sqrt(np.diag(a))
    out = a / np.outer(d, d)
    out = (out + out.T) / 2.0
    np.fill_diagonal(out, 1.0)
    return out


def _floor_eigs(a):
    # rescaling to unit diagonal can nudge the minimum back under the floor
    out = a
    floor = PD_THRESHOLD
    for _ in range(20):
        out = _unit_diag(_psd_projection(out, floor))
        if _min_eig(out) >= PD_THRESHOLD:
            return out
        floor *= 2.0
    raise RepairError("could not lift the minimum eigenvalue to the floor")


def nearest_pd(matrix, tol=1e-7, max_iter=200) -> PdRepairReport:
    """Nearest correlation matrix by Higham's alternating projections.

    Matrices with minimum eigenvalue >= 1e-8 are returned as-is. Those within
    rounding noise of PSD (minimum eigenvalue >= -1e-10) only get their
    eigenvalues floored at 1e-8. Otherwise alternate projection onto the PSD
    cone (with Dykstra's correction) and unit-diagonal restoration until the
    Frobenius change drops to ``tol``, then floor.
    """
    a = check_correlation_matrix(matrix)
    before = _min_eig(a)
    if before >= PD_THRESHOLD:
        return PdRepairReport(a.copy(), a.copy(), False, before, before, 0)
    if before >= NEGATIVE_NOISE:
        out = _floor_eigs(a)
        return PdRepairReport(a.copy(), out, True, before, _min_eig(out), 0)

    y = a.copy()
    ds = np.zeros_like(a)
    for it in range(1, max_iter + 1):
        r = y - ds
        x = _psd_projection(r)
        ds = x - r
        y_new = x.copy()
        np.fill_diagonal(y_new, 1.0)
        change = np.linalg.norm(y_new - y, "fro")
        y = y_new
        if change <= tol:
            break
    else:
        raise RepairError(f"nearest_pd did not converge in {max_iter} iterations")
    out = _floor_eigs((y + y.T) / 2.0)
    return PdRepairReport(a.copy(), out, True, before, _min_eig(out), it)


def cholesky_factor(corr):
    """Lower-triangular factor; eigenvalue-floored square root when Cholesky fails."""
    corr = np.asarray(corr, dtype=np.float64)
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(corr)
        if w[0] < NEGATIVE_NOISE:
            raise RepairError(f"correlation matrix is indefinite (min eigenvalue {w[0]:.3g})")
        return v * np.sqrt(np.maximum(w, 0.0))


def mvn_sample(corr, n, stream):
    """n draws of a zero-mean normal vector with the given correlation.

    The standard normals are drawn column-block first (all n draws for column 0,
    then column 1, ...), so appending a column leaves earlier columns' draws
    unchanged.
    """
    corr = np.atleast_2d(np.asarray(corr, dtype=np.float64))
    if n < 1:
        raise ValueError("n must be >= 1")
    j = corr.shape[0]
    z = stream.standard_normal((j, n)).T
    if j == 1:
        return z.copy()
    return z @ cholesky_factor(corr).T


def dichotomize(z, p):
    """Binary matrix with ``1`` where ``z[:, j] <= z(p[j])``."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if z.shape[1] != p.size:
        raise ValueError(f"z has {z.shape[1]} columns but {p.size} probabilities were given")
    return (z <= std_normal_quantile(p)).astype(np.uint8)
