"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin. The compiled path is used unless the
environment variable ``MULTIDISCRETE_USE_NUMBA`` is set to ``0`` (or numba
cannot be imported). Kernels only ever return integers or integer sums, so
both paths produce bit-identical results; randomness is always drawn by the
caller with numpy.
"""

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("MULTIDISCRETE_USE_NUMBA", "1") != "0"


# ---------------------------------------------------------------------------
# numpy implementations


def expand_column_numpy(binary, u, off0, cdf0, off1, cdf1):
    idx0 = np.minimum(np.searchsorted(cdf0, u, side="right"), cdf0.size - 1)
    idx1 = np.minimum(np.searchsorted(cdf1, u, side="right"), cdf1.size - 1)
    return np.where(binary != 0, idx1 + off1, idx0 + off0).astype(np.int64)


def pair_sums_numpy(x, y):
    return (
        int(x.sum()),
        int(y.sum()),
        int((x * x).sum()),
        int((y * y).sum()),
        int((x * y).sum()),
    )


def bootstrap_sums_numpy(x, idx):
    xb = x[idx]
    return xb.sum(axis=1), (xb * xb).sum(axis=1)


# ---------------------------------------------------------------------------
# loop implementations (compiled when numba is on)


def _search_right(cdf, u):
    # smallest i with cdf[i] > u, clipped to the last index
    lo = 0
    hi = cdf.size
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    if lo >= cdf.size:
        lo = cdf.size - 1
    return lo


def _expand_column_loop(binary, u, off0, cdf0, off1, cdf1):
    n = binary.size
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        if binary[i] != 0:
            out[i] = off1 + _search_right(cdf1, u[i])
        else:
            out[i] = off0 + _search_right(cdf0, u[i])
    return out


def _pair_sums_loop(x, y):
    sx = 0
    sy = 0
    sxx = 0
    syy = 0
    sxy = 0
    for i in range(x.size):
        a = x[i]
        b = y[i]
        sx += a
        sy += b
        sxx += a * a
        syy += b * b
        sxy += a * b
    return sx, sy, sxx, syy, sxy


def _bootstrap_sums_loop(x, idx):
    nb, n = idx.shape
    s1 = np.zeros(nb, dtype=np.int64)
    s2 = np.zeros(nb, dtype=np.int64)
    for b in range(nb):
        t1 = 0
        t2 = 0
        for i in range(n):
            v = x[idx[b, i]]
            t1 += v
            t2 += v * v
        s1[b] = t1
        s2[b] = t2
    return s1, s2


if NUMBA_AVAILABLE:
    _search_right_jit = njit(cache=True)(_search_right)

    @njit(cache=True)
    def expand_column_jit(binary, u, off0, cdf0, off1, cdf1):
        n = binary.size
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            if binary[i] != 0:
                out[i] = off1 + _search_right_jit(cdf1, u[i])
            else:
                out[i] = off0 + _search_right_jit(cdf0, u[i])
        return out

    pair_sums_jit = njit(cache=True)(_pair_sums_loop)
    bootstrap_sums_jit = njit(cache=True)(_bootstrap_sums_loop)
else:  # pragma: no cover
    expand_column_jit = _expand_column_loop
    pair_sums_jit = _pair_sums_loop
    bootstrap_sums_jit = _bootstrap_sums_loop


# ---------------------------------------------------------------------------
# dispatch


def expand_column(binary, u, off0, cdf0, off1, cdf1):
    """Inverse-CDF draw per entry from one of two conditional CDFs.

    ``binary[i] == 0`` draws ``off0 + min{k : cdf0[k] > u[i]}``, otherwise the
    same against ``cdf1``. Indices are clipped to the last support point.
    """
    binary = np.ascontiguousarray(binary, dtype=np.uint8)
    u = np.ascontiguousarray(u, dtype=np.float64)
    cdf0 = np.ascontiguousarray(cdf0, dtype=np.float64)
    cdf1 = np.ascontiguousarray(cdf1, dtype=np.float64)
    if USE_NUMBA:
        return expand_column_jit(binary, u, int(off0), cdf0, int(off1), cdf1)
    return expand_column_numpy(binary, u, int(off0), cdf0, int(off1), cdf1)


def pair_sums(x, y):
    """Exact ``(sum x, sum y, sum x^2, sum y^2, sum xy)`` for integer columns."""
    x = np.ascontiguousarray(x, dtype=np.int64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if USE_NUMBA:
        return tuple(int(v) for v in pair_sums_jit(x, y))
    return pair_sums_numpy(x, y)


def bootstrap_sums(x, idx):
    """Per-resample exact ``(sum, sum of squares)`` of ``x[idx[b]]``."""
    x = np.ascontiguousarray(x, dtype=np.int64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if USE_NUMBA:
        return bootstrap_sums_jit(x, idx)
    return bootstrap_sums_numpy(x, idx)


def pearson_from_sums(n, sx, sy, sxx, syy, sxy):
    """Pearson correlation from exact integer sums (Python ints, no overflow)."""
    num = n * sxy - sx * sy
    vx = n * sxx - sx * sx
    vy = n * syy - sy * sy
    if vx <= 0 or vy <= 0:
        return float("nan")
    return float(num) / (float(vx) ** 0.5 * float(vy) ** 0.5)
