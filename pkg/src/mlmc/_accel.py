"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import: numba when it imports cleanly and
``MLMC_DISABLE_NUMBA`` is unset (or "0"), numpy otherwise.  ``set_backend``
switches at runtime; the benchmark uses it to time both paths.

Family codes for the separable 1D kernels:
    0  gauss-ar1       p0 = a, p1 = sigma
    1  uniform-window  p0 = w (half-width), p1 unused
"""
import math
import os

import numpy as np
from scipy.special import erfc as _erfc_vec

GAUSS = 0
WINDOW = 1
_SQRT2 = math.sqrt(2.0)

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # TBB in this image is too old; workqueue is always available
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

    prange = range


def _env_disabled():
    return os.environ.get("MLMC_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


_backend = "numba" if HAVE_NUMBA and not _env_disabled() else "numpy"


def backend():
    return _backend


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    prev, _backend = _backend, name
    return prev


def configure_threads(n=None):
    """Apply a worker count (default: ``MLMC_THREADS``) to the numba pool.

    Every parallel kernel writes disjoint outputs with a fixed per-output
    reduction order, so results do not depend on the count.
    """
    if n is None:
        env = os.environ.get("MLMC_THREADS")
        if not env:
            return None
        n = int(env)
    if not HAVE_NUMBA:
        return None
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def n_images_for(family, p0, p1):
    """Reflection images needed so the truncated fold loses < 1e-300 mass."""
    if family == GAUSS:
        return int(math.ceil((40.0 * p1 + 2.0) / 4.0)) + 1
    return int(math.ceil((p0 + 2.0) / 4.0)) + 1


# ---------------------------------------------------------------- numba path

@njit(cache=True)
def _interval_mass_nb(family, p0, p1, x, lo, hi):
    if hi <= lo:
        return 0.0
    if family == GAUSS:
        mu = p0 * x
        s = p1 * _SQRT2
        if lo - mu > 0.0:
            # upper tail: difference of survival functions keeps precision
            return 0.5 * (math.erfc((lo - mu) / s) - math.erfc((hi - mu) / s))
        return 0.5 * (math.erfc(-(hi - mu) / s) - math.erfc(-(lo - mu) / s))
    a = max(lo, x - p0)
    b = min(hi, x + p0)
    if b <= a:
        return 0.0
    return (b - a) / (2.0 * p0)


@njit(cache=True)
def _folded_mass_nb(family, p0, p1, x, lo, hi, n_images):
    s = 0.0
    for m in range(-n_images, n_images + 1):
        sh = 4.0 * m
        s += _interval_mass_nb(family, p0, p1, x, lo + sh, hi + sh)
        s += _interval_mass_nb(family, p0, p1, x, 2.0 - hi + sh, 2.0 - lo + sh)
    return s


@njit(cache=True, parallel=True)
def _bin_masses_nb(xs, ws, row_ptr, edges, family, p0, p1, reflect, n_images, out, raw_mass):
    n = out.shape[0]
    nb = edges.shape[0] - 1
    for i in prange(n):
        buf = np.empty(nb)
        for q in range(row_ptr[i], row_ptr[i + 1]):
            x = xs[q]
            w = ws[q]
            raw_mass[i] += w * _interval_mass_nb(family, p0, p1, x, edges[0], edges[nb])
            tot = 0.0
            for j in range(nb):
                if reflect:
                    buf[j] = _folded_mass_nb(family, p0, p1, x, edges[j], edges[j + 1], n_images)
                else:
                    buf[j] = _interval_mass_nb(family, p0, p1, x, edges[j], edges[j + 1])
                tot += buf[j]
            if tot > 0.0:
                for j in range(nb):
                    out[i, j] += w * (buf[j] / tot)


@njit(cache=True, parallel=True)
def _dobrushin_nb(P):
    n = P.shape[0]
    best = np.zeros(max(n, 1))
    for i in prange(n):
        b = 0.0
        for k in range(i + 1, n):
            s = 0.0
            for j in range(n):
                s += abs(P[i, j] - P[k, j])
            if s > b:
                b = s
        best[i] = b
    return 0.5 * best.max()


# ---------------------------------------------------------------- numpy path

def _interval_mass_np(family, p0, p1, x, lo, hi):
    """Vectorised twin of ``_interval_mass_nb``; x is (m, 1), lo/hi are (nb,)."""
    lo = np.broadcast_to(lo, np.broadcast_shapes(np.shape(x), np.shape(lo)))
    hi = np.broadcast_to(hi, lo.shape)
    if family == GAUSS:
        mu = p0 * x
        s = p1 * _SQRT2
        upper = (lo - mu) > 0.0
        tail = 0.5 * (_erfc_vec((lo - mu) / s) - _erfc_vec((hi - mu) / s))
        body = 0.5 * (_erfc_vec(-(hi - mu) / s) - _erfc_vec(-(lo - mu) / s))
        out = np.where(upper, tail, body)
    else:
        a = np.maximum(lo, x - p0)
        b = np.minimum(hi, x + p0)
        out = np.maximum(b - a, 0.0) / (2.0 * p0)
    return np.where(hi > lo, out, 0.0)


def _bin_masses_np(xs, ws, row_ptr, edges, family, p0, p1, reflect, n_images, out, raw_mass):
    lo, hi = edges[:-1], edges[1:]
    for i in range(out.shape[0]):
        sl = slice(row_ptr[i], row_ptr[i + 1])
        x = xs[sl][:, None]
        w = ws[sl]
        raw = _interval_mass_np(family, p0, p1, x, edges[:1], edges[-1:])[:, 0]
        raw_mass[i] += np.dot(w, raw)
        if reflect:
            buf = np.zeros((x.shape[0], lo.shape[0]))
            for m in range(-n_images, n_images + 1):
                sh = 4.0 * m
                buf += _interval_mass_np(family, p0, p1, x, lo + sh, hi + sh)
                buf += _interval_mass_np(family, p0, p1, x, 2.0 - hi + sh, 2.0 - lo + sh)
        else:
            buf = _interval_mass_np(family, p0, p1, x, lo, hi)
        tot = buf.sum(axis=1)
        keep = tot > 0.0
        out[i] += np.dot(w[keep], buf[keep] / tot[keep, None])


def _dobrushin_np(P):
    n = P.shape[0]
    best = 0.0
    for i in range(n - 1):
        best = max(best, float(np.abs(P[i + 1:] - P[i]).sum(axis=1).max()))
    return 0.5 * best


# ---------------------------------------------------------------- dispatch

def bin_masses_1d(xs, ws, row_ptr, edges, family, p0, p1, reflect):
    """Quadrature of per-bin transition masses for a separable 1D kernel.

    ``xs``/``ws`` are outer quadrature nodes and weights grouped by row bin
    through ``row_ptr`` (CSR style); weights of one row sum to 1.  For each
    node the inner integral over every column bin is exact (CDF differences),
    normalised by the total in-domain (or folded) mass at that node.

    Returns ``(matrix, raw_row_mass)`` where ``raw_row_mass`` is the bin
    average of the un-normalised in-domain mass.
    """
    n = len(row_ptr) - 1
    out = np.zeros((n, len(edges) - 1))
    raw = np.zeros(n)
    n_img = n_images_for(family, p0, p1)
    args = (np.ascontiguousarray(xs, dtype=np.float64),
            np.ascontiguousarray(ws, dtype=np.float64),
            np.ascontiguousarray(row_ptr, dtype=np.int64),
            np.ascontiguousarray(edges, dtype=np.float64),
            int(family), float(p0), float(p1), bool(reflect), n_img, out, raw)
    if _backend == "numba":
        _bin_masses_nb(*args)
    else:
        _bin_masses_np(*args)
    return out, raw


def interval_mass(family, p0, p1, x, lo, hi):
    """Raw kernel mass of ``[lo, hi]`` from scalar ``x`` (scalar helper)."""
    return float(_interval_mass_np(family, p0, p1, np.array([[x]]),
                                   np.array([lo]), np.array([hi]))[0, 0])


def dobrushin_dense(P):
    """``max_{i,k} 0.5 * sum_j |P[i,j] - P[k,j]|`` for a dense matrix."""
    P = np.ascontiguousarray(P, dtype=np.float64)
    if P.shape[0] < 2:
        return 0.0
    if _backend == "numba":
        return float(_dobrushin_nb(P))
    return float(_dobrushin_np(P))
