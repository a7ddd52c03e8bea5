"""Continuous transition kernels K(x, y) on D = [-1, 1]^d.

Built-in families are coordinatewise products of a 1D kernel:

* ``gauss-ar1``: ``exp(-(y - a x)^2 / (2 sigma^2))`` per coordinate.
* ``uniform-window``: constant ``1/(2w)`` on ``[x - w, x + w]`` per coordinate.
* ``grid-defined``: a stochastic matrix on a reference partition read as a
  piecewise-constant kernel.

Mass leaving D is handled by ``boundary``: ``renormalize-rows`` divides by the
in-domain mass at ``x``; ``reflect`` folds the excess back at the faces +-1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _accel
from .errors import InvalidParameter, OutOfDomainError, QuadratureError
from .partition import Partition

FAMILIES = ("gauss-ar1", "uniform-window", "grid-defined")
BOUNDARIES = ("renormalize-rows", "reflect")

_FAMILY_CODE = {"gauss-ar1": _accel.GAUSS, "uniform-window": _accel.WINDOW}


@dataclass(frozen=True, eq=False)
class KernelSpec:
    family: str
    params: dict = field(default_factory=dict)
    lipschitz: float | None = None
    boundary: str = "renormalize-rows"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameter(f"unknown kernel family {self.family!r}")
        if self.boundary not in BOUNDARIES:
            raise InvalidParameter(f"unknown boundary policy {self.boundary!r}")
        if self.lipschitz is not None and not self.lipschitz >= 0:
            raise InvalidParameter("lipschitz bound must be nonnegative")
        p = self.params
        if self.family == "gauss-ar1":
            if not -1.0 < p.get("a", math.nan) < 1.0:
                raise InvalidParameter("gauss-ar1 needs a in (-1, 1)")
            if not p.get("sigma", 0.0) > 0.0:
                raise InvalidParameter("gauss-ar1 needs sigma > 0")
        elif self.family == "uniform-window":
            if not p.get("w", 0.0) > 0.0:
                raise InvalidParameter("uniform-window needs w > 0")
        else:
            if "matrix" not in p or "partition" not in p:
                raise InvalidParameter("grid-defined needs 'matrix' and 'partition'")

    @property
    def separable(self) -> bool:
        return self.family != "grid-defined"

    @property
    def code_params(self):
        """(family code, p0, p1) for the compiled 1D kernels."""
        if self.family == "gauss-ar1":
            return _FAMILY_CODE[self.family], float(self.params["a"]), float(self.params["sigma"])
        return _FAMILY_CODE[self.family], float(self.params["w"]), 0.0

    def to_config(self) -> dict:
        if self.family == "grid-defined":
            raise InvalidParameter("grid-defined kernels are not serialisable to config")
        lam = "auto" if self.lipschitz is None else self.lipschitz
        return {"family": self.family, "params": dict(self.params),
                "boundary": self.boundary, "lambda": lam}


def gauss_ar1(a: float, sigma: float, boundary="renormalize-rows", lipschitz=None) -> KernelSpec:
    return KernelSpec("gauss-ar1", {"a": float(a), "sigma": float(sigma)}, lipschitz, boundary)


def uniform_window(w: float, boundary="renormalize-rows", lipschitz=None) -> KernelSpec:
    return KernelSpec("uniform-window", {"w": float(w)}, lipschitz, boundary)


def grid_defined(matrix, partition: Partition, lipschitz=None) -> KernelSpec:
    """Piecewise-constant kernel ``K(x, y) = M[bin(x), bin(y)] / h^d``."""
    M = sp.csr_matrix(matrix, dtype=np.float64)
    if M.shape != (partition.n_states, partition.n_states):
        raise InvalidParameter(f"matrix shape {M.shape} does not match {partition}")
    if M.nnz and M.data.min() < 0:
        raise InvalidParameter("grid-defined matrix has negative entries")
    rows = np.asarray(M.sum(axis=1)).ravel()
    if np.max(np.abs(rows - 1.0)) > 1e-10:
        raise InvalidParameter("grid-defined matrix is not row-stochastic")
    return KernelSpec("grid-defined", {"matrix": M, "partition": partition}, lipschitz)


def kernel_from_config(cfg: dict) -> KernelSpec:
    """Build a kernel from ``{family, params, boundary, lambda}``."""
    unknown = set(cfg) - {"family", "params", "boundary", "lambda"}
    if unknown:
        raise InvalidParameter(f"unknown kernel keys: {sorted(unknown)}")
    lam = cfg.get("lambda", "auto")
    lam = None if lam in (None, "auto") else float(lam)
    params = dict(cfg.get("params", {}))
    family = cfg.get("family")
    if family == "grid-defined":
        raise InvalidParameter("grid-defined kernels cannot be built from a config file")
    allowed = {"gauss-ar1": {"a", "sigma"}, "uniform-window": {"w"}}.get(family, set())
    extra = set(params) - allowed
    if extra:
        raise InvalidParameter(f"unknown params for {family}: {sorted(extra)}")
    return KernelSpec(family, {k: float(v) for k, v in params.items()}, lam,
                      cfg.get("boundary", "renormalize-rows"))


# ------------------------------------------------------------------ 1D pieces

def _pdf_1d(k: KernelSpec, x, y):
    """Raw (pre-boundary) 1D density, broadcasting over x and y."""
    if k.family == "gauss-ar1":
        a, s = k.params["a"], k.params["sigma"]
        z = (np.asarray(y) - a * np.asarray(x)) / s
        return np.exp(-0.5 * z * z) / (s * math.sqrt(2.0 * math.pi))
    w = k.params["w"]
    return np.where(np.abs(np.asarray(y) - np.asarray(x)) <= w, 1.0 / (2.0 * w), 0.0)


def _folded_pdf_1d(k: KernelSpec, x, y):
    fam, p0, p1 = k.code_params
    n_img = _accel.n_images_for(fam, p0, p1)
    out = 0.0
    for m in range(-n_img, n_img + 1):
        out = out + _pdf_1d(k, x, np.asarray(y) + 4 * m) + _pdf_1d(k, x, 2.0 - np.asarray(y) + 4 * m)
    return out


def _mass_1d(k: KernelSpec, x: float) -> float:
    fam, p0, p1 = k.code_params
    return _accel.interval_mass(fam, p0, p1, x, -1.0, 1.0)


def y_breakpoints_1d(k: KernelSpec, x: float):
    """Points in (-1, 1) where the 1D raw density in y is not smooth."""
    if k.family != "uniform-window":
        return []
    w = k.params["w"]
    return [b for b in (x - w, x + w) if -1.0 < b < 1.0]


def x_breakpoints_1d(k: KernelSpec, edges) -> np.ndarray:
    """Kinks, in x, of the bin-mass integrands ``x -> int_{bin} K(x, y) dy``."""
    if k.family != "uniform-window":
        return np.empty(0)
    w = k.params["w"]
    pts = [np.asarray(edges) - w, np.asarray(edges) + w]
    if k.boundary == "reflect":
        fam, p0, p1 = k.code_params
        n_img = _accel.n_images_for(fam, p0, p1)
        for m in range(-n_img, n_img + 1):
            for img in (np.asarray(edges) + 4 * m, 2.0 - np.asarray(edges) + 4 * m):
                pts.extend([img - w, img + w])
    pts = np.unique(np.concatenate(pts))
    return pts[(pts > -1.0) & (pts < 1.0)]


def _check_point(z, d=None):
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if d is not None and z.shape != (d,):
        raise OutOfDomainError(f"expected a point in R^{d}, got shape {z.shape}")
    if not np.all(np.isfinite(z)) or np.any(z < -1.0) or np.any(z > 1.0):
        raise OutOfDomainError(f"point {z.tolist()} outside D")
    return z


# ------------------------------------------------------------------ operations

def eval_kernel(k: KernelSpec, x, y, raw: bool = False) -> float:
    """Kernel density at (x, y); ``raw=True`` skips the boundary policy."""
    if k.family == "grid-defined":
        part = k.params["partition"]
        x = _check_point(x, part.d)
        y = _check_point(y, part.d)
        i = part.flat(_clip_bin(part, x))
        j = part.flat(_clip_bin(part, y))
        return float(k.params["matrix"][i, j]) / part.volume
    x = _check_point(x)
    y = _check_point(y, x.shape[0])
    val = 1.0
    for xk, yk in zip(x, y):
        if raw:
            val *= float(_pdf_1d(k, xk, yk))
        elif k.boundary == "reflect":
            val *= float(_folded_pdf_1d(k, xk, yk))
        else:
            val *= float(_pdf_1d(k, xk, yk)) / _mass_1d(k, xk)
    return val


def _clip_bin(part, z):
    # the closed right face x_k = 1 is attributed to the last bin
    return part.bin_of(np.minimum(z, np.nextafter(1.0, 0.0)))


def _composite_gl(breaks, points):
    t, w = np.polynomial.legendre.leggauss(points)
    lo, hi = np.asarray(breaks[:-1]), np.asarray(breaks[1:])
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * t[None, :]
    return nodes.ravel(), (half[:, None] * w[None, :]).ravel()


def row_mass_in_domain(k: KernelSpec, x, panels: int = 64, points: int = 16) -> float:
    """In-domain mass of the raw kernel row at ``x``, by composite Gauss-Legendre.

    Panels are split at the raw density's kinks so piecewise-smooth kernels
    integrate to rounding accuracy.
    """
    if k.family == "grid-defined":
        part = k.params["partition"]
        x = _check_point(x, part.d)
        i = part.flat(_clip_bin(part, x))
        return float(k.params["matrix"][i].sum())
    x = _check_point(x)
    mass = 1.0
    for xk in x:
        breaks = np.unique(np.concatenate([np.linspace(-1.0, 1.0, panels + 1),
                                           y_breakpoints_1d(k, xk)]))
        nodes, weights = _composite_gl(breaks, points)
        vals = _pdf_1d(k, xk, nodes)
        if not np.all(np.isfinite(vals)):
            raise QuadratureError(f"non-finite kernel values in row x={xk}")
        mass *= float(np.dot(weights, vals))
    return mass


def kernel_lipschitz(k: KernelSpec, d: int) -> float:
    """Bound on ``|K(x, y) - K(x, y')| / ||y - y'||_inf`` over D.

    Returns the user-supplied value when present.  For gauss-ar1 the bound
    uses the sup of the 1D density and of its derivative, scaled by the
    smallest in-domain mass (attained at the faces); uniform-window and
    grid-defined kernels are discontinuous and get ``inf``.
    """
    if k.lipschitz is not None:
        return float(k.lipschitz)
    if k.family != "gauss-ar1":
        return math.inf
    a, s = k.params["a"], k.params["sigma"]
    if k.boundary == "reflect":
        scale = 2.0
    else:
        scale = 1.0 / min(_mass_1d(k, 1.0), _mass_1d(k, -1.0))
    sup = scale / (s * math.sqrt(2.0 * math.pi))
    dsup = scale / (s * s * math.sqrt(2.0 * math.pi * math.e))
    return d * dsup * sup ** (d - 1)
