"""Ulam-Galerkin projection: lumping densities and kernels onto bins.

Conventions
-----------
* A discrete density holds bin masses ``pi[j] = int_{D_j} p``.
* The piecewise-constant interpolant has value ``pi[j] / h^d`` on bin ``j``.
* ``P[i, j] = h^-d int_{D_i} int_{D_j} K(x, y) dy dx``: the average over
  ``x`` in bin ``i`` of the mass sent into bin ``j``, which makes every row
  sum to one.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _accel
from .errors import BadDensityError, InvalidParameter, KernelLeakageError, LevelError
from .kernels import KernelSpec, grid_defined, x_breakpoints_1d
from .partition import Partition

DEFAULT_THRESHOLD = 1e-14
ROW_TOL = 1e-10
MASS_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureSpec:
    """Per-bin quadrature along one axis.

    ``gauss-legendre`` uses ``points`` nodes on each of ``subdivisions`` equal
    sub-panels of a bin (panels are further split at kernel kinks).
    ``monte-carlo`` draws ``samples`` stratified uniform points per bin from a
    generator seeded with ``seed``.
    """
    rule: str = "gauss-legendre"
    points: int = 8
    subdivisions: int = 1
    samples: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.rule not in ("gauss-legendre", "monte-carlo"):
            raise InvalidParameter(f"unknown quadrature rule {self.rule!r}")
        if self.points < 1 or self.subdivisions < 1 or self.samples < 1:
            raise InvalidParameter("quadrature sizes must be positive")

    def nested(self, factor: int = 2) -> "QuadratureSpec":
        """The rule on a coarser bin that reuses the nodes of ``factor`` fine bins."""
        return QuadratureSpec(self.rule, self.points, self.subdivisions * factor,
                              self.samples * factor, self.seed)

    def header(self) -> dict:
        return {"rule": self.rule, "points": self.points, "subdivisions": self.subdivisions,
                "samples": self.samples, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class DiscreteDensity:
    partition: Partition
    pi: np.ndarray
    renorm_delta: float = 0.0

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.float64)
        if pi.shape != (self.partition.n_states,):
            raise BadDensityError(f"density length {pi.shape} does not match {self.partition}")
        if np.any(pi < 0) or not np.all(np.isfinite(pi)):
            raise BadDensityError("density has negative or non-finite entries")
        if abs(pi.sum() - 1.0) > MASS_TOL:
            raise BadDensityError(f"density sums to {pi.sum()!r}, not 1")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    @classmethod
    def normalized(cls, partition, weights):
        w = np.asarray(weights, dtype=np.float64)
        total = w.sum()
        if not total > 0:
            raise BadDensityError("cannot normalise a zero vector")
        return cls(partition, w / total, float(total - 1.0))

    @classmethod
    def uniform(cls, partition):
        n = partition.n_states
        return cls(partition, np.full(n, 1.0 / n))

    def amplitudes(self) -> np.ndarray:
        """Square-root amplitude encoding (unit 2-norm)."""
        return np.sqrt(self.pi)


@dataclass(frozen=True, eq=False)
class PiecewiseConstantDensity:
    partition: Partition
    values: np.ndarray

    def __call__(self, x) -> np.ndarray:
        """Evaluate at points ``x`` of shape (m, d) inside [-1, 1)^d."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        part = self.partition
        idx = np.clip(np.floor(x * part.N).astype(np.int64) + part.N, 0, part.side - 1)
        return self.values[np.ravel_multi_index(tuple(idx.T), part.shape)]

    def integral(self) -> float:
        return float(self.values.sum() * self.partition.volume)


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    partition: Partition
    entries: sp.csr_matrix
    threshold: float = DEFAULT_THRESHOLD
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        M = sp.csr_matrix(self.entries, dtype=np.float64)
        M.sum_duplicates()
        M.sort_indices()
        n = self.partition.n_states
        if M.shape != (n, n):
            raise LevelError(f"matrix shape {M.shape} does not match {self.partition}")
        if M.nnz and (M.data.min() < 0 or not np.all(np.isfinite(M.data))):
            raise InvalidParameter("stochastic matrix has negative or non-finite entries")
        rows = np.asarray(M.sum(axis=1)).ravel()
        bad = np.abs(rows - 1.0)
        if bad.max() > ROW_TOL:
            raise InvalidParameter(f"row {int(bad.argmax())} sums to {rows[bad.argmax()]!r}")
        object.__setattr__(self, "entries", M)

    @classmethod
    def from_array(cls, A, partition=None, d: int = 1, **kw):
        A = np.asarray(A, dtype=np.float64) if not sp.issparse(A) else A
        if partition is None:
            partition = partition_for_size(A.shape[0], d)
        return cls(partition, sp.csr_matrix(A), **kw)

    @property
    def n(self) -> int:
        return self.partition.n_states

    @property
    def nnz(self) -> int:
        return int(self.entries.nnz)

    @property
    def s(self) -> int:
        """Max nonzeros per row."""
        return int(np.diff(self.entries.indptr).max()) if self.n else 0

    def dense(self) -> np.ndarray:
        return self.entries.toarray()

    def header(self) -> dict:
        hdr = {"partition": self.partition.header(), "n_states": self.n,
               "threshold": self.threshold, "nnz": self.nnz, "s": self.s}
        hdr.update(self.meta)
        return hdr


def partition_for_size(n: int, d: int = 1) -> Partition:
    """The partition of D with ``n`` states in dimension ``d``."""
    side = int(round(n ** (1.0 / d)))
    for cand in (side - 1, side, side + 1):
        if cand > 0 and cand ** d == n and cand % 2 == 0:
            return Partition(f"1/{cand // 2}", d)
    raise LevelError(f"{n} states is not (2N)^{d} for an integer N")


# ------------------------------------------------------------- quadrature

def _bin_nodes_1d(part: Partition, quad: QuadratureSpec, breaks=()):
    """Outer nodes and weights along one axis, grouped per bin.

    Weights of each bin sum to one (they average over the bin).  Returns
    ``(nodes, weights, row_ptr)``.
    """
    edges = part.edges()
    h = float(part.h)
    breaks = np.asarray(breaks, dtype=np.float64)
    nodes, weights, ptr = [], [], [0]
    if quad.rule == "monte-carlo":
        rng = np.random.default_rng(quad.seed)
        u = (np.arange(quad.samples) + rng.random((part.side, quad.samples))) / quad.samples
        for b in range(part.side):
            nodes.append(edges[b] + h * u[b])
            weights.append(np.full(quad.samples, 1.0 / quad.samples))
            ptr.append(ptr[-1] + quad.samples)
    else:
        t, w = np.polynomial.legendre.leggauss(quad.points)
        for b in range(part.side):
            lo, hi = edges[b], edges[b + 1]
            cuts = np.linspace(lo, hi, quad.subdivisions + 1)
            inner = breaks[(breaks > lo) & (breaks < hi)]
            if inner.size:
                cuts = np.unique(np.concatenate([cuts, inner]))
            a, c = cuts[:-1], cuts[1:]
            half = 0.5 * (c - a)
            nodes.append(((0.5 * (a + c))[:, None] + half[:, None] * t).ravel())
            weights.append((half[:, None] * w / h).ravel())
            ptr.append(ptr[-1] + nodes[-1].size)
    return np.concatenate(nodes), np.concatenate(weights), np.asarray(ptr, dtype=np.int64)


def _tensor_points(part: Partition, quad: QuadratureSpec):
    """Tensor grid of per-bin nodes: points (m, d) and weights (m,) of true volume.

    Points are ordered bin-major so that ``reshape(n_states, -1)`` groups them.
    """
    x1, w1, ptr = _bin_nodes_1d(part, quad)
    per = np.diff(ptr)
    if np.any(per != per[0]):
        raise InvalidParameter("tensor quadrature needs the same node count in every bin")
    g = int(per[0])
    x1 = x1.reshape(part.side, g)
    w1 = w1.reshape(part.side, g) * float(part.h)
    d = part.d
    # axes ordered (b0, ..., b_{d-1}, q0, ..., q_{d-1})
    pts = np.empty((part.side,) * d + (g,) * d + (d,))
    wts = np.ones((part.side,) * d + (g,) * d)
    for k in range(d):
        shape = [1] * (2 * d)
        shape[k], shape[d + k] = part.side, g
        pts[..., k] = x1.reshape(shape)
        wts = wts * w1.reshape(shape)
    return pts.reshape(-1, d), wts.reshape(-1), g ** d


# ------------------------------------------------------------- densities

def lump_density(p, part: Partition, quad: QuadratureSpec | None = None) -> DiscreteDensity:
    """Bin masses of a continuous density ``p`` (callable on (m, d) arrays)."""
    quad = quad or QuadratureSpec()
    pts, wts, per = _tensor_points(part, quad)
    vals = np.asarray(p(pts), dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(vals)):
        raise BadDensityError("density returned non-finite values")
    mass = (vals * wts).reshape(part.n_states, per).sum(axis=1)
    if np.any(mass < 0):
        raise BadDensityError(f"negative mass in bin {int(np.argmin(mass))}")
    return DiscreteDensity.normalized(part, mass)


def interpolate_density(pi: DiscreteDensity) -> PiecewiseConstantDensity:
    return PiecewiseConstantDensity(pi.partition, pi.pi / pi.partition.volume)


def interpolation_error(p, part: Partition, lipschitz: float | None = None,
                        panels: int = 64, points: int = 8) -> dict:
    """L1 and sup distance between ``p`` and its piecewise-constant projection.

    Both norms are evaluated with a reference rule of ``panels`` sub-panels
    per bin and ``points`` Gauss nodes per panel and axis.  When
    ``lipschitz`` is None it is estimated from finite differences on that
    reference grid.  ``pass`` reports whether both errors are within
    ``lipschitz * h``.
    """
    ref = QuadratureSpec(points=points, subdivisions=panels)
    pi = lump_density(p, part, ref)
    ph = interpolate_density(pi)
    pts, wts, _ = _tensor_points(part, ref)
    pv = np.asarray(p(pts), dtype=np.float64).reshape(-1)
    diff = np.abs(pv - ph(pts))
    l1 = float(np.dot(diff, wts))
    # the sup is often attained on bin faces: probe the lower corners too
    corners = part.multi_indices() / part.N
    linf = float(max(diff.max(), np.abs(np.asarray(p(corners)).reshape(-1) - ph(corners)).max()))
    if lipschitz is None:
        lipschitz = _estimate_lipschitz_1d_axes(p, part, panels)
    h = float(part.h)
    return {"h": h, "l1_error": l1, "linf_error": linf, "lipschitz": float(lipschitz),
            "bound": float(lipschitz) * h,
            "pass": bool(l1 <= lipschitz * h and linf <= lipschitz * h)}


def _estimate_lipschitz_1d_axes(p, part, panels):
    m = part.side * panels
    grid = (np.arange(m) + 0.5) / m * 2.0 - 1.0
    step = 2.0 / m
    if part.d == 1:
        v = np.asarray(p(grid[:, None])).reshape(-1)
        return float(np.abs(np.diff(v)).max() / step)
    # sample along coordinate lines through a coarse set of anchors
    anchors = np.array(list(itertools.product(np.linspace(-0.9, 0.9, 7), repeat=part.d)))
    best = 0.0
    for k in range(part.d):
        for a in anchors:
            pts = np.repeat(a[None, :], m, axis=0)
            pts[:, k] = grid
            v = np.asarray(p(pts)).reshape(-1)
            best = max(best, float(np.abs(np.diff(v)).max() / step))
    return best


# ------------------------------------------------------------- kernels

def sparsify_rows(M: sp.spmatrix, threshold: float = DEFAULT_THRESHOLD) -> sp.csr_matrix:
    """Drop entries below ``threshold * row max`` and renormalise each row."""
    M = sp.csr_matrix(M, dtype=np.float64, copy=True)
    M.eliminate_zeros()
    counts = np.diff(M.indptr)
    rowmax = np.zeros(M.shape[0])
    nz = counts > 0
    rowmax[nz] = np.maximum.reduceat(M.data, M.indptr[:-1][nz])
    cut = threshold * np.repeat(rowmax, counts)
    M.data[M.data < cut] = 0.0
    M.eliminate_zeros()
    sums = np.asarray(M.sum(axis=1)).ravel()
    M.data /= np.repeat(sums, np.diff(M.indptr))
    return M


def _overlap_1d(a: Partition, b: Partition) -> np.ndarray:
    """``O[i, r] = |bin_i(a) cap bin_r(b)| / h_a`` along one axis."""
    ea, eb = a.edges(), b.edges()
    lo = np.maximum(ea[:-1, None], eb[None, :-1])
    hi = np.minimum(ea[1:, None], eb[None, 1:])
    return np.maximum(hi - lo, 0.0) * a.N


def _kron_power(M, d):
    out = sp.csr_matrix(M)
    for _ in range(d - 1):
        out = sp.kron(out, M, format="csr")
    return out


def discretize_1d(k: KernelSpec, part: Partition, quad: QuadratureSpec | None = None):
    """Per-axis bin-transition matrix of a separable kernel.

    Returns ``(matrix, raw_row_mass)``; rows of ``matrix`` sum to one up to
    quadrature rounding.
    """
    quad = quad or QuadratureSpec()
    p1 = Partition(part.h, 1)
    edges = p1.edges()
    xs, ws, ptr = _bin_nodes_1d(p1, quad, x_breakpoints_1d(k, edges))
    fam, a, b = k.code_params
    return _accel.bin_masses_1d(xs, ws, ptr, edges, fam, a, b, k.boundary == "reflect")


def discretize_kernel(k: KernelSpec, part: Partition, quad: QuadratureSpec | None = None,
                      threshold: float = DEFAULT_THRESHOLD, leak_floor: float = 0.5
                      ) -> StochasticMatrix:
    """Ulam matrix of ``k`` on ``part``.

    Separable kernels are integrated per axis and assembled as a Kronecker
    product, which equals the tensor-product rule on the full bin pair.
    Grid-defined kernels are averaged exactly through bin overlaps.

    Raises
    ------
    KernelLeakageError
        Some row keeps less than ``leak_floor`` of its mass inside D before
        renormalisation.
    """
    quad = quad or QuadratureSpec()
    if k.family == "grid-defined":
        ref = k.params["partition"]
        if ref.d != part.d:
            raise LevelError(f"kernel defined in d={ref.d}, partition has d={part.d}")
        O = _kron_power(sp.csr_matrix(_overlap_1d(part, ref)), part.d)
        Q = _kron_power(sp.csr_matrix(_overlap_1d(ref, part)), part.d)
        M = O @ k.params["matrix"] @ Q
        raw_mass = np.ones(part.n_states)
        meta_quad = {"rule": "exact-overlap"}
    else:
        M1, raw1 = discretize_1d(k, part, quad)
        M = _kron_power(sp.csr_matrix(M1), part.d)
        raw_mass = raw1
        for _ in range(part.d - 1):
            raw_mass = np.kron(raw_mass, raw1)
        meta_quad = quad.header()
    rows = np.asarray(M.sum(axis=1)).ravel()
    pre = raw_mass if k.boundary == "renormalize-rows" else rows
    if pre.min() < leak_floor - MASS_TOL:
        i = int(pre.argmin())
        raise KernelLeakageError(
            f"row {i} keeps only {pre[i]:.3g} of its mass in D (floor {leak_floor}); "
            "check the boundary policy")
    out = sparsify_rows(M, threshold)
    meta = {"quadrature": meta_quad,
            "renorm_max_delta": float(np.abs(rows - 1.0).max()),
            "min_raw_row_mass": float(raw_mass.min()),
            "max_leaked_mass": float(1.0 - raw_mass.min())}
    return StochasticMatrix(part, out, threshold, meta)


def lift_kernel(P: StochasticMatrix) -> KernelSpec:
    """Piecewise-constant kernel whose Ulam matrix at P's resolution is P."""
    return grid_defined(P.entries, P.partition)
