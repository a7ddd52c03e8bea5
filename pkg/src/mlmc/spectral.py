"""Stationary densities, spectral gaps, ergodicity coefficients and overlap metrics.

Chains act on densities from the left, ``pi_{n+1} = pi_n P``, throughout.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, asdict

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh, spsolve, svds

from . import _accel
from .errors import LevelError, StationaryError, SymmetrizationError
from .ulam import DiscreteDensity, PiecewiseConstantDensity, StochasticMatrix, interpolate_density

log = logging.getLogger(__name__)

DENSE_EIG_MAX = 512
DENSE_GAP_MAX = 2048
REVERSIBLE_TOL = 1e-10


def _csr(P):
    return P.entries if isinstance(P, StochasticMatrix) else sp.csr_matrix(np.asarray(P, dtype=np.float64))


def _dense(P):
    return P.dense() if isinstance(P, StochasticMatrix) else np.asarray(P, dtype=np.float64)


def _vec(pi):
    return pi.pi if isinstance(pi, DiscreteDensity) else np.asarray(pi, dtype=np.float64)


def evolve(pi: DiscreteDensity, P: StochasticMatrix, steps: int = 1) -> DiscreteDensity:
    """Apply ``steps`` left multiplications ``pi <- pi P``."""
    if pi.partition != P.partition:
        raise LevelError(f"density on {pi.partition} but chain on {P.partition}")
    PT = P.entries.T.tocsr()
    x = pi.pi.copy()
    for _ in range(int(steps)):
        x = PT @ x
        x /= x.sum()
    return DiscreteDensity(P.partition, x)


def closed_classes(P) -> int:
    """Number of closed communicating classes (1 iff the stationary density is unique)."""
    M = _csr(P)
    n_comp, labels = connected_components(M, directed=True, connection="strong")
    coo = M.tocoo()
    mask = coo.data > 0
    leaving = labels[coo.row[mask]] != labels[coo.col[mask]]
    open_ = np.zeros(n_comp, dtype=bool)
    open_[labels[coo.row[mask][leaving]]] = True
    return int(n_comp - open_.sum())


@dataclass
class PowerResult:
    pi: np.ndarray
    matvecs: int
    residual: float
    converged: bool


def power_iteration(P, x0=None, tol: float = 1e-10, max_iter: int = 10 ** 6) -> PowerResult:
    """Left power iteration until ``||x P - x||_1 <= tol``.

    Every product with P counts as one matvec, including the product that
    certifies the final residual.
    """
    M = _csr(P)
    PT = M.T.tocsr()
    n = M.shape[0]
    x = np.full(n, 1.0 / n) if x0 is None else np.array(_vec(x0), dtype=np.float64)
    x /= x.sum()
    res = math.inf
    for it in range(1, int(max_iter) + 1):
        y = PT @ x
        res = float(np.abs(y - x).sum())
        if res <= tol:
            return PowerResult(x, it, res, True)
        x = y / y.sum()
    return PowerResult(x, int(max_iter), res, False)


def _stationary_eig(P):
    A = _dense(P)
    w, V = sla.eig(A.T)
    k = int(np.argmin(np.abs(w - 1.0)))
    v = np.real(V[:, k])
    v = v / v.sum()
    return np.clip(v, 0.0, None) / np.clip(v, 0.0, None).sum()


def _stationary_direct(P):
    M = _csr(P)
    n = M.shape[0]
    A = (M.T - sp.identity(n, format="csr")).tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    v = spsolve(A.tocsc(), b)
    v = np.clip(v, 0.0, None)
    return v / v.sum()


def stationary_density(P: StochasticMatrix, tol: float = 1e-10, max_iter: int = 10 ** 6,
                       method: str = "power") -> DiscreteDensity:
    """Stationary density of P.

    ``power`` iterates from the uniform density and falls back to the dense
    eigensolver when it does not converge and ``n <= 512``; ``eig`` uses the
    dense eigensolver directly; ``direct`` solves the bordered linear system.

    Raises
    ------
    StationaryError
        P has more than one closed class, or power iteration failed on a
        chain too large for the dense fallback.
    """
    n_closed = closed_classes(P)
    if n_closed != 1:
        raise StationaryError(f"stationary density not unique: {n_closed} closed classes")
    n = P.n
    if method == "eig":
        v = _stationary_eig(P)
    elif method == "direct":
        v = _stationary_direct(P)
    elif method == "power":
        r = power_iteration(P, tol=tol, max_iter=max_iter)
        if r.converged:
            v = r.pi
        elif n <= DENSE_EIG_MAX:
            log.warning("power iteration stalled at residual %.3g; using dense eigensolver", r.residual)
            v = _stationary_eig(P)
        else:
            raise StationaryError(
                f"power iteration did not reach {tol:g} in {max_iter} steps (residual "
                f"{r.residual:.3g}); chain may be periodic or nearly reducible")
    else:
        raise ValueError(f"unknown method {method!r}")
    return DiscreteDensity.normalized(P.partition, v)


def stationary_residual(pi, P) -> float:
    x = _vec(pi)
    return float(np.abs(_csr(P).T @ x - x).sum())


# ---------------------------------------------------------------- ergodicity

def dobrushin_tau(P) -> float:
    """Ergodicity coefficient ``max_{i,k} 0.5 ||P[i] - P[k]||_1``.

    This is the exact supremum of ``||v P||_1 / ||v||_1`` over nonzero
    mean-zero vectors ``v``.
    """
    return min(1.0, _accel.dobrushin_dense(_dense(P)))


def sampled_tau_quotients(P, n_samples: int = 10_000, seed: int = 0) -> np.ndarray:
    """Quotients ``||v P||_1 / ||v||_1`` for random mean-zero ``v``.

    Half the samples are centred Gaussian vectors, half are two-point
    differences ``e_i - e_k`` (where the supremum is attained).
    """
    A = _dense(P)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    m1 = n_samples // 2
    V = rng.standard_normal((m1, n))
    V -= V.mean(axis=1, keepdims=True)
    i = rng.integers(0, n, n_samples - m1)
    k = (i + rng.integers(1, max(n, 2), n_samples - m1)) % n
    W = np.zeros((n_samples - m1, n))
    W[np.arange(W.shape[0]), i] += 1.0
    W[np.arange(W.shape[0]), k] -= 1.0
    V = np.vstack([V, W])
    num = np.abs(V @ A).sum(axis=1)
    den = np.abs(V).sum(axis=1)
    ok = den > 0
    return num[ok] / den[ok]


# ---------------------------------------------------------------- reversibility and gaps

def check_reversibility(P, pi) -> dict:
    """Largest detailed-balance defect ``|pi_i P_ij - pi_j P_ji|``."""
    M = sp.diags(_vec(pi)) @ _csr(P)
    D = abs(M - M.T)
    viol = float(D.max()) if D.nnz else 0.0
    return {"reversible": viol <= REVERSIBLE_TOL, "max_violation": viol}


def symmetrize(P, pi) -> np.ndarray:
    """``D_pi^{1/2} P D_pi^{-1/2}`` as a dense array."""
    x = _vec(pi)
    zero = np.flatnonzero(x <= 0)
    if zero.size:
        raise SymmetrizationError(f"zero stationary mass in bins {zero[:20].tolist()}", zero)
    r = np.sqrt(x)
    return (r[:, None] * _dense(P)) / r[None, :]


@dataclass
class GapResult:
    delta: float
    delta_abs: float
    lambda2: float
    method: str
    reversible: bool
    max_violation: float


def spectral_gap_details(P, pi) -> GapResult:
    """Spectral gap of P with respect to its stationary density ``pi``.

    For a reversible chain ``delta = 1 - lambda_2`` of the symmetrised matrix
    (signed second eigenvalue) and ``delta_abs = 1 - max(|lambda_2|,
    |lambda_min|)``.  Otherwise both fall back to ``1 - sigma_2`` of the
    symmetrised matrix, with a warning.
    """
    rev = check_reversibility(P, pi)
    S = symmetrize(P, pi)
    n = S.shape[0]
    if n == 1:
        return GapResult(1.0, 1.0, 0.0, "trivial", rev["reversible"], rev["max_violation"])
    if rev["reversible"]:
        S = 0.5 * (S + S.T)
        if n <= DENSE_GAP_MAX:
            w = sla.eigvalsh(S)
        else:
            top = eigsh(sp.csr_matrix(S), k=2, which="LA", return_eigenvectors=False)
            bot = eigsh(sp.csr_matrix(S), k=1, which="SA", return_eigenvectors=False)
            w = np.sort(np.concatenate([top, bot]))
        lam2 = float(w[-2])
        lam_abs = max(abs(float(w[-2])), abs(float(w[0])))
        return GapResult(min(1.0, max(0.0, 1.0 - lam2)), min(1.0, max(0.0, 1.0 - lam_abs)),
                         lam2, "symmetric-eig", True, rev["max_violation"])
    log.warning("chain not reversible (defect %.3g); using singular-value gap", rev["max_violation"])
    if n <= DENSE_GAP_MAX:
        s = sla.svdvals(S)
    else:
        s = np.sort(svds(sp.csr_matrix(S), k=2, return_singular_vectors=False))[::-1]
    sig2 = float(s[1])
    g = min(1.0, max(0.0, 1.0 - sig2))
    return GapResult(g, g, sig2, "singular-value", False, rev["max_violation"])


def spectral_gap(P, pi) -> float:
    return spectral_gap_details(P, pi).delta


def bauer_fike_constant(P):
    """``||V||_1 ||V^-1||_1`` for the eigenvector matrix of P, or None when n > 512."""
    A = _dense(P)
    if A.shape[0] > DENSE_EIG_MAX:
        return None
    _, V = np.linalg.eig(A)
    return float(np.real(np.linalg.cond(V, 1)))


# ---------------------------------------------------------------- overlaps and variation

def overlap(a, b) -> dict:
    """Fidelity of the square-root encodings, infidelity q and L1 distance.

    ``q`` is evaluated as ``0.5 * ||sqrt(a) - sqrt(b)||_2^2``, equal to
    ``1 - fidelity`` for unit-mass inputs but free of cancellation.
    """
    if isinstance(a, DiscreteDensity) and isinstance(b, DiscreteDensity) and a.partition != b.partition:
        raise LevelError("densities live on different partitions")
    x, y = _vec(a), _vec(b)
    if x.shape != y.shape:
        raise LevelError(f"length mismatch {x.shape} vs {y.shape}")
    fid = float(np.sqrt(x * y).sum())
    q = float(0.5 * np.square(np.sqrt(x) - np.sqrt(y)).sum())
    return {"fidelity": fid, "q": q, "l1": float(np.abs(x - y).sum())}


def variation_estimate(p: PiecewiseConstantDensity) -> float:
    """Largest within-coarse-bin range of the fine density values, divided by h."""
    part = p.partition
    coarse = part.coarser()
    shape = []
    for _ in range(part.d):
        shape += [coarse.side, 2]
    v = np.asarray(p.values).reshape(shape)
    child_axes = tuple(range(1, 2 * part.d, 2))
    rng = v.max(axis=child_axes) - v.min(axis=child_axes)
    return float(rng.max() / float(part.h))


def tau_level_comparison(P_h: StochasticMatrix, P_2h: StochasticMatrix, lam: float | None = None,
                         slack: float = 0.5, pi_h: DiscreteDensity | None = None) -> dict:
    """Compare ergodicity coefficients at h and 2h against ``lam * h``.

    ``lam`` defaults to the variation estimate of the stationary density of
    ``P_h``.
    """
    if P_2h.partition != P_h.partition.coarser():
        raise LevelError("P_2h is not on the dyadic parent of P_h's partition")
    if lam is None:
        pi_h = pi_h or stationary_density(P_h)
        lam = variation_estimate(interpolate_density(pi_h))
    t_h, t_2h = dobrushin_tau(P_h), dobrushin_tau(P_2h)
    h = float(P_h.partition.h)
    diff = abs(t_h - t_2h)
    bound = lam * h
    return {"h": h, "tau_h": t_h, "tau_2h": t_2h, "diff": diff, "lambda_hat": float(lam),
            "bound": bound, "slack": slack, "pass": bool(diff <= bound * (1.0 + slack))}


def row_l1_norm(A) -> float:
    """Max-row L1 norm (induced norm for left action on densities)."""
    A = abs(sp.csr_matrix(A))
    return float(np.asarray(A.sum(axis=1)).max()) if A.shape[0] else 0.0


def seneta_bound_check(P: StochasticMatrix, Phat: StochasticMatrix, method: str = "power") -> dict:
    """Perturbation bound ``||pihat - pi||_1 <= ||P - Phat|| / delta``.

    ``delta`` is the spectral gap of P.  The reported ``rhs_tau`` uses
    ``1 - tau(P)`` instead, which is the form with a general guarantee.
    """
    if P.partition != Phat.partition:
        raise LevelError("P and Phat live on different partitions")
    pi = stationary_density(P, tol=1e-13, method=method)
    pihat = stationary_density(Phat, tol=1e-13, method=method)
    lhs = float(np.abs(pihat.pi - pi.pi).sum())
    E = row_l1_norm(P.entries - Phat.entries)
    gap = spectral_gap_details(P, pi)
    tau = dobrushin_tau(P)
    rhs = E / gap.delta if gap.delta > 0 else math.inf
    rhs_tau = E / (1.0 - tau) if tau < 1 else math.inf
    return {"lhs": lhs, "rhs": rhs, "rhs_tau": rhs_tau, "perturbation": E,
            "delta": gap.delta, "tau": tau, "pass": bool(lhs <= rhs)}


# ---------------------------------------------------------------- report

@dataclass
class SpectralReport:
    pi: DiscreteDensity
    delta_eig: float
    delta_abs: float
    tau: float
    delta_tau: float
    reversible: bool
    max_violation: float
    gap_method: str
    lambda_estimate: float | None
    bauer_fike_C: float | None
    stationary_residual: float

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pi"] = self.pi.pi.tolist()
        out["partition"] = self.pi.partition.header()
        return out


def spectral_report(P: StochasticMatrix, pi: DiscreteDensity | None = None,
                    tol: float = 1e-10) -> SpectralReport:
    pi = pi or stationary_density(P, tol=tol)
    gap = spectral_gap_details(P, pi)
    tau = dobrushin_tau(P)
    try:
        lam = variation_estimate(interpolate_density(pi))
    except LevelError:
        lam = None
    return SpectralReport(pi, gap.delta, gap.delta_abs, tau, 1.0 - tau, gap.reversible,
                          gap.max_violation, gap.method, lam, bauer_fike_constant(P),
                          stationary_residual(pi, P))
