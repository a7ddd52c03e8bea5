"""Dense statevector simulation of the Szegedy walk of a small chain.

The walk lives on pairs ``|i, j>`` flattened as ``i * n + j``.  With the
isometry ``T|i> = |i> (x) sum_j sqrt(P_ij) |j>`` and the register swap ``S``,
the walk is ``U = S (2 T T^T - I)``.  On ``span(T, S T)`` its eigenphases obey
``cos(theta) = eig(D)`` with ``D_ij = sqrt(P_ij P_ji)``; the rest of the space
carries phases 0 and pi only.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, InvalidParameter, MLMCError
from .spectral import _stationary_eig, check_reversibility, symmetrize
from .ulam import DiscreteDensity, ROW_TOL, StochasticMatrix

log = logging.getLogger(__name__)

WALK_CAP = 64
UNITARY_TOL = 1e-10
NORM_TOL = 1e-10
COS_TOL = 1e-9


def _as_dense_stochastic(P) -> np.ndarray:
    A = P.dense() if isinstance(P, StochasticMatrix) else np.array(P, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidParameter(f"expected a square matrix, got shape {A.shape}")
    if (A < 0).any():
        raise InvalidParameter("negative transition probability")
    err = np.abs(A.sum(axis=1) - 1.0)
    if err.size and err.max() > ROW_TOL:
        raise InvalidParameter(f"row {int(err.argmax())} sums to 1{err.max():+.3g}")
    return A


def _pi_vector(P: np.ndarray, pi) -> np.ndarray:
    if pi is None:
        return _stationary_eig(P)
    return pi.pi if isinstance(pi, DiscreteDensity) else np.asarray(pi, dtype=np.float64)


@dataclass(frozen=True)
class WalkOperator:
    n: int
    U: np.ndarray
    T: np.ndarray
    swap: np.ndarray
    unitarity_error: float
    construction: dict = field(default_factory=dict)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.U @ psi

    def isometry(self, v) -> np.ndarray:
        """``T v`` for a length-n vector."""
        return self.T @ np.asarray(v)


def build_walk(P, cap: int = WALK_CAP) -> WalkOperator:
    """Assemble ``U = S (2 T T^T - I)`` and assert orthogonality."""
    A = _as_dense_stochastic(P)
    n = A.shape[0]
    if n > cap:
        raise CapacityError(f"walk on {n} states exceeds cap {cap} ({n * n} amplitudes)",
                            n_states=n, cap=cap)
    idx = np.arange(n)
    T = np.zeros((n * n, n))
    T[(idx[:, None] * n + idx[None, :]).ravel(), np.repeat(idx, n)] = np.sqrt(A).ravel()
    swap = (idx[None, :] * n + idx[:, None]).ravel()  # swap[i*n+j] = j*n+i
    R = 2.0 * (T @ T.T)
    R[np.diag_indices_from(R)] -= 1.0
    U = R[swap]
    err = float(np.abs(U.T @ U - np.eye(n * n)).max())
    if err > UNITARY_TOL:
        raise MLMCError(f"walk operator is not orthogonal: max |U^T U - I| = {err:.3g}")
    U.setflags(write=False)
    T.setflags(write=False)
    return WalkOperator(n, U, T, swap, err,
                        {"isometry": "T|i> = |i> (x) sum_j sqrt(P_ij)|j>",
                         "reflection": "2 T T^T - I", "swap": "|i,j> -> |j,i>",
                         "index": "i * n + j"})


def discriminant(P, pi=None) -> np.ndarray:
    """``D_ij = sqrt(P_ij P_ji)``.

    When ``pi`` is given and P is reversible with respect to it, D is also
    compared with the symmetrised chain and a mismatch above 1e-10 raises.
    """
    A = _as_dense_stochastic(P)
    D = np.sqrt(A * A.T)
    if pi is not None:
        x = _pi_vector(A, pi)
        if check_reversibility(A, x)["reversible"] and (x > 0).all():
            gap = float(np.abs(symmetrize(A, x) - D).max())
            if gap > 1e-10:
                raise MLMCError(f"discriminant differs from symmetrised chain by {gap:.3g}")
    return D


def _invariant_basis(W: WalkOperator, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of ``span(T, S T)``."""
    M = np.hstack([W.T, W.T[W.swap]])
    Q, s, _ = np.linalg.svd(M, full_matrices=False)
    rank = int((s > tol * max(s[0], 1.0)).sum())
    return Q[:, :rank]


def expected_cosines(eigs_D, tol: float = 1e-9) -> np.ndarray:
    """Multiset of ``cos(theta)`` expected on ``span(T, S T)``: each eigenvalue of D
    strictly inside (-1, 1) appears twice (phases +/- theta), +/-1 once."""
    out = []
    for lam in np.asarray(eigs_D, dtype=np.float64):
        out.extend([lam] if abs(abs(lam) - 1.0) <= tol else [lam, lam])
    return np.sort(np.clip(out, -1.0, 1.0))


def walk_spectrum_check(P, pi=None, cap: int = WALK_CAP) -> dict:
    """Eigenphases of the walk restricted to ``span(T, S T)`` against ``eig(D)``.

    Non-reversible chains are skipped with a diagnostic instead of raising.
    """
    A = _as_dense_stochastic(P)
    x = _pi_vector(A, pi)
    rev = check_reversibility(A, x)
    if not rev["reversible"]:
        msg = f"chain is not reversible (detailed-balance defect {rev['max_violation']:.3g})"
        log.warning("walk spectrum check skipped: %s", msg)
        return {"skipped": True, "reason": msg, "pass": None}
    W = build_walk(A, cap)
    D = discriminant(A)
    eigs_D = np.linalg.eigvalsh(D)
    Q = _invariant_basis(W)
    sub = Q.T @ W.U @ Q
    ev = np.linalg.eigvals(sub)
    phases = np.angle(ev)
    cos_walk = np.sort(ev.real)
    cos_expect = expected_cosines(eigs_D)
    if cos_walk.shape != cos_expect.shape:
        match_err = math.inf
    else:
        match_err = float(np.abs(cos_walk - cos_expect).max())

    lam2 = float(eigs_D[-2]) if len(eigs_D) > 1 else -1.0
    delta = 1.0 - lam2 if len(eigs_D) > 1 else 1.0
    nonzero = np.abs(phases)[np.abs(phases) > 1e-7]
    gap = float(nonzero.min()) if nonzero.size else None
    bound = math.sqrt(2.0 * max(delta, 0.0))
    gap_ok = True if gap is None else gap >= bound - 1e-12
    return {"skipped": False, "n": W.n, "phases": np.sort(phases), "cos_walk": cos_walk,
            "discriminant_eigs": eigs_D, "cos_match_error": match_err, "phase_gap": gap,
            "delta": delta, "gap_bound": bound, "unitarity_error": W.unitarity_error,
            "pass": bool(match_err <= COS_TOL and gap_ok and W.unitarity_error <= UNITARY_TOL)}


def target_state(W: WalkOperator, pi) -> np.ndarray:
    """``T sqrt(pi)``: the phase-0 eigenvector that encodes the stationary density."""
    x = pi.pi if isinstance(pi, DiscreteDensity) else np.asarray(pi, dtype=np.float64)
    return W.isometry(np.sqrt(x / x.sum()))


def walk_evolve(W: WalkOperator, psi0, steps: int, target=None, keep_states: bool = False) -> dict:
    """Apply the walk ``steps`` times.

    Returns ``overlap_trace[t] = <target|psi_t>`` (when a target is given),
    ``autocorrelation[t] = <psi_0|psi_t>`` and the per-step norm drift.
    """
    psi = np.asarray(psi0, dtype=np.float64 if np.isrealobj(psi0) else np.complex128).copy()
    if psi.shape != (W.n * W.n,):
        raise InvalidParameter(f"state must have {W.n * W.n} amplitudes, got {psi.shape}")
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > NORM_TOL:
        raise InvalidParameter(f"initial state has norm {nrm!r}")
    if steps < 0:
        raise InvalidParameter("steps must be >= 0")
    start = psi.copy()
    tgt = None if target is None else np.asarray(target)
    overlaps, auto, drift, states = [], [], 0.0, []
    for t in range(int(steps) + 1):
        if t:
            psi = W.U @ psi
            drift = max(drift, abs(np.linalg.norm(psi) - 1.0))
            if drift > NORM_TOL:
                raise MLMCError(f"norm drifted by {drift:.3g} at step {t}")
        if tgt is not None:
            overlaps.append(np.vdot(tgt, psi))
        auto.append(np.vdot(start, psi))
        if keep_states:
            states.append(psi.copy())
    real = np.isrealobj(psi) and (tgt is None or np.isrealobj(tgt))
    conv = (lambda v: np.real(np.array(v))) if real else np.array
    return {"overlap_trace": conv(overlaps) if tgt is not None else None,
            "autocorrelation": conv(auto), "norm_drift": drift,
            "states": states if keep_states else None, "final": psi}


def dominant_period(trace, pad: int = 64) -> float:
    """Period (in steps) of the strongest non-constant Fourier component."""
    x = np.asarray(trace, dtype=np.float64)
    x = x - x.mean()
    n = len(x) * pad
    spec = np.abs(np.fft.rfft(x, n))
    k = int(np.argmax(spec[1:])) + 1
    return n / k
