"""Inter-level operators between resolutions h and 2h.

Three prolongation conventions are kept apart on purpose:

``prolong_copy``
    each child repeats its parent's value; adjoint of ``restrict_sum`` and
    ``restrict_sum(prolong_copy(v)) == 2**d * v``.
``prolong_mass``
    each child receives ``1/2**d`` of its parent's mass; preserves the 1-norm.
``prolong_amplitude``
    each child receives ``1/sqrt(2**d)`` of its parent's amplitude; preserves
    the 2-norm and commutes with squaring into ``prolong_mass``.

Vector functions work on any numpy dtype, including object arrays of
``fractions.Fraction`` for exact checks.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import InvalidParameter, LevelError
from .ulam import DiscreteDensity, StochasticMatrix, partition_for_size

AMPLITUDE_TOL = 1e-12


def _levels(n: int, d: int):
    fine = partition_for_size(n, d)
    return fine, fine.coarser()


def _restrict_leading(A, d: int):
    """Sum the leading axis of ``A`` over sibling groups."""
    A = np.asarray(A)
    fine, coarse = _levels(A.shape[0], d)
    rest = A.shape[1:]
    shape = []
    for _ in range(d):
        shape += [coarse.side, 2]
    B = A.reshape(tuple(shape) + rest)
    return B.sum(axis=tuple(range(1, 2 * d, 2))).reshape((coarse.n_states,) + rest)


def _prolong_leading(A, d: int):
    """Copy the leading axis of ``A`` onto children."""
    A = np.asarray(A)
    coarse = partition_for_size(A.shape[0], d)
    rest = A.shape[1:]
    B = A.reshape(coarse.shape + rest)
    for k in range(d):
        B = np.repeat(B, 2, axis=k)
    return B.reshape((coarse.n_states * 2 ** d,) + rest)


def restrict_sum(v, d: int = 1) -> np.ndarray:
    """Coarse entry k is the sum of v over the children of k."""
    v = np.asarray(v)
    if v.ndim != 1:
        raise LevelError("restrict_sum expects a vector")
    return _restrict_leading(v, d)


def prolong_copy(v, d: int = 1) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1:
        raise LevelError("prolong_copy expects a vector")
    return _prolong_leading(v, d)


def prolong_mass(pi, d: int | None = None):
    """Split each coarse mass evenly over its 2**d children.

    Accepts a ``DiscreteDensity`` (returns one at the finer level) or a plain
    vector together with ``d``.
    """
    if isinstance(pi, DiscreteDensity):
        part = pi.partition
        fine = part.finer()
        v = prolong_copy(pi.pi, part.d) * (0.5 ** part.d)
        return DiscreteDensity(fine, v)
    if d is None:
        raise InvalidParameter("prolong_mass on a plain vector needs d")
    v = prolong_copy(pi, d)
    return v / 2 ** d if v.dtype == object else v * (0.5 ** d)


def prolong_amplitude(psi, d: int = 1) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.float64)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > AMPLITUDE_TOL:
        raise InvalidParameter(f"amplitude vector has 2-norm {nrm!r}, expected 1")
    return prolong_copy(psi, d) / np.sqrt(2.0 ** d)


def aggregation_matrix(fine) -> sp.csr_matrix:
    """Sparse 0/1 matrix R with ``R @ v == restrict_sum(v)`` (R.T is prolong_copy)."""
    parent = fine.parent_flat()
    n = fine.n_states
    return sp.csr_matrix((np.ones(n), (parent, np.arange(n))), shape=(n // 2 ** fine.d, n))


def coarsen_array(A, d: int = 1):
    """``2**-d * R A R^T``: average over children rows, sum over children columns."""
    A = np.asarray(A)
    B = _restrict_leading(_restrict_leading(A, d).T, d).T
    return B / 2 ** d if B.dtype == object else B * (0.5 ** d)


def lift_array(A2, d: int = 1):
    """``2**-d * R^T A2 R``: entry (i, j) is ``A2[parent(i), parent(j)] / 2**d``."""
    A2 = np.asarray(A2)
    coarse = partition_for_size(A2.shape[0], d)
    parent = coarse.finer().parent_flat()
    B = A2[np.ix_(parent, parent)]
    return B / 2 ** d if B.dtype == object else B * (0.5 ** d)


def coarsen_matrix(P: StochasticMatrix) -> StochasticMatrix:
    """The chain at 2h induced by P at h (restriction on the left, copy on the right)."""
    fine = P.partition
    coarse = fine.coarser()
    R = aggregation_matrix(fine)
    P2 = (R @ P.entries @ R.T) * (0.5 ** fine.d)
    return StochasticMatrix(coarse, sp.csr_matrix(P2), P.threshold,
                            {"derived": "coarsen_matrix", "from_h": str(fine.h)})


def lift_matrix(P2: StochasticMatrix) -> StochasticMatrix:
    """The 2h chain re-expressed on level h."""
    coarse = P2.partition
    fine = coarse.finer()
    R = aggregation_matrix(fine)
    P = (R.T @ P2.entries @ R) * (0.5 ** coarse.d)
    return StochasticMatrix(fine, sp.csr_matrix(P), P2.threshold,
                            {"derived": "lift_matrix", "from_h": str(coarse.h)})
