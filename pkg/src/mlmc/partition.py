"""Uniform partitions of D = [-1, 1]^d and their index arithmetic.

Bins are half-open boxes ``[j_k h, (j_k + 1) h)`` with ``-N <= j_k < N`` and
``h = 1/N``.  Flat indices are row-major over the multi-index with component
0 varying slowest, so ``flat = sum_k (j_k + N) * (2N)**(d - 1 - k)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapacityError, InvalidResolution, LevelError, OutOfDomainError

DEFAULT_STATE_CAP = 2 ** 20
INDEX_ORDER = "row-major-c0-slowest"


def as_fraction(h) -> Fraction:
    """Parse a resolution given as Fraction, int, float or a string like '1/8'."""
    if isinstance(h, Fraction):
        return h
    if isinstance(h, bool):
        raise InvalidResolution(f"resolution must be numeric, got {h!r}")
    if isinstance(h, int):
        return Fraction(h)
    try:
        return Fraction(str(h).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidResolution(f"cannot parse resolution {h!r}") from exc


@dataclass(frozen=True)
class Partition:
    h: Fraction
    d: int

    def __post_init__(self):
        h = as_fraction(self.h)
        object.__setattr__(self, "h", h)
        if h <= 0 or h.numerator != 1:
            raise InvalidResolution(f"1/h must be a positive integer, got h={h}")
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise InvalidResolution(f"dimension must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))

    @property
    def N(self) -> int:
        return self.h.denominator

    @property
    def side(self) -> int:
        """Bins per axis, 2N."""
        return 2 * self.N

    @property
    def n_states(self) -> int:
        return self.side ** self.d

    @property
    def shape(self):
        return (self.side,) * self.d

    @property
    def volume(self) -> float:
        """Bin volume h^d."""
        return float(self.h) ** self.d

    def edges(self) -> np.ndarray:
        """The 2N + 1 bin edges along one axis."""
        return np.arange(-self.N, self.N + 1, dtype=np.float64) / self.N

    def flat(self, j) -> int:
        j = self._check_index(j)
        return int(np.ravel_multi_index(tuple(jk + self.N for jk in j), self.shape))

    def unflat(self, i) -> tuple:
        if not 0 <= i < self.n_states:
            raise IndexError(f"flat index {i} outside [0, {self.n_states})")
        return tuple(int(c) - self.N for c in np.unravel_index(int(i), self.shape))

    def multi_indices(self) -> np.ndarray:
        """All multi-indices as an (n_states, d) array in flat order."""
        grids = np.indices(self.shape).reshape(self.d, -1).T
        return grids - self.N

    def bin_of(self, x) -> tuple:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if x.shape != (self.d,):
            raise OutOfDomainError(f"expected a point in R^{self.d}, got shape {x.shape}")
        if np.any(x < -1.0) or np.any(x >= 1.0) or not np.all(np.isfinite(x)):
            raise OutOfDomainError(f"point {x.tolist()} outside [-1, 1)^{self.d}")
        return tuple(min(int(math.floor(xk * self.N)), self.N - 1) for xk in x)

    def bin_center(self, j) -> np.ndarray:
        j = self._check_index(j)
        return (np.asarray(j, dtype=np.float64) + 0.5) / self.N

    def bin_box(self, j):
        j = self._check_index(j)
        lo = np.asarray(j, dtype=np.float64) / self.N
        return lo, lo + 1.0 / self.N

    def coarser(self) -> "Partition":
        if self.N % 2:
            raise LevelError(f"h={self.h} has odd N={self.N}; cannot coarsen to 2h")
        return Partition(self.h * 2, self.d)

    def finer(self) -> "Partition":
        return Partition(self.h / 2, self.d)

    def parent_flat(self) -> np.ndarray:
        """Flat coarse index of every fine bin (length ``n_states``)."""
        coarse = self.coarser()
        idx = np.indices(self.shape).reshape(self.d, -1) // 2
        return np.ravel_multi_index(tuple(idx), coarse.shape).astype(np.int64)

    def header(self) -> dict:
        return {"h_num": self.h.numerator, "h_den": self.h.denominator,
                "d": self.d, "index_order": INDEX_ORDER}

    @classmethod
    def from_header(cls, hdr: dict) -> "Partition":
        if hdr.get("index_order", INDEX_ORDER) != INDEX_ORDER:
            raise LevelError(f"unsupported index order {hdr.get('index_order')!r}")
        return cls(Fraction(hdr["h_num"], hdr["h_den"]), hdr["d"])

    def _check_index(self, j):
        j = tuple(int(v) for v in np.atleast_1d(j))
        if len(j) != self.d or any(not -self.N <= v < self.N for v in j):
            raise IndexError(f"multi-index {j} invalid for N={self.N}, d={self.d}")
        return j

    def __str__(self):
        return f"Partition(h={self.h}, d={self.d}, n_states={self.n_states})"


def build_partition(h, d: int, cap: int = DEFAULT_STATE_CAP) -> Partition:
    """Validate a resolution and dimension and return the partition.

    Raises
    ------
    InvalidResolution
        ``1/h`` is not a positive integer or ``d < 1``.
    CapacityError
        ``(2/h)^d`` exceeds ``cap``.
    """
    h = as_fraction(h)
    if h <= 0 or h.numerator != 1:
        raise InvalidResolution(f"1/h must be a positive integer, got h={h}")
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool) or d < 1:
        raise InvalidResolution(f"dimension must be a positive integer, got {d!r}")
    n = (2 * h.denominator) ** int(d)
    if n > cap:
        raise CapacityError(f"h={h}, d={d} gives {n} states, over the cap of {cap}",
                            n_states=n, cap=cap, level=h)
    return Partition(h, int(d))


def bin_of(part: Partition, x) -> tuple:
    return part.bin_of(x)


def _check_pair(fine: Partition, coarse: Partition):
    if fine.d != coarse.d:
        raise LevelError(f"dimension mismatch: fine d={fine.d}, coarse d={coarse.d}")
    if coarse.h != 2 * fine.h:
        raise LevelError(f"h={coarse.h} is not the dyadic parent of h={fine.h}")


def parent_index(fine: Partition, j, coarse: Partition | None = None) -> tuple:
    """Multi-index of the 2h bin containing fine bin ``j``."""
    coarse = fine.coarser() if coarse is None else coarse
    _check_pair(fine, coarse)
    j = fine._check_index(j)
    return tuple(jk // 2 for jk in j)


def children_of(coarse: Partition, k, fine: Partition | None = None) -> list:
    """The 2^d fine multi-indices nested in coarse bin ``k``, lexicographic."""
    fine = coarse.finer() if fine is None else fine
    _check_pair(fine, coarse)
    k = coarse._check_index(k)
    return [tuple(2 * kk + o for kk, o in zip(k, offs))
            for offs in itertools.product((0, 1), repeat=coarse.d)]
