from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlmc.errors import CapacityError, InvalidResolution, LevelError, OutOfDomainError
from mlmc.partition import Partition, bin_of, build_partition, children_of, parent_index


def test_half_resolution_has_four_bins():
    p = build_partition(Fraction(1, 2), 1)
    assert p.n_states == 4
    assert p.edges().tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]


@pytest.mark.parametrize("h,d,n", [(1, 3, 8), ("1/4", 2, 64), ("1/8", 2, 256), (0.5, 1, 4)])
def test_state_counts(h, d, n):
    assert build_partition(h, d).n_states == n


@pytest.mark.parametrize("h", ["2/3", "0", "-1/2", "abc", 0.3])
def test_bad_resolution(h):
    with pytest.raises(InvalidResolution):
        build_partition(h, 1)


def test_capacity_error_names_level():
    with pytest.raises(CapacityError) as exc:
        build_partition("1/64", 2, cap=1000)
    assert exc.value.level == Fraction(1, 64)
    assert exc.value.n_states == 128 ** 2


def test_bin_of_examples():
    assert bin_of(Partition(Fraction(1, 2), 1), 0.25) == (0,)
    assert bin_of(Partition(Fraction(1, 2), 1), -1.0) == (-2,)
    assert bin_of(Partition(Fraction(1, 4), 2), (0.3, -0.9)) == (1, -4)


@pytest.mark.parametrize("x", [1.0, -1.0000001, float("nan"), 3.0])
def test_bin_of_outside(x):
    with pytest.raises(OutOfDomainError):
        bin_of(Partition(Fraction(1, 2), 1), x)


def test_parent_and_children():
    fine = Partition(Fraction(1, 4), 1)
    assert parent_index(fine, (-2,)) == (-1,)
    coarse = Partition(Fraction(1, 2), 1)
    assert children_of(coarse, (0,)) == [(0,), (1,)]
    c2 = Partition(Fraction(1, 2), 2)
    assert children_of(c2, (-1, 0)) == [(-2, 0), (-2, 1), (-1, 0), (-1, 1)]


def test_non_dyadic_pair_rejected():
    with pytest.raises(LevelError):
        parent_index(Partition(Fraction(1, 8), 1), (0,), Partition(Fraction(1, 2), 1))
    with pytest.raises(LevelError):
        Partition(Fraction(1, 3), 1).coarser()


def test_flat_order_component_zero_slowest():
    p = Partition(Fraction(1, 1), 2)
    assert [p.unflat(i) for i in range(4)] == [(-1, -1), (-1, 0), (0, -1), (0, 0)]
    assert p.header()["index_order"] == "row-major-c0-slowest"
    assert Partition.from_header(p.header()) == p


levels = st.sampled_from([Fraction(1, 2 ** k) for k in range(1, 5)])


@given(levels, st.integers(1, 3), st.data())
def test_center_round_trip(h, d, data):
    p = Partition(h, d)
    j = tuple(data.draw(st.integers(-p.N, p.N - 1)) for _ in range(d))
    assert p.bin_of(p.bin_center(j)) == j
    assert p.unflat(p.flat(j)) == j


@given(levels, st.integers(1, 3), st.data())
def test_nesting_and_bijection(h, d, data):
    fine = Partition(h / 2, d)
    coarse = Partition(h, d)
    k = tuple(data.draw(st.integers(-coarse.N, coarse.N - 1)) for _ in range(d))
    lo_c, hi_c = coarse.bin_box(k)
    kids = children_of(coarse, k)
    assert len(set(kids)) == 2 ** d
    for j in kids:
        assert parent_index(fine, j) == k
        lo, hi = fine.bin_box(j)
        assert np.all(lo >= lo_c) and np.all(hi <= hi_c)


def test_parent_flat_matches_parent_index():
    fine = Partition(Fraction(1, 4), 2)
    coarse = fine.coarser()
    pf = fine.parent_flat()
    for i in range(fine.n_states):
        assert pf[i] == coarse.flat(parent_index(fine, fine.unflat(i)))
