from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from mlmc.errors import BadDensityError, InvalidParameter, KernelLeakageError
from mlmc.kernels import eval_kernel, gauss_ar1, grid_defined, uniform_window
from mlmc.partition import Partition
from mlmc.transfer import lift_matrix
from mlmc.ulam import (DiscreteDensity, QuadratureSpec, StochasticMatrix, discretize_kernel,
                       interpolate_density, interpolation_error, lift_kernel, lump_density,
                       sparsify_rows)

H2 = Partition(Fraction(1, 2), 1)

# Ulam matrices of gauss-ar1(a=0.5, sigma=0.3) at h=1/2, computed with scipy
# adaptive quadrature over x and normal CDF differences over y
ORACLE_RENORM = np.array([
    [0.32936820845619985, 0.5565161007521066, 0.11181683173752929, 0.002298859054164263],
    [0.11023299375943722, 0.5464307563655699, 0.32204401559523327, 0.02129223427975966],
    [0.02129223427975968, 0.3220440155952332, 0.5464307563655699, 0.11023299375943721],
    [0.00229885905416426, 0.1118168317375293, 0.5565161007521067, 0.32936820845619985]])
ORACLE_REFLECT = np.array([
    [0.34263441761769226, 0.5451915112352601, 0.10990360052032676, 0.0022704706267208533],
    [0.11217002754958233, 0.5450651049719474, 0.32137803371175167, 0.021386833766718558],
    [0.021386833766718575, 0.3213780337117516, 0.5450651049719475, 0.11217002754958233],
    [0.0022704706267208394, 0.10990360052032679, 0.5451915112352601, 0.34263441761769226]])


def triangle(x):
    return 1.0 - np.abs(np.asarray(x)[..., 0])


def test_lump_uniform_and_triangle():
    assert np.allclose(lump_density(lambda x: np.full(len(x), 0.5), H2).pi, 0.25, atol=1e-15)
    assert np.allclose(lump_density(triangle, Partition(1, 1)).pi, [0.5, 0.5], atol=1e-15)
    assert np.allclose(lump_density(triangle, H2).pi, [1 / 8, 3 / 8, 3 / 8, 1 / 8], atol=1e-15)


def test_lump_rejects_negative_mass():
    with pytest.raises(BadDensityError):
        lump_density(lambda x: -np.ones(len(x)), H2)


def test_interpolate_examples():
    f = interpolate_density(DiscreteDensity(H2, [1 / 8, 3 / 8, 3 / 8, 1 / 8]))
    assert np.allclose(f.values, [0.25, 0.75, 0.75, 0.25])
    g = interpolate_density(DiscreteDensity(Partition(1, 1), [1.0, 0.0]))
    assert g([[-0.5]])[0] == 1.0 and g([[0.5]])[0] == 0.0
    assert interpolate_density(DiscreteDensity.uniform(H2)).values.tolist() == [0.5] * 4


@given(st.integers(1, 3), st.sampled_from([1, 2, 4]), st.integers(0, 2 ** 31))
def test_lump_interpolate_round_trip(d, N, seed):
    part = Partition(Fraction(1, N), d)
    if part.n_states > 4096:
        return
    pi = DiscreteDensity.normalized(part, np.random.default_rng(seed).random(part.n_states) + 1e-3)
    f = interpolate_density(pi)
    assert f.integral() == pytest.approx(1.0, abs=1e-13)
    back = lump_density(f, part, QuadratureSpec(points=2))
    assert np.abs(back.pi - pi.pi).max() <= 1e-15


@pytest.mark.parametrize("k", range(2, 7))
def test_triangle_interpolation_error_is_half_h(k):
    # the residual is a sawtooth of slope 1 in every bin: l1 = 2/h bins * h^2/4
    h = Fraction(1, 2 ** k)
    res = interpolation_error(triangle, Partition(h, 1), lipschitz=1.0)
    assert res["l1_error"] == pytest.approx(float(h) / 2, abs=1e-13)
    assert res["pass"]


def test_triangle_error_at_coarsest_level():
    res = interpolation_error(triangle, H2, lipschitz=1.0)
    assert res["l1_error"] == pytest.approx(0.25, abs=1e-13)
    assert res["linf_error"] == pytest.approx(0.25, abs=1e-13)


def test_constant_density_has_no_error():
    res = interpolation_error(lambda x: np.full(len(x), 0.25), Partition(Fraction(1, 4), 2))
    assert res["l1_error"] <= 1e-15 and res["linf_error"] <= 1e-15


def test_smooth_density_first_order_rate():
    # stationary-like Gaussian bump; first-order convergence across three halvings
    s = 0.35
    z = erf(1 / (s * np.sqrt(2)))
    p = lambda x: np.exp(-np.asarray(x)[..., 0] ** 2 / (2 * s * s)) / (s * np.sqrt(2 * np.pi) * z)
    errs = [interpolation_error(p, Partition(Fraction(1, 2 ** k), 1))["l1_error"] for k in (2, 3, 4, 5)]
    ratios = [errs[i] / errs[i + 1] for i in range(3)]
    assert all(1.6 <= r <= 2.4 for r in ratios), ratios


@pytest.mark.parametrize("boundary,oracle", [("renormalize-rows", ORACLE_RENORM),
                                             ("reflect", ORACLE_REFLECT)])
def test_gauss_matrix_matches_oracle(boundary, oracle):
    P = discretize_kernel(gauss_ar1(0.5, 0.3, boundary), H2)
    assert np.abs(P.dense() - oracle).max() <= 1e-14


def test_window_matrices():
    P = discretize_kernel(uniform_window(2.0), Partition(1, 1))
    assert P.dense().tolist() == [[0.5, 0.5], [0.5, 0.5]]
    # half-width 1 on two bins: P00 = int_{-1}^0 dx / (x + 2) = ln 2
    Q = discretize_kernel(uniform_window(1.0), Partition(1, 1)).dense()
    # (8-point Gauss-Legendre on a smooth rational integrand, hence 1e-11)
    assert Q[0, 0] == pytest.approx(np.log(2.0), abs=1e-11)
    R = discretize_kernel(uniform_window(1.0, "reflect"), Partition(1, 1)).dense()
    assert R[0, 0] == pytest.approx(0.75, abs=1e-14)


def test_leakage_error():
    with pytest.raises(KernelLeakageError):
        discretize_kernel(gauss_ar1(0.9, 2.0), H2)
    discretize_kernel(gauss_ar1(0.9, 2.0, "reflect"), H2)


@pytest.mark.parametrize("d,h", [(1, Fraction(1, 8)), (2, Fraction(1, 4))])
def test_a_zero_gives_identical_rows(d, h):
    P = discretize_kernel(gauss_ar1(0.0, 0.3), Partition(h, d)).dense()
    assert np.abs(P - P[0]).max() <= 1e-10


def test_grid_defined_same_resolution_is_identity_map():
    rng = np.random.default_rng(3)
    part = Partition(Fraction(1, 2), 2)
    M = rng.random((16, 16))
    M /= M.sum(axis=1, keepdims=True)
    P = discretize_kernel(grid_defined(M, part), part)
    assert np.abs(P.dense() - M).max() <= 1e-15


@pytest.mark.parametrize("d", [1, 2])
def test_grid_defined_on_finer_grid_equals_lift(d):
    rng = np.random.default_rng(11 + d)
    ref = Partition(1, d)
    M = rng.random((ref.n_states, ref.n_states))
    M /= M.sum(axis=1, keepdims=True)
    P2 = StochasticMatrix.from_array(M, ref)
    P = discretize_kernel(grid_defined(M, ref), ref.finer())
    assert np.abs(P.dense() - lift_matrix(P2).dense()).max() <= 1e-15
    assert np.allclose(P.dense().sum(axis=1), 1.0, atol=1e-15)
    P4 = discretize_kernel(grid_defined(M, ref), Partition(Fraction(1, 4), d))
    assert np.allclose(P4.dense().sum(axis=1), 1.0, atol=1e-14)


def test_lift_kernel_examples():
    part = Partition(1, 1)
    I = lift_kernel(StochasticMatrix.from_array(np.eye(2)))
    assert eval_kernel(I, [-0.5], [-0.2]) == 1.0 and eval_kernel(I, [-0.5], [0.2]) == 0.0
    J = lift_kernel(StochasticMatrix.from_array(np.full((2, 2), 0.5)))
    assert eval_kernel(J, [0.7], [-0.9]) == 0.5


def test_kron_assembly_equals_tensor_rule_in_2d():
    k = gauss_ar1(0.5, 0.3)
    part = Partition(Fraction(1, 2), 2)
    P = discretize_kernel(k, part).dense()
    # brute force: tensor Gauss-Legendre in x, exact separable mass in y
    P1 = discretize_kernel(k, H2).dense()
    for i in range(16):
        for j in range(16):
            assert P[i, j] == pytest.approx(P1[i // 4, j // 4] * P1[i % 4, j % 4], abs=1e-16)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(0.15, 1.0), st.sampled_from([2, 4, 8]),
       st.sampled_from(["renormalize-rows", "reflect"]))
def test_rows_are_exactly_stochastic(a, sigma, N, boundary):
    P = discretize_kernel(gauss_ar1(a, sigma, boundary), Partition(Fraction(1, N), 1))
    assert P.meta["renorm_max_delta"] <= 1e-10
    assert np.abs(np.asarray(P.entries.sum(axis=1)).ravel() - 1).max() <= 1e-15


def test_sparsify_drops_tiny_entries():
    M = sp.csr_matrix(np.array([[1.0, 1e-20, 0.0], [0.2, 0.3, 0.5], [0.0, 0.0, 1.0]]))
    S = sparsify_rows(M)
    assert S.nnz == 5
    assert np.allclose(np.asarray(S.sum(axis=1)).ravel(), 1.0)


def test_stochastic_matrix_validation():
    with pytest.raises(InvalidParameter):
        StochasticMatrix.from_array([[0.5, 0.4], [0.5, 0.5]])
    with pytest.raises(InvalidParameter):
        StochasticMatrix.from_array([[1.5, -0.5], [0.5, 0.5]])
    P = StochasticMatrix.from_array(np.full((4, 4), 0.25))
    assert (P.n, P.nnz, P.s) == (4, 16, 4)
    assert P.header()["partition"]["h_den"] == 2


def test_monte_carlo_rule_is_seeded():
    q = QuadratureSpec("monte-carlo", samples=64, seed=11)
    a = discretize_kernel(gauss_ar1(0.5, 0.3), H2, q).dense()
    b = discretize_kernel(gauss_ar1(0.5, 0.3), H2, q).dense()
    assert np.array_equal(a, b)
    assert np.abs(a - ORACLE_RENORM).max() < 0.02
