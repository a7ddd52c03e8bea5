import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mlmc.errors import LevelError, StationaryError, SymmetrizationError
from mlmc.kernels import gauss_ar1
from mlmc.partition import Partition
from mlmc.spectral import (bauer_fike_constant, check_reversibility, dobrushin_tau, evolve,
                           overlap, power_iteration, sampled_tau_quotients, seneta_bound_check,
                           spectral_gap, spectral_gap_details, spectral_report,
                           stationary_density, stationary_residual, tau_level_comparison,
                           variation_estimate)
from mlmc.transfer import coarsen_matrix, lift_matrix, prolong_mass
from mlmc.ulam import (DiscreteDensity, PiecewiseConstantDensity, StochasticMatrix,
                       discretize_kernel, interpolate_density)

SM = StochasticMatrix.from_array


def ar1(h, **kw):
    return discretize_kernel(gauss_ar1(0.5, 0.3, **kw), Partition(F(h), 1))


def random_reversible(rng, n):
    S = rng.random((n, n)) + np.eye(n) * 0.1
    S = S + S.T
    return S / S.sum(axis=1, keepdims=True), S.sum(axis=1) / S.sum()


def test_evolve_examples(two_state):
    P = SM(two_state)
    e0 = DiscreteDensity(P.partition, [1.0, 0.0])
    assert np.allclose(evolve(e0, P).pi, [0.9, 0.1])
    assert np.allclose(evolve(e0, SM(np.full((2, 2), 0.5))).pi, [0.5, 0.5])
    pi = DiscreteDensity(Partition(F(1, 2), 1), [0.1, 0.2, 0.3, 0.4])
    assert np.array_equal(evolve(pi, SM(np.eye(4)), 7).pi, pi.pi)


def test_stationary_examples(two_state):
    for method in ("power", "eig", "direct"):
        pi = stationary_density(SM(two_state), tol=1e-14, method=method)
        assert np.allclose(pi.pi, [2 / 3, 1 / 3], atol=1e-13)
    sym = np.array([[0.5, 0.25, 0.25, 0], [0.25, 0.5, 0, 0.25], [0.25, 0, 0.5, 0.25],
                    [0, 0.25, 0.25, 0.5]])
    assert np.allclose(stationary_density(SM(sym)).pi, 0.25)
    with pytest.raises(StationaryError, match="not unique"):
        stationary_density(SM(np.eye(2)))


def test_power_iteration_counts_certifying_product(two_state):
    r = power_iteration(SM(two_state), x0=[2 / 3, 1 / 3], tol=1e-10)
    assert r.matvecs == 1 and r.converged


def test_periodic_chain_power_iteration_falls_back():
    # period-2 chain: power iteration from a non-uniform start never settles
    flip = SM([[0.0, 1.0], [1.0, 0.0]])
    r = power_iteration(flip, x0=[1.0, 0.0], max_iter=50)
    assert not r.converged
    assert np.allclose(stationary_density(flip, method="eig").pi, 0.5)


def test_tau_examples(two_state):
    assert dobrushin_tau(np.eye(3)) == 1.0
    assert dobrushin_tau(np.tile([0.2, 0.3, 0.5], (3, 1))) == 0.0
    assert dobrushin_tau(two_state) == pytest.approx(0.7, abs=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2 ** 32 - 1))
def test_sampled_quotients_never_exceed_tau(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.random((n, n)) ** 3
    A /= A.sum(axis=1, keepdims=True)
    tau = dobrushin_tau(A)
    qs = sampled_tau_quotients(A, 10_000, seed)
    assert qs.max() <= tau + 1e-12
    assert qs.max() >= 0.9 * tau


def test_gap_examples(two_state):
    assert spectral_gap(two_state, [2 / 3, 1 / 3]) == pytest.approx(0.3, abs=1e-12)
    rank_one = np.tile([0.25, 0.25, 0.5], (3, 1))
    assert spectral_gap(rank_one, [0.25, 0.25, 0.5]) == pytest.approx(1.0, abs=1e-12)
    assert spectral_gap(np.eye(2), [0.5, 0.5]) == pytest.approx(0.0, abs=1e-15)


def test_gap_reports_zero_mass_bins():
    P = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.5, 0.5, 0.0]])
    with pytest.raises(SymmetrizationError) as exc:
        spectral_gap(P, [0.5, 0.5, 0.0])
    assert exc.value.bins == (2,)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2 ** 32 - 1))
def test_reversible_gap_matches_dense_eigensolver(n, seed):
    P, pi = random_reversible(np.random.default_rng(seed), n)
    res = spectral_gap_details(P, pi)
    lam = np.sort(np.linalg.eigvals(P).real)
    assert res.reversible and res.method == "symmetric-eig"
    # a negative second eigenvalue would push 1 - lambda_2 above 1; the gap is capped there
    assert res.delta == pytest.approx(min(1.0, 1 - lam[-2]), abs=1e-9)
    assert 0 <= res.delta <= 1 and 0 <= res.delta_abs <= 1


def test_reversibility_examples(two_state):
    rev = check_reversibility(two_state, [2 / 3, 1 / 3])
    assert rev["reversible"] and rev["max_violation"] < 1e-15
    assert check_reversibility(np.full((3, 3), 1 / 3), np.full(3, 1 / 3))["reversible"]
    cyc = np.roll(np.eye(3), 1, axis=1)
    assert not check_reversibility(cyc, np.full(3, 1 / 3))["reversible"]


def test_nonreversible_chain_uses_singular_values():
    cyc = 0.5 * np.eye(3) + 0.5 * np.roll(np.eye(3), 1, axis=1)
    res = spectral_gap_details(cyc, np.full(3, 1 / 3))
    assert res.method == "singular-value" and not res.reversible
    assert res.delta == pytest.approx(1 - 0.5, abs=1e-12)  # singular values of (I + C)/2: 1, 1/2, 1/2


def test_overlap_examples():
    assert overlap([0.3, 0.7], [0.3, 0.7])["q"] == 0.0
    o = overlap([1.0, 0.0], [0.0, 1.0])
    assert (o["fidelity"], o["l1"]) == (0.0, 2.0)
    o = overlap([2 / 3, 1 / 3], [0.6, 0.4])
    assert o["fidelity"] == pytest.approx(0.997604, abs=1e-6)
    assert o["q"] == pytest.approx(0.002396, abs=1e-6)
    assert o["l1"] == pytest.approx(2 / 15, abs=1e-15)
    with pytest.raises(LevelError):
        overlap([0.5, 0.5], [1.0])


@given(st.integers(2, 30), st.integers(0, 2 ** 32 - 1))
def test_infidelity_below_half_l1(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.dirichlet(np.ones(n)), rng.dirichlet(np.full(n, 0.3))
    o = overlap(a, b)
    assert o["q"] <= 0.5 * o["l1"] + 1e-15
    assert o["q"] == pytest.approx(1 - o["fidelity"], abs=1e-12)


def test_variation_examples():
    part = Partition(F(1, 2), 1)
    assert variation_estimate(PiecewiseConstantDensity(part, np.full(4, 0.5))) == 0.0
    assert variation_estimate(PiecewiseConstantDensity(part, np.array([.25, .75, .75, .25]))) == 1.0
    coarse = DiscreteDensity(Partition(1, 1), [0.3, 0.7])
    assert variation_estimate(interpolate_density(prolong_mass(coarse))) == 0.0


def test_tau_comparison_examples():
    same = SM(np.full((4, 4), 0.25))
    res = tau_level_comparison(same, coarsen_matrix(same))
    assert res["diff"] == 0.0 and res["pass"]
    P2 = ar1(F(1, 4))
    lifted = lift_matrix(P2)
    res = tau_level_comparison(lifted, P2, lam=1.0)
    assert res["tau_h"] == pytest.approx(res["tau_2h"], abs=1e-15)
    res = tau_level_comparison(ar1(F(1, 16)), ar1(F(1, 8)))
    assert res["pass"] and res["diff"] < res["bound"]
    with pytest.raises(LevelError):
        tau_level_comparison(ar1(F(1, 16)), ar1(F(1, 4)))


def test_seneta_examples(two_state):
    same = seneta_bound_check(SM(two_state), SM(two_state))
    assert same["lhs"] <= 1e-14 and same["rhs"] == 0.0 and same["pass"]
    hand = seneta_bound_check(SM(two_state), SM([[0.8, 0.2], [0.2, 0.8]]))
    assert hand["lhs"] == pytest.approx(1 / 3, abs=1e-10)
    assert hand["rhs"] == pytest.approx(0.2 / 0.3, abs=1e-10)
    assert hand["pass"]
    P = ar1(F(1, 8))
    res = seneta_bound_check(P, lift_matrix(coarsen_matrix(P)))
    assert res["pass"] and res["lhs"] > 0


@pytest.mark.parametrize("k", [3, 4, 5])
def test_residual_to_error_chain(k):
    h = F(1, 2 ** k)
    P, P2 = ar1(h), coarsen_matrix(ar1(h))
    pi = stationary_density(P, method="eig")
    pi2 = stationary_density(P2, method="eig")
    warm = prolong_mass(pi2)
    lam = variation_estimate(interpolate_density(pi))
    resid = stationary_residual(warm, P)
    assert resid <= lam * float(h) * 1.5
    C = bauer_fike_constant(P)
    delta = spectral_gap(P, pi)
    assert np.abs(warm.pi - pi.pi).sum() <= C * resid / delta


def test_bauer_fike_is_skipped_for_large_chains():
    assert bauer_fike_constant(np.eye(513)) is None
    assert bauer_fike_constant(np.eye(3)) == pytest.approx(1.0)


def test_report_fields(two_state):
    rep = spectral_report(SM(two_state)).to_dict()
    assert rep["tau"] == pytest.approx(0.7) and rep["delta_tau"] == pytest.approx(0.3)
    assert rep["delta_eig"] == pytest.approx(0.3) and rep["reversible"]
    assert rep["partition"]["h_den"] == 1
