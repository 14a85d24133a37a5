import math

import numpy as np
import pytest
from scipy.integrate import dblquad, solve_ivp

from dpalab import bisbi
from dpalab.special import gamma_cdf, nb_pmf
from dpalab.stats_tests import chisq_test, ks_statistic


def forward_equation_law(lam, theta, init, t, kmax=400):
    """P(Z(t) = k) for k <= kmax by integrating the Kolmogorov forward equations."""
    k = np.arange(kmax + 1)
    rate = lam * k + theta

    def rhs(_, p):
        dp = -rate * p
        dp[1:] += rate[:-1] * p[:-1]
        return dp

    p0 = np.zeros(kmax + 1)
    p0[init] = 1.0
    sol = solve_ivp(rhs, (0, t), p0, method="LSODA", rtol=1e-10, atol=1e-13)
    return sol.y[:, -1]


def test_yule_pmf_solves_forward_equations():
    t, lam = 1.3, 0.8
    law = forward_equation_law(lam, 0.0, 1, t)
    k = np.arange(law.size)
    assert np.allclose(bisbi.yule_pmf(k, t, lam), law, atol=1e-8)


@pytest.mark.parametrize("lam,theta,init", [(1.0, 0.5, 0), (0.6, 1.2, 3), (0.25, 0.25, 1)])
def test_transient_law_is_shifted_negative_binomial(lam, theta, init):
    t = 1.7
    law = forward_equation_law(lam, theta, init, t)
    k = np.arange(law.size)
    nb = np.where(k >= init, nb_pmf(init + theta / lam, math.exp(-lam * t), np.maximum(k - init, 0)), 0.0)
    assert np.allclose(nb, law, atol=1e-8)


def test_simulated_transient_law(seed=4):
    bp = bisbi.BIParams(0.7, 1.1, 2)
    t = 2.0
    z = bisbi.simulate_bi_batch(bp, t, 40_000, seed)
    k = np.arange(0, 200)
    probs = np.where(k >= 2, nb_pmf(2 + 1.1 / 0.7, math.exp(-0.7 * t), np.maximum(k - 2, 0)), 0.0)
    obs = np.bincount(np.minimum(z, 199), minlength=200)
    rep = chisq_test(obs, probs, z.size)
    assert rep.accept, rep


def test_single_trajectory_and_batch_agree():
    bp = bisbi.BIParams(1.0, 0.5, 0)
    single = np.array([bisbi.simulate_bi(bp, 1.5, s) for s in range(4000)])
    probs = nb_pmf(0.5, math.exp(-1.5), np.arange(60))
    rep = chisq_test(np.bincount(np.minimum(single, 59), minlength=60), probs, single.size)
    assert rep.accept, rep


def test_jump_times_are_increasing_and_counted():
    z, jumps = bisbi.simulate_bi(bisbi.BIParams(1.0, 1.0, 0), 2.0, 3, return_jumps=True)
    assert len(jumps) == z
    assert np.all(np.diff(jumps) > 0) and (len(jumps) == 0 or jumps[-1] <= 2.0)


def test_shot_noise_construction_matches_direct_law():
    bp = bisbi.BIParams(0.5, 0.8, 0)
    t = 2.5
    z = bisbi.simulate_bi_shotnoise(bp, t, 9, size=30_000)
    probs = nb_pmf(0.8 / 0.5, math.exp(-0.5 * t), np.arange(80))
    rep = chisq_test(np.bincount(np.minimum(z, 79), minlength=80), probs, z.size)
    assert rep.accept, rep
    with pytest.raises(ValueError):
        bisbi.simulate_bi_shotnoise(bisbi.BIParams(0.5, 0.8, 2), 1.0, 1)


@pytest.mark.parametrize("lam,theta,init", [(1.0, 0.0, 1), (0.5, 1.5, 0), (2.0, 1.0, 3)])
def test_scaled_process_converges_to_gamma(lam, theta, init):
    bp = bisbi.BIParams(lam, theta, init)
    t = math.log(1e3) / lam
    z = bisbi.simulate_bi_batch(bp, t, 5000, 17)
    x = np.sort(z * math.exp(-lam * t))
    rep = ks_statistic(x, lambda s: gamma_cdf(bp.limit_shape, s))
    assert rep.accept, rep


def test_parameter_validation():
    with pytest.raises(ValueError):
        bisbi.BIParams(0.0, 1.0)
    with pytest.raises(ValueError):
        bisbi.BIParams(1.0, -1.0)
    with pytest.raises(ValueError):
        bisbi.BIParams(1.0, 0.0, 0)
    with pytest.raises(ValueError):
        bisbi.SBIPairParams(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        bisbi.simulate_bi(bisbi.BIParams(1.0, 1.0), -1.0, 0)


def test_jump_budget():
    with pytest.raises(bisbi.JumpBudgetExceeded):
        bisbi.simulate_bi(bisbi.BIParams(1.0, 1.0, 1), 20.0, 0, jump_budget=100)
    with pytest.raises(bisbi.JumpBudgetExceeded):
        bisbi.simulate_bi_batch(bisbi.BIParams(1.0, 1.0, 1), 20.0, 4, 0, jump_budget=100)
    with pytest.raises(bisbi.JumpBudgetExceeded, match="t_large"):
        bisbi.scaled_limit_sample(bisbi.SBIPairParams(0.5, 1, 1), 0, size=2, t_large=40.0, jump_budget=100)


def test_switched_pair_branches():
    sp = bisbi.SBIPairParams(0.3, 0.8, 1.6)
    t = 1.2
    i, o, j = bisbi.simulate_sbi_pair(sp, t, 5, size=60_000)
    assert abs(j.mean() - 0.3) < 4 * math.sqrt(0.3 * 0.7 / j.size)
    # J = 0 starts at (0, 1): I ~ NB(delta1), O - 1 ~ NB(1 + delta2)
    sel = j == 0
    pi = nb_pmf(0.8, math.exp(-0.7 * t), np.arange(40))
    po = nb_pmf(2.6, math.exp(-0.3 * t), np.arange(40))
    assert chisq_test(np.bincount(np.minimum(i[sel], 39), minlength=40), pi, sel.sum()).accept
    assert chisq_test(np.bincount(np.minimum(o[sel] - 1, 39), minlength=40), po, sel.sum()).accept
    assert np.all(o[sel] >= 1)
    sel = j == 1
    assert np.all(i[sel] >= 1)


def test_scaled_limit_density_normalized_and_sampled():
    sp = bisbi.SBIPairParams(0.4, 1.3, 0.6)
    total, _ = dblquad(lambda y, x: bisbi.scaled_limit_density(sp, x, y), 0, 60, 0, 60, epsabs=1e-9)
    assert total == pytest.approx(1.0, abs=1e-6)
    x, y, j = bisbi.scaled_limit_sample(sp, 8, size=4000)
    assert x.shape == y.shape == j.shape == (4000,)
    # in the J = 0 branch x is Gamma(delta1)
    xs = np.sort(x[j == 0])
    assert ks_statistic(xs, lambda s: gamma_cdf(1.3, s)).accept
