import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.special import gamma as gamma_fn

from dpalab import ModelParams, graph, limits
from dpalab.special import gamma_cdf
from dpalab.stats_tests import chisq_test, ks_statistic

params_st = st.builds(ModelParams, st.floats(0.05, 0.95), st.floats(0.1, 5.0), st.floats(0.1, 5.0))


# ---------------------------------------------------------------- marginals

def test_marginals_exact_integer_gammas(sym):
    # all gamma arguments are integers here, so the pmf is rational
    fact = math.factorial
    p1 = Fraction(fact(1), fact(6)) * Fraction(fact(5), fact(1)) * (Fraction(2, 5) + 2)
    assert p1 == Fraction(2, 5)
    assert limits.marginal_pmf_in(sym, 0) == pytest.approx(0.4, abs=1e-15)
    assert limits.marginal_pmf_in(sym, 1) == pytest.approx(float(p1), abs=1e-14)
    assert limits.marginal_ccdf_in(sym, 0) == pytest.approx(0.6, abs=1e-14)
    for i in range(2, 30):
        exact = Fraction(fact(i), fact(i + 5)) * Fraction(fact(5), 1) * Fraction(12, 5)
        assert limits.marginal_pmf_in(sym, i) == pytest.approx(float(exact), rel=1e-12)


@given(params_st)
def test_complement_and_telescoping(p):
    for side in ("in", "out"):
        assert limits.marginal_pmf(p, side, 0) + limits.marginal_ccdf(p, side, 0) == pytest.approx(1, abs=1e-12)
        i = np.arange(1, 400)
        diff = limits.marginal_ccdf(p, side, i - 1) - limits.marginal_ccdf(p, side, i)
        assert np.max(np.abs(diff - limits.marginal_pmf(p, side, i))) < 1e-10
        ccdf = limits.marginal_ccdf(p, side, np.arange(0, 2000))
        assert np.all(np.diff(ccdf) <= 0)


@given(params_st, st.integers(0, 5000))
def test_truncated_pmf_closes_with_ccdf(p, imax):
    for side in ("in", "out"):
        total = limits.marginal_pmf(p, side, np.arange(imax + 1)).sum() + limits.marginal_ccdf(p, side, imax)
        assert total == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("params", [ModelParams(0.5, 1, 1), ModelParams(0.3, 0.4, 2.5), ModelParams(0.8, 3, 0.2)])
def test_pmf_sums_to_one(params):
    for side in ("in", "out"):
        imax = limits.truncation_index(params, side, 1e-10)
        assert limits.marginal_ccdf(params, side, imax) < 1e-10 <= limits.marginal_ccdf(params, side, imax - 1)
        assert limits.marginal_pmf(params, side, np.arange(imax + 1)).sum() == pytest.approx(1.0, abs=1e-9)


def test_heavy_tail_table_is_capped():
    p = ModelParams(0.95, 0.1, 0.1)
    table = limits.LimitLawTable.build(p, max_index=10_000, max_k=60)
    assert table.i_max == 10_000 and table.k_max == 60
    assert table.checks["remainder_in"] > 1e-10
    assert table.checks["norm_in"] < 1e-9


@pytest.mark.parametrize("params", [ModelParams(0.5, 1, 1), ModelParams(0.3, 0.4, 2.5), ModelParams(0.8, 3, 0.2)])
def test_ccdf_power_law_slope(params):
    for side in ("in", "out"):
        i = np.geomspace(1e2, 1e4, 50)
        slope = np.polyfit(np.log(i), np.log(limits.marginal_ccdf(params, side, np.floor(i))), 1)[0]
        assert abs(slope + 1 / params.side(side)[0]) < 0.05


def test_huge_index_no_overflow(sym):
    v = limits.marginal_pmf_in(sym, 10**5)
    assert 0 < v < 1e-15 and math.isfinite(v)


def test_negative_index_rejected(sym):
    with pytest.raises(ValueError):
        limits.marginal_pmf_in(sym, -1)
    with pytest.raises(ValueError):
        limits.marginal_pmf_in(sym, 1.5)


# ---------------------------------------------------------------- joint pmf

def joint_oracle(p, i, j):
    """Independent evaluation in the time variable with scipy's negative binomial."""
    def f(t):
        pin, pout = math.exp(-p.c_in * t), math.exp(-p.c_out * t)
        a = p.alpha * stats.nbinom.pmf(i, p.delta_in, pin) * stats.nbinom.pmf(j - 1, 1 + p.delta_out, pout)
        b = p.gamma * stats.nbinom.pmf(i - 1, 1 + p.delta_in, pin) * stats.nbinom.pmf(j, p.delta_out, pout)
        return math.exp(-t) * (a + b)
    # beyond t = 200 the factor e^{-t} leaves nothing measurable
    return integrate.quad(f, 0, 200, epsabs=1e-13, limit=400)[0]


@pytest.mark.parametrize("cell", [(0, 1), (1, 0), (1, 1), (2, 3), (7, 0), (4, 9)])
def test_joint_pmf_against_time_domain_oracle(asym, cell):
    assert limits.joint_pmf(asym, *cell) == pytest.approx(joint_oracle(asym, *cell), abs=1e-9)


def test_joint_pmf_shift_structure(sym, asym):
    for p in (sym, asym):
        assert limits.joint_pmf(p, 0, 0) == 0.0


def test_joint_marginalizes(asym):
    table = limits.LimitLawTable.build(asym)
    assert abs(table.joint[1].sum() - table.pin[1]) < 1e-6
    assert np.max(np.abs(table.joint[:20].sum(axis=1) - table.pin[:20])) < 1e-6
    assert np.max(np.abs(table.joint[:, :20].sum(axis=0) - table.pout[:20])) < 1e-6
    assert abs(table.joint.sum() - 1) < 1e-6


def test_joint_swap_symmetry(asym):
    q = asym.swapped()
    for i, j in [(0, 1), (2, 5), (3, 3)]:
        assert limits.joint_pmf(asym, i, j) == pytest.approx(limits.joint_pmf(q, j, i), abs=1e-11)


def test_quadrature_error_reports_achieved_tolerance(sym):
    with pytest.raises(limits.QuadratureError) as err:
        limits.joint_pmf_cells(sym, [1, 2], [1, 2], tol=1e-30)
    assert err.value.achieved > 1e-30


def test_table_invariants_and_export(tmp_path, sym):
    table = limits.LimitLawTable.build(sym)
    assert abs(table.pin.sum() + table.pin_ccdf[-1] - 1) < 1e-8
    assert np.max(np.abs(table.pin_ccdf[:-1] - table.pin_ccdf[1:] - table.pin[1:])) < 1e-10
    table.write_marginals_csv(tmp_path / "m.csv")
    table.write_joint_csv(tmp_path / "j.csv")
    head = (tmp_path / "m.csv").read_text().splitlines()[:2]
    assert head[0] == "i,p_in,p_in_ccdf,p_out,p_out_ccdf"
    assert float(head[1].split(",")[1]) == pytest.approx(0.4)
    rows = (tmp_path / "j.csv").read_text().splitlines()
    assert rows[0] == "i,j,p_ij"
    assert len(rows) - 1 == np.count_nonzero(table.joint)


def test_p11_matches_simulation(sym):
    reps, n = 8, 10**6
    vals = []
    for r in range(reps):
        g = graph.generate(sym, n, 1000 + r)
        vals.append(np.mean((g.in_degrees == 1) & (g.out_degrees == 1)))
    vals = np.array(vals)
    se = vals.std(ddof=1) / math.sqrt(reps)
    assert abs(vals.mean() - limits.joint_pmf(sym, 1, 1)) < 3 * se + 1e-5


# ---------------------------------------------------------------- samplers

def test_limit_pair_sampler_matches_joint_pmf(asym):
    i, o, j = limits.sample_limit_pair(asym, 3, size=10**6)
    cells = [(a, b) for a in range(11) for b in range(11 - a)]
    probs = limits.joint_pmf_cells(asym, [c[0] for c in cells], [c[1] for c in cells])
    code = {c: k for k, c in enumerate(cells)}
    keys = np.where(i + o <= 10, i * 11 + o, -1)
    lookup = np.full(11 * 11, -1)
    for (a, b), k in code.items():
        lookup[a * 11 + b] = k
    inside = keys >= 0
    obs = np.bincount(lookup[keys[inside]], minlength=len(cells))
    rep = chisq_test(obs, probs, i.size)
    assert rep.accept, rep
    assert np.all(o[j == 0] >= 1) and np.all(i[j == 1] >= 1)
    marg = limits.marginal_pmf_in(asym, np.arange(60))
    rep = chisq_test(np.bincount(np.minimum(i, 59), minlength=60), marg, i.size)
    assert rep.accept, rep


def test_fixed_node_limit_v1_law(sym):
    x, y = limits.sample_fixed_node_limit(sym, 1, 4, size=20_000)
    assert np.all(x > 0) and np.all(y > 0)

    def cdf(s):
        # P(sigma / W^c <= s) = E[P(sigma <= s W^c)], W ~ Exp(1)
        w = np.linspace(0, 60, 60_001)[1:]
        dens = np.exp(-w)
        return np.array([np.trapezoid(gamma_cdf(2.0, v * w**0.25) * dens, w) for v in s])

    xs = np.sort(x)[::40]
    # thinned sample: every 40th order statistic of the full sample, tested against the full-sample size
    emp = (np.arange(xs.size) * 40 + 1) / x.size
    assert np.max(np.abs(emp - cdf(xs))) < 1.63 / math.sqrt(x.size) + 40 / x.size


@pytest.mark.parametrize("v", [2, 10])
def test_fixed_node_limit_mean_and_mixture(asym, v):
    x, y = limits.sample_fixed_node_limit(asym, v, 9, size=200_000)
    assert np.all(x > 0) and np.all(y > 0)
    p = asym
    decay_in = np.prod([k / (k + p.c_in) for k in range(1, v)])
    decay_out = np.prod([k / (k + p.c_out) for k in range(1, v)])
    # alpha weight on shape delta_in for sigma_in, gamma weight on shape 1 + delta_in
    mean_x = (p.delta_in + p.gamma) * decay_in * gamma_fn(1 - p.c_in)
    mean_y = (p.delta_out + p.alpha) * decay_out * gamma_fn(1 - p.c_out)
    assert x.mean() == pytest.approx(mean_x, rel=0.02)
    assert y.mean() == pytest.approx(mean_y, rel=0.02)
    with pytest.raises(ValueError):
        limits.sample_fixed_node_limit(asym, 0, 1)


# ---------------------------------------------------------------- tail measure

def density_oracle(p, branch, x, y):
    if branch == 1:
        norm = 1 / (p.c_in * gamma_fn(1 + p.delta_in) * gamma_fn(p.delta_out))
        px, py = p.delta_in, p.delta_out - 1
        zp = 2 + p.iota_in + p.delta_in + p.a * p.delta_out
    else:
        norm = 1 / (p.c_in * gamma_fn(p.delta_in) * gamma_fn(1 + p.delta_out))
        px, py = p.delta_in - 1, p.delta_out
        zp = 1 + p.a + p.iota_in + p.delta_in + p.a * p.delta_out
    inner = integrate.quad(lambda z: z ** (-zp) * math.exp(-x / z - y / z**p.a), 0, np.inf,
                           epsabs=0, epsrel=1e-11, limit=500)[0]
    return norm * x**px * y**py * inner


@pytest.mark.parametrize("branch", [1, 2])
@pytest.mark.parametrize("pt", [(0.5, 0.5), (2.0, 0.3), (1.0, 4.0), (6.0, 6.0)])
def test_tail_density_against_direct_quadrature(asym, branch, pt):
    assert limits.tail_density(asym, branch, *pt) == pytest.approx(density_oracle(asym, branch, *pt), rel=1e-7)


@given(params_st, st.floats(0.2, 5), st.floats(0.2, 5))
def test_tail_density_nonnegative(p, x, y):
    for b in (1, 2):
        assert limits.tail_density(p, b, x, y) >= 0


def test_tail_density_domain(sym):
    with pytest.raises(ValueError):
        limits.tail_density(sym, 3, 1.0, 1.0)
    with pytest.raises(ValueError):
        limits.tail_density(sym, 1, 0.0, 1.0)
    with pytest.raises(ValueError):
        limits.tail_region_mass(sym, 0.0, 1.0)


@pytest.mark.parametrize("params", [ModelParams(0.5, 1, 1), ModelParams(0.3, 0.4, 2.5), ModelParams(0.8, 3, 0.2)])
def test_marginal_mass_matches_marginal_tail(params):
    # mass of (x, inf] x (0, inf] equals the in-marginal limit C x^{-1/c_in}
    for x in (0.7, 1.0, 3.0):
        expect = limits.tail_constant(params, "in") * x ** (-params.iota_in)
        assert limits.tail_region_mass(params, x, 0.0) == pytest.approx(expect, rel=1e-2)
        assert limits.tail_region_mass(params, x, 0.0) == pytest.approx(expect, rel=1e-8)


@settings(max_examples=15)
@given(st.builds(ModelParams, st.floats(0.1, 0.9), st.floats(0.2, 4.0), st.floats(0.2, 4.0)),
       st.floats(0.3, 6), st.floats(0.3, 6))
def test_rectangle_mass_two_routes_agree(p, x, y):
    two_d = limits.tail_region_mass(p, x, y)
    mixture = limits.tail_region_mass_mixture(p, x, y)
    assert two_d == pytest.approx(mixture, rel=1e-6, abs=1e-12)


def test_rectangle_mass_monotone(sym):
    grid = [0.5, 1.0, 2.0, 4.0]
    m = np.array([[limits.tail_region_mass(sym, x, y) for y in grid] for x in grid])
    assert np.all(np.diff(m, axis=0) < 0) and np.all(np.diff(m, axis=1) < 0)
