"""Limit laws of the degree distribution.

* marginal in/out pmfs and ccdfs (closed forms in log-gamma space);
* the joint limit pmf, a mixture of negative binomials over an Exp(1)
  time, integrated numerically;
* samplers for the joint limit pair and for the fixed-node scaled limit;
* densities and rectangle masses of the joint tail measure
  ``gamma * V1 + alpha * V2``.

The tail densities are implemented with exponent ``-(x/z + y/z^a)``; the
printed sign ``-x/z + y/z^a`` would not give a finite measure.  The
closed-form alternative :func:`tail_region_mass_mixture` (Gamma survival
functions against the Pareto mixing measure) is the independent check.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import gammaincc, gammaln

from dpalab.params import ModelParams
from dpalab.rng import as_rng
from dpalab.special import log_nb_pmf


class QuadratureError(ArithmeticError):
    """Adaptive quadrature stopped above the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")
        self.achieved = achieved


# ---------------------------------------------------------------- marginals

def _log_bracket(params: ModelParams, side: str) -> float:
    c, d, own, other = params.side(side)
    return (gammaln(1 + d + 1 / c) - gammaln(1 + d)
            + np.log(own * d / (1 + c * d) + other / c))


def marginal_pmf(params: ModelParams, side: str, i):
    """Limit of ``N_i / n`` for the in- (``side="in"``) or out-degree."""
    c, d, own, _ = params.side(side)
    i_arr = np.asarray(i, dtype=float)
    if np.any(i_arr < 0) or np.any(i_arr != np.floor(i_arr)):
        raise ValueError("degree index must be a natural number")
    ii = np.maximum(i_arr, 1.0)
    pos = np.exp(gammaln(ii + d) - gammaln(ii + 1 + d + 1 / c) + _log_bracket(params, side))
    out = np.where(i_arr == 0, own / (1 + c * d), pos)
    return out if out.ndim else float(out)


def marginal_ccdf(params: ModelParams, side: str, i):
    """Limit of ``N_{>i} / n``."""
    c, d, _, _ = params.side(side)
    i_arr = np.asarray(i, dtype=float)
    if np.any(i_arr < 0):
        raise ValueError("degree index must be nonnegative")
    out = np.exp(gammaln(i_arr + 1 + d) - gammaln(i_arr + 1 + d + 1 / c)
                 + np.log(c) + _log_bracket(params, side))
    return out if out.ndim else float(out)


def marginal_pmf_in(params, i):
    return marginal_pmf(params, "in", i)


def marginal_pmf_out(params, j):
    return marginal_pmf(params, "out", j)


def marginal_ccdf_in(params, i):
    return marginal_ccdf(params, "in", i)


def marginal_ccdf_out(params, j):
    return marginal_ccdf(params, "out", j)


def tail_constant(params: ModelParams, side: str) -> float:
    """``C`` with ``N_{>x t^c}/ (n/t) -> C x^{-1/c}``; equals ``b(1)^{1/c}``."""
    c = params.side(side)[0]
    return float(np.exp(np.log(c) + _log_bracket(params, side)))


def truncation_index(params: ModelParams, side: str, remainder: float = 1e-10) -> int:
    """Smallest ``i`` with ``p_{>i} < remainder``."""
    if not remainder > 0:
        raise ValueError("remainder must be positive")
    lo, hi = 0, 1
    while marginal_ccdf(params, side, hi) >= remainder:
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if marginal_ccdf(params, side, mid) >= remainder:
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------- joint pmf

def _joint_integrand(params: ModelParams, i_idx: np.ndarray, j_idx: np.ndarray):
    """Integrand over ``u = e^{-T}`` in (0, 1), vector-valued over cells ``(i_idx, j_idx)``."""
    p = params
    ii = np.arange(int(i_idx.max()) + 1)
    jj = np.arange(int(j_idx.max()) + 1)

    def f(u):
        pin = u ** p.c_in
        pout = u ** p.c_out
        a0 = np.exp(log_nb_pmf(p.delta_in, pin, ii))           # J = 0: NB(delta_in)
        a1 = np.exp(log_nb_pmf(1 + p.delta_in, pin, ii - 1))   # J = 1: 1 + NB(1 + delta_in)
        b0 = np.exp(log_nb_pmf(1 + p.delta_out, pout, jj - 1))  # J = 0: 1 + NB(1 + delta_out)
        b1 = np.exp(log_nb_pmf(p.delta_out, pout, jj))          # J = 1: NB(delta_out)
        return p.alpha * a0[i_idx] * b0[j_idx] + p.gamma * a1[i_idx] * b1[j_idx]

    return f


def joint_pmf_cells(params: ModelParams, i_idx, j_idx, tol: float = 1e-10) -> np.ndarray:
    """Limit joint pmf ``p_ij`` at the given cells, integrated together (one adaptive pass)."""
    i_idx = np.atleast_1d(np.asarray(i_idx, dtype=np.int64))
    j_idx = np.atleast_1d(np.asarray(j_idx, dtype=np.int64))
    if np.any(i_idx < 0) or np.any(j_idx < 0):
        raise ValueError("cell indices must be nonnegative")
    f = _joint_integrand(params, i_idx, j_idx)
    # u = s^4 smooths the u^{c delta} cusp at the origin
    g = lambda s: 4.0 * s**3 * f(s**4)  # noqa: E731
    val, err = quad_vec(g, 0.0, 1.0, epsabs=tol * 1e-2, epsrel=0.0, norm="max", limit=20000)
    if err > tol:
        raise QuadratureError("joint pmf quadrature did not reach tolerance", err)
    return np.clip(val, 0.0, None)


def joint_pmf(params: ModelParams, i: int, j: int, tol: float = 1e-10) -> float:
    """``P((I, O) = (i, j))`` for the limit pair."""
    return float(joint_pmf_cells(params, [i], [j], tol)[0])


@dataclass(frozen=True)
class LimitLawTable:
    """Truncated tables of the marginal and joint limit laws.

    ``joint[i, j]`` holds ``p_ij`` for ``i + j <= k_max`` and 0 elsewhere.
    """

    params: ModelParams
    pin: np.ndarray
    pout: np.ndarray
    pin_ccdf: np.ndarray
    pout_ccdf: np.ndarray
    joint: np.ndarray
    k_max: int
    quadrature_tolerance: float
    checks: dict = field(default_factory=dict)

    @property
    def i_max(self) -> int:
        return self.pin.shape[0] - 1

    @property
    def j_max(self) -> int:
        return self.pout.shape[0] - 1

    @classmethod
    def build(cls, params: ModelParams, remainder: float = 1e-10, joint_remainder: float = 1e-7,
              quadrature_tolerance: float = 1e-10, k_max: int | None = None,
              max_index: int = 2_000_000, max_k: int = 800) -> "LimitLawTable":
        """Tables truncated where the tail remainder drops below ``remainder``.

        For tail indices close to 1 that point can lie beyond ``max_index``
        (marginals) or ``max_k`` (joint); the tables are then cut there and
        the remainder shows up in :meth:`consistency_report`.
        """
        i_max = min(truncation_index(params, "in", remainder), max_index)
        j_max = min(truncation_index(params, "out", remainder), max_index)
        ii = np.arange(i_max + 1)
        jj = np.arange(j_max + 1)
        if k_max is None:
            half = max(truncation_index(params, "in", joint_remainder / 2),
                       truncation_index(params, "out", joint_remainder / 2))
            k_max = min(2 * half, max_k)
        cells_i, cells_j = np.nonzero(np.add.outer(np.arange(k_max + 1), np.arange(k_max + 1)) <= k_max)
        vals = joint_pmf_cells(params, cells_i, cells_j, quadrature_tolerance)
        joint = np.zeros((k_max + 1, k_max + 1))
        joint[cells_i, cells_j] = vals
        table = cls(params, marginal_pmf(params, "in", ii), marginal_pmf(params, "out", jj),
                    marginal_ccdf(params, "in", ii), marginal_ccdf(params, "out", jj),
                    joint, int(k_max), quadrature_tolerance)
        table.checks.update(table.consistency_report())
        return table

    def consistency_report(self, rows: int = 20) -> dict:
        """Normalization, telescoping and marginalization residuals."""
        rows = min(rows, self.k_max // 2)
        tele_in = np.abs(self.pin_ccdf[:-1] - self.pin_ccdf[1:] - self.pin[1:]).max()
        tele_out = np.abs(self.pout_ccdf[:-1] - self.pout_ccdf[1:] - self.pout[1:]).max()
        ri = min(rows, self.i_max) + 1
        rj = min(rows, self.j_max) + 1
        marg_in = np.abs(self.joint[:ri].sum(axis=1) - self.pin[:ri]).max()
        marg_out = np.abs(self.joint[:, :rj].sum(axis=0) - self.pout[:rj]).max()
        return {
            "remainder_in": float(self.pin_ccdf[-1]),
            "remainder_out": float(self.pout_ccdf[-1]),
            "norm_in": abs(self.pin.sum() + self.pin_ccdf[-1] - 1.0),
            "norm_out": abs(self.pout.sum() + self.pout_ccdf[-1] - 1.0),
            "norm_joint": abs(self.joint.sum() - 1.0),
            "telescoping_in": float(tele_in),
            "telescoping_out": float(tele_out),
            "marginalization_in": float(marg_in),
            "marginalization_out": float(marg_out),
        }

    def write_marginals_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "p_in", "p_in_ccdf", "p_out", "p_out_ccdf"])
            for i in range(max(self.i_max, self.j_max) + 1):
                row = [i]
                row += [f"{self.pin[i]:.17g}", f"{self.pin_ccdf[i]:.17g}"] if i <= self.i_max else ["", ""]
                row += [f"{self.pout[i]:.17g}", f"{self.pout_ccdf[i]:.17g}"] if i <= self.j_max else ["", ""]
                w.writerow(row)

    def write_joint_csv(self, path, min_mass: float = 0.0) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "j", "p_ij"])
            for i, j in zip(*np.nonzero(self.joint > min_mass)):
                w.writerow([int(i), int(j), f"{self.joint[i, j]:.17g}"])


# ---------------------------------------------------------------- samplers

def sample_limit_pair(params: ModelParams, seed, size: int | None = None):
    """Draws of the limit pair ``(I, O)``; returns ``(I, O, J)`` arrays (or ints)."""
    rng = as_rng(seed)
    m = 1 if size is None else int(size)
    t = rng.standard_exponential(m)
    j = rng.random(m) < params.gamma
    p_in = np.exp(-params.c_in * t)
    p_out = np.exp(-params.c_out * t)
    x_shape = np.where(j, 1 + params.delta_in, params.delta_in)
    y_shape = np.where(j, params.delta_out, 1 + params.delta_out)
    x = rng.negative_binomial(x_shape, p_in) + j
    y = rng.negative_binomial(y_shape, p_out) + (~j)
    if size is None:
        return int(x[0]), int(y[0]), int(j[0])
    return x.astype(np.int64), y.astype(np.int64), j.astype(np.int64)


def sample_fixed_node_limit(params: ModelParams, v: int, seed, size: int | None = None):
    """Draws of ``(sigma_in e^{-c_in T_v/(c_in+c_out)} / W^c_in, sigma_out e^{-c_out T_v/(c_in+c_out)} / W^c_out)``.

    ``W ~ Exp(1)``; ``T_v`` is the ``v``-th birth time of a linear birth
    process with rate ``1/(c_in+c_out)`` per individual; for ``v >= 2`` the
    pair ``sigma`` is ``(Gamma(delta_in), Gamma(1+delta_out))`` with
    probability alpha and ``(Gamma(1+delta_in), Gamma(delta_out))`` with
    probability gamma; for ``v = 1`` it is ``(Gamma(1+delta_in), Gamma(1+delta_out))``.
    All ingredients are drawn independently.
    """
    if v < 1:
        raise ValueError("v must be >= 1")
    rng = as_rng(seed)
    m = 1 if size is None else int(size)
    p = params
    w = rng.standard_exponential(m)
    if v > 1:
        k = np.arange(1, v)
        t_v = (rng.standard_exponential((m, v - 1)) * (p.c_sum / k)).sum(axis=1)
        j = rng.random(m) < p.gamma
        s_in = rng.gamma(np.where(j, 1 + p.delta_in, p.delta_in))
        s_out = rng.gamma(np.where(j, p.delta_out, 1 + p.delta_out))
    else:
        t_v = np.zeros(m)
        s_in = rng.gamma(1 + p.delta_in, size=m)
        s_out = rng.gamma(1 + p.delta_out, size=m)
    x = s_in * np.exp(-p.c_in * t_v / p.c_sum) / w ** p.c_in
    y = s_out * np.exp(-p.c_out * t_v / p.c_sum) / w ** p.c_out
    if size is None:
        return float(x[0]), float(y[0])
    return x, y


# ---------------------------------------------------------------- tail measure


def _branch_constants(params: ModelParams, branch: int):
    """``(x power, y power, z power, log normalizer)`` of the density ``f_branch``."""
    p = params
    a = p.a
    if branch == 1:
        px, py = p.delta_in, p.delta_out - 1
        zp = 2 + p.iota_in + p.delta_in + a * p.delta_out
        lnorm = -np.log(p.c_in) - gammaln(1 + p.delta_in) - gammaln(p.delta_out)
    elif branch == 2:
        px, py = p.delta_in - 1, p.delta_out
        zp = 1 + a + p.iota_in + p.delta_in + a * p.delta_out
        lnorm = -np.log(p.c_in) - gammaln(p.delta_in) - gammaln(1 + p.delta_out)
    else:
        raise ValueError("branch must be 1 or 2")
    return px, py, zp, lnorm


def _log_inner_integral(x: np.ndarray, y: np.ndarray, zp: float, a: float) -> np.ndarray:
    """``log int_0^inf z^{-zp} exp(-x/z - y/z^a) dz`` by the trapezoid rule in ``u = log z``."""
    q = zp - 1.0  # integrand in u: exp(-q u - x e^{-u} - y e^{-a u})
    # locate the peak: q = x e^{-u} + a y e^{-a u}, right side decreasing in u
    lo = np.minimum(np.log(np.maximum(x, 1e-300) / q), np.log(np.maximum(a * y, 1e-300) / q) / a) - 1.0
    hi = np.maximum(np.log(np.maximum(x, 1e-300) / q), np.log(np.maximum(a * y, 1e-300) / q) / a) + 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        big = x * np.exp(-mid) + a * y * np.exp(-a * mid) > q
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
    peak = 0.5 * (lo + hi)
    # the peak width scales like 1/sqrt(q max(1, a)); trapezoid error decays geometrically in 1/step
    step = min(0.1, 0.4 / np.sqrt(q * max(1.0, a)))
    left = 8.0 / min(1.0, a)
    right = 45.0 / q + 2.0
    offsets = np.arange(-left, right + step, step)
    u = peak[:, None] + offsets[None, :]
    g = -q * u - x[:, None] * np.exp(-u) - y[:, None] * np.exp(-a * u)
    gmax = g.max(axis=1, keepdims=True)
    return gmax[:, 0] + np.log(np.exp(g - gmax).sum(axis=1) * step)


def tail_density(params: ModelParams, branch: int, x, y):
    """Lebesgue density ``f_1`` (branch 1, weight gamma) or ``f_2`` (branch 2, weight alpha)."""
    x_arr, y_arr = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any(x_arr <= 0) or np.any(y_arr <= 0):
        raise ValueError("tail densities are defined on (0, inf)^2")
    px, py, zp, lnorm = _branch_constants(params, branch)
    xf, yf = x_arr.ravel(), y_arr.ravel()
    out = np.empty(xf.shape)
    for s in range(0, xf.size, 4096):
        sl = slice(s, s + 4096)
        out[sl] = np.exp(lnorm + px * np.log(xf[sl]) + py * np.log(yf[sl])
                         + _log_inner_integral(xf[sl], yf[sl], zp, params.a))
    out = out.reshape(x_arr.shape)
    return out if out.ndim else float(out)


def limit_measure_density(params: ModelParams, x, y):
    """Density of ``gamma * V1 + alpha * V2``."""
    return params.gamma * tail_density(params, 1, x, y) + params.alpha * tail_density(params, 2, x, y)


def _gl_panels(lo: float, hi: float, width: float, order: int = 10):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, max(1, int(np.ceil((hi - lo) / width))) + 1)
    a, b = edges[:-1], edges[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    return (mid[:, None] + half[:, None] * nodes).ravel(), (half[:, None] * weights).ravel()


def tail_region_mass(params: ModelParams, x0: float, y0: float, panel: float = 1.0) -> float:
    """Mass of ``gamma V1 + alpha V2`` on ``(x0, inf] x (y0, inf]`` by 2-D quadrature of the densities.

    Coordinates ``x = x0 e^s`` and ``y = y0 e^t`` (or ``y = e^t`` over the
    real line when ``y0 = 0``) with composite Gauss-Legendre panels.
    """
    if x0 <= 0 or y0 < 0:
        raise ValueError("the rectangle must be bounded away from the origin: need x0 > 0, y0 >= 0")
    p = params
    # far out the integrand behaves like E[X^iota] x^{-iota} (X the Gamma factor of the
    # larger shape), so the cut-off must absorb that moment, which can be huge
    log_mx = gammaln(1 + p.delta_in + p.iota_in) - gammaln(1 + p.delta_in)
    log_my = gammaln(1 + p.delta_out + p.iota_out) - gammaln(1 + p.delta_out)
    s_end = (36.0 + max(log_mx, 0.0)) / p.iota_in
    t_end = (36.0 + max(log_my, 0.0)) / p.iota_out
    s_nodes, s_w = _gl_panels(0.0, s_end, panel)
    if y0 > 0:
        t_nodes, t_w = _gl_panels(0.0, t_end, panel)
        y = y0 * np.exp(t_nodes)
    else:
        lo = -36.0 / min(p.delta_out, 1.0) - 10.0 * p.a
        t_nodes, t_w = _gl_panels(lo, t_end, panel)
        y = np.exp(t_nodes)
    x = x0 * np.exp(s_nodes)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    dens = limit_measure_density(p, xx, yy)
    return float(np.einsum("i,j,ij->", s_w * x, t_w * y, dens))


def tail_region_mass_mixture(params: ModelParams, x0: float, y0: float, tol: float = 1e-12) -> float:
    """Same rectangle mass from the Pareto-mixture representation (1-D integral).

    With ``Z = e^{c_in T}`` Pareto(1/c_in), the limit measure is the image of
    ``(1/c_in) z^{-1/c_in - 1} dz`` under ``z -> (X z, Y z^a)`` with
    ``(X, Y)`` the Gamma pair of the switch branch, so
    ``mass = int (1/c_in) z^{-1/c_in-1} [gamma Q(1+d_in, x0/z) Q(d_out, y0/z^a)
    + alpha Q(d_in, x0/z) Q(1+d_out, y0/z^a)] dz`` with ``Q`` the Gamma survival function.
    """
    p = params

    def integrand(u):
        with np.errstate(over="ignore", divide="ignore"):
            xs = np.full(1, x0 * np.exp(-u))
            ys = np.full(1, y0 * np.exp(-p.a * u))
            g1 = gammaincc(1 + p.delta_in, xs) * gammaincc(p.delta_out, ys)
            g2 = gammaincc(p.delta_in, xs) * gammaincc(1 + p.delta_out, ys)
            w = p.gamma * g1 + p.alpha * g2
            # log space: w underflows exactly where e^{-iota u} would overflow
            return np.where(w > 0, np.exp(np.log(w) - p.iota_in * u), 0.0) / p.c_in

    centre = np.log(max(x0, 1e-12))
    total = 0.0
    for lo, hi in ((centre - 60.0, centre), (centre, centre + 60.0 / p.iota_in + 60.0)):
        val, err = quad_vec(integrand, lo, hi, epsabs=tol, epsrel=1e-12, limit=5000)
        total += float(val[0])
    return total
