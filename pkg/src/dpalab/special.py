"""Special functions shared by the simulators, limit laws and tests.

Log-gamma is taken from ``scipy.special.gammaln`` (relative error near
machine precision).  The regularized incomplete gamma function is computed
here by the classical series / continued-fraction split so the
distributional tests do not depend on the library routine they are
checked against.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

_EPS = 4 * np.finfo(float).eps  # a few ulps; 1e-16 is below double resolution
_TINY = 1e-300
_MAX_ITER = 2000


def log_gamma(x):
    return gammaln(x)


def _gamma_series(a, x):
    # P(a, x) = x^a e^-x / Gamma(a+1) * sum_n x^n / ((a+1)...(a+n))
    term = np.ones_like(x) / a
    total = term.copy()
    ap = a.copy()
    for _ in range(_MAX_ITER):
        ap = ap + 1.0
        term = term * x / ap
        total = total + term
        if np.all(np.abs(term) <= np.abs(total) * _EPS):
            break
    else:
        raise ArithmeticError("incomplete gamma series did not converge")
    return total * np.exp(-x + a * np.log(x) - gammaln(a))


def _gamma_contfrac(a, x):
    # Q(a, x) by the modified Lentz method
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) <= _EPS):
            break
    else:
        raise ArithmeticError("incomplete gamma continued fraction did not converge")
    return np.exp(-x + a * np.log(x) - gammaln(a)) * h


def gamma_cdf(shape, x):
    """Regularized lower incomplete gamma ``P(shape, x)``: the cdf of Gamma(shape, 1).

    Accepts scalars or arrays (broadcast).  Uses the power series for
    ``x < shape + 1`` and the continued fraction for the complement
    otherwise.
    """
    shape_arr, x_arr = np.broadcast_arrays(np.asarray(shape, dtype=float), np.asarray(x, dtype=float))
    if np.any(~(shape_arr > 0)):
        raise ValueError("gamma_cdf requires shape > 0")
    if np.any(~(x_arr >= 0)):
        raise ValueError("gamma_cdf requires x >= 0")
    out = np.zeros(x_arr.shape, dtype=float)
    pos = x_arr > 0
    lower = pos & (x_arr < shape_arr + 1.0)
    upper = pos & ~lower
    if np.any(lower):
        out[lower] = _gamma_series(shape_arr[lower], x_arr[lower])
    if np.any(upper):
        inf = upper & np.isinf(x_arr)
        out[inf] = 1.0
        fin = upper & ~inf
        if np.any(fin):
            out[fin] = 1.0 - _gamma_contfrac(shape_arr[fin], x_arr[fin])
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def gamma_sf(shape, x):
    """Upper regularized incomplete gamma ``Q(shape, x) = 1 - P(shape, x)``.

    Computed directly (not as ``1 - P``) on the continued-fraction branch
    so that small tail probabilities keep their relative accuracy.
    """
    shape_arr, x_arr = np.broadcast_arrays(np.asarray(shape, dtype=float), np.asarray(x, dtype=float))
    if np.any(~(shape_arr > 0)) or np.any(~(x_arr >= 0)):
        raise ValueError("gamma_sf requires shape > 0 and x >= 0")
    out = np.ones(x_arr.shape, dtype=float)
    pos = x_arr > 0
    lower = pos & (x_arr < shape_arr + 1.0)
    upper = pos & ~lower
    if np.any(lower):
        out[lower] = 1.0 - _gamma_series(shape_arr[lower], x_arr[lower])
    if np.any(upper):
        inf = upper & np.isinf(x_arr)
        out[inf] = 0.0
        fin = upper & ~inf
        if np.any(fin):
            out[fin] = _gamma_contfrac(shape_arr[fin], x_arr[fin])
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def log_nb_pmf(a, p, k):
    """Log of the NB(a, p) pmf, ``P(B = k)`` with generating function ``p^a (1-(1-p)s)^-a``.

    Vectorized; returns ``-inf`` for ``k < 0``.  ``p = 1`` puts all mass at 0.
    """
    a, p, k = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(p, dtype=float), np.asarray(k, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        kk = np.maximum(k, 0.0)
        out = (gammaln(a + kk) - gammaln(a) - gammaln(kk + 1.0)
               + a * np.log(p) + np.where(kk > 0, kk * np.log1p(-p), 0.0))
    out = np.where(k < 0, -np.inf, out)
    return out if out.ndim else float(out)


def nb_pmf(a, p, k):
    """Negative binomial pmf ``Gamma(a+k) / (Gamma(a) k!) p^a (1-p)^k`` evaluated in log space.

    >>> round(nb_pmf(1.0, 0.25, 2), 12)   # geometric: 0.25 * 0.75**2
    0.140625
    """
    a_arr = np.asarray(a, dtype=float)
    p_arr = np.asarray(p, dtype=float)
    k_arr = np.asarray(k)
    if np.any(~(a_arr > 0)):
        raise ValueError("nb_pmf requires a > 0")
    if np.any(~((p_arr > 0) & (p_arr <= 1))):
        raise ValueError("nb_pmf requires p in (0, 1]")
    if np.any(k_arr != np.floor(k_arr)) or np.any(k_arr < 0):
        raise ValueError("nb_pmf requires a natural number k")
    return np.exp(log_nb_pmf(a_arr, p_arr, k_arr))
