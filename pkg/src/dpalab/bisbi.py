"""Birth-immigration (BI) processes and switched BI pairs.

A BI process with lifetime parameter ``lam`` and immigration ``theta``
jumps ``k -> k+1`` at rate ``lam * k + theta``.  Simulation is exact:
successive exponential holding times, no time grid.

Naming of the switched pair: the in-role process ``I`` has rates
``(1-p)(k + delta1)`` and the out-role process ``O`` has rates
``p(k + delta2)``.  The published joint density of the scaled limit labels
the same two constants delta_0 and delta_1; here ``delta1`` is the in-role
constant and ``delta2`` the out-role constant throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dpalab.rng import as_rng
from dpalab.special import nb_pmf  # noqa: F401  (re-exported: transient BI law)

DEFAULT_JUMP_BUDGET = 10**8


class JumpBudgetExceeded(RuntimeError):
    """A trajectory needed more jumps than the configured budget."""


@dataclass(frozen=True)
class BIParams:
    lam: float
    theta: float
    init: int = 0

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be positive, got {self.lam!r}")
        if not (self.theta >= 0 and math.isfinite(self.theta)):
            raise ValueError(f"theta must be nonnegative, got {self.theta!r}")
        if int(self.init) != self.init or self.init < 0:
            raise ValueError(f"init must be a natural number, got {self.init!r}")
        if self.theta == 0 and self.init < 1:
            raise ValueError("a pure birth process (theta = 0) must start from init >= 1")

    @property
    def limit_shape(self) -> float:
        """Shape of the Gamma(shape, 1) law of ``lim e^{-lam t} Z(t)``."""
        return self.init + self.theta / self.lam


@dataclass(frozen=True)
class SBIPairParams:
    p: float
    delta1: float
    delta2: float

    def __post_init__(self):
        if not (0 < self.p < 1):
            raise ValueError(f"p must lie in (0, 1), got {self.p!r}")
        if not (self.delta1 > 0 and self.delta2 > 0):
            raise ValueError("delta1 and delta2 must be positive")

    @property
    def lam_in(self) -> float:
        return 1.0 - self.p

    @property
    def lam_out(self) -> float:
        return self.p

    def in_process(self, init: int) -> BIParams:
        return BIParams(self.lam_in, self.lam_in * self.delta1, init)

    def out_process(self, init: int) -> BIParams:
        return BIParams(self.lam_out, self.lam_out * self.delta2, init)

    def default_t_large(self, growth: float = 1e3) -> float:
        return math.log(growth) / min(self.lam_in, self.lam_out)


def simulate_bi(params: BIParams, t_end: float, seed, return_jumps: bool = False,
                jump_budget: int = DEFAULT_JUMP_BUDGET):
    """One trajectory of the BI process, observed at ``t_end``.

    Returns ``Z(t_end)``, or ``(Z(t_end), jump_times)`` if ``return_jumps``.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    rng = as_rng(seed)
    z = int(params.init)
    t = 0.0
    jumps = []
    buf = rng.standard_exponential(256)
    pos = 0
    count = 0
    while True:
        rate = params.lam * z + params.theta
        if pos == buf.shape[0]:
            buf = rng.standard_exponential(256)
            pos = 0
        t += buf[pos] / rate
        pos += 1
        if t > t_end:
            break
        z += 1
        count += 1
        if count > jump_budget:
            raise JumpBudgetExceeded(f"more than {jump_budget} jumps before t={t_end}; reduce t_end")
        if return_jumps:
            jumps.append(t)
    return (z, np.asarray(jumps)) if return_jumps else z


def simulate_bi_batch(params: BIParams, t_end, size: int, seed,
                      jump_budget: int = DEFAULT_JUMP_BUDGET, init=None) -> np.ndarray:
    """``size`` independent copies of ``Z(t_end)``; ``t_end`` and ``init`` may be arrays.

    Vectorized over trajectories: each sweep advances every still-running
    trajectory by one holding time.
    """
    rng = as_rng(seed)
    t_end = np.broadcast_to(np.asarray(t_end, dtype=float), (size,)).copy()
    if np.any(t_end < 0):
        raise ValueError("t_end must be nonnegative")
    z = np.full(size, params.init, dtype=np.int64) if init is None else \
        np.broadcast_to(np.asarray(init, dtype=np.int64), (size,)).copy()
    if params.theta == 0 and np.any(z < 1):
        raise ValueError("a pure birth process must start from init >= 1")
    t = np.zeros(size)
    idx = np.arange(size)
    jumps = 0
    while idx.size:
        rate = params.lam * z[idx] + params.theta
        t[idx] += rng.standard_exponential(idx.size) / rate
        alive = t[idx] <= t_end[idx]
        idx = idx[alive]
        z[idx] += 1
        jumps += 1
        if jumps > jump_budget:
            raise JumpBudgetExceeded(f"more than {jump_budget} jumps in a trajectory; reduce t_end")
    return z


def simulate_bi_shotnoise(params: BIParams, t_end: float, seed, size: int | None = None,
                          jump_budget: int = DEFAULT_JUMP_BUDGET):
    """BI process started at 0 built as Poisson(theta) immigrants, each founding a Yule(lam) family.

    Returns one value, or an array of ``size`` values.
    """
    if params.init != 0:
        raise ValueError("the shot-noise construction starts from Z(0) = 0")
    if params.theta <= 0:
        raise ValueError("the shot-noise construction needs theta > 0")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    rng = as_rng(seed)
    m = 1 if size is None else int(size)
    counts = rng.poisson(params.theta * t_end, size=m)
    total = int(counts.sum())
    out = np.zeros(m, dtype=np.int64)
    if total:
        arrivals = rng.uniform(0.0, t_end, size=total)
        yule = BIParams(params.lam, 0.0, 1)
        fam = simulate_bi_batch(yule, t_end - arrivals, total, rng, jump_budget=jump_budget)
        owner = np.repeat(np.arange(m), counts)
        out = np.bincount(owner, weights=fam, minlength=m).astype(np.int64)
    return int(out[0]) if size is None else out


def simulate_sbi_pair(params: SBIPairParams, t_end: float, seed, size: int | None = None,
                      jump_budget: int = DEFAULT_JUMP_BUDGET):
    """Switched pair ``(I^(J)(t_end), O^(J)(t_end), J)`` with ``P(J = 1) = p``.

    ``J = 0`` starts the pair at (0, 1), ``J = 1`` at (1, 0); given ``J`` the
    two components evolve independently.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    rng = as_rng(seed)
    m = 1 if size is None else int(size)
    j = (rng.random(m) < params.p).astype(np.int64)
    i_vals = simulate_bi_batch(params.in_process(0), t_end, m, rng, jump_budget, init=j)
    o_vals = simulate_bi_batch(params.out_process(0), t_end, m, rng, jump_budget, init=1 - j)
    if size is None:
        return int(i_vals[0]), int(o_vals[0]), int(j[0])
    return i_vals, o_vals, j


def scaled_limit_sample(params: SBIPairParams, seed, size: int | None = None, t_large: float | None = None,
                        jump_budget: int = DEFAULT_JUMP_BUDGET):
    """Approximate draws of ``(e^{-(1-p)t} I^(J)(t), e^{-pt} O^(J)(t))`` at a large ``t``.

    Returns ``(x, y, J)``.  The default horizon makes the slower of the two
    growth factors equal to 1e3.
    """
    t = params.default_t_large() if t_large is None else float(t_large)
    try:
        i_vals, o_vals, j = simulate_sbi_pair(params, t, seed, size=1 if size is None else size,
                                              jump_budget=jump_budget)
    except JumpBudgetExceeded as exc:
        raise JumpBudgetExceeded(f"{exc}; try a smaller t_large than {t}") from None
    x = np.exp(-params.lam_in * t) * i_vals
    y = np.exp(-params.lam_out * t) * o_vals
    if size is None:
        return float(x[0]), float(y[0]), int(j[0])
    return x, y, j


def scaled_limit_density(params: SBIPairParams, x, y):
    """Joint density of the scaled pair limit: a two-component mixture of Gamma products."""
    from scipy.special import gammaln

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d1, d2, p = params.delta1, params.delta2, params.p
    lx, ly = np.log(x), np.log(y)
    j0 = np.exp((d1 - 1) * lx - x - gammaln(d1) + d2 * ly - y - gammaln(1 + d2))
    j1 = np.exp(d1 * lx - x - gammaln(1 + d1) + (d2 - 1) * ly - y - gammaln(d2))
    return (1 - p) * j0 + p * j1


def yule_pmf(k, t, lam: float = 1.0):
    """``P(Z(t) = k)`` for a Yule process from 1: geometric ``e^{-lam t}(1-e^{-lam t})^{k-1}``."""
    k = np.asarray(k)
    q = math.exp(-lam * t)
    return np.where(k >= 1, q * (1 - q) ** (k - 1.0), 0.0)
