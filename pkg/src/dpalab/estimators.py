"""Hill estimators, intermediate sequences and tail empirical measures of degree sequences."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from dpalab import graph, limits
from dpalab.params import ModelParams
from dpalab.rng import replicate_rng


class DegenerateTailError(ArithmeticError):
    """The ``(k+1)``-st largest positive degree does not exist (too few positive entries)."""


@dataclass(frozen=True)
class HillResult:
    k: int
    n: int
    estimate: float
    target: float
    side: str
    replicate: int = 0
    excluded_zeros: int = 0


def _positive_sorted_desc(degrees) -> tuple[np.ndarray, int]:
    d = np.asarray(degrees)
    if d.ndim != 1:
        raise ValueError("degrees must be a one-dimensional sequence")
    if np.any(d < 0):
        raise ValueError("degrees must be nonnegative")
    pos = d[d > 0]
    return np.sort(pos, kind="stable")[::-1], int(d.size - pos.size)


def _check_k(k, n: int) -> int:
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the sample size n={n}")
    return int(k)


def hill(degrees, k: int) -> float:
    """``(1/k) sum_{i<=k} log(D_(i) / D_(k+1))`` over the positive entries, descending order."""
    d = np.asarray(degrees)
    k = _check_k(k, d.size)
    top, _ = _positive_sorted_desc(d)
    if top.size < k + 1:
        raise DegenerateTailError(f"D_(k+1) = 0: only {top.size} positive entries for k={k}")
    logs = np.log(top[: k + 1].astype(float))
    return float(np.mean(logs[:k] - logs[k]))


def hill_integral(degrees, k: int) -> float:
    """The same estimate computed as ``int_1^inf nu(y, inf] dy / y``.

    ``nu`` is the empirical measure of ``D_v / D_(k+1)`` with mass ``1/k``
    per point; the step function is integrated exactly between its
    breakpoints.
    """
    d = np.asarray(degrees)
    k = _check_k(k, d.size)
    top, _ = _positive_sorted_desc(d)
    if top.size < k + 1:
        raise DegenerateTailError(f"D_(k+1) = 0: only {top.size} positive entries for k={k}")
    ratios = top[:k].astype(float) / float(top[k])
    # breakpoints 1 = y_0 <= y_1 <= ... ; on (y_j, y_{j+1}) the count of points above y is k - j
    breaks = np.concatenate(([1.0], ratios[::-1]))
    counts = np.arange(k, 0, -1)
    return float(np.sum(counts * np.diff(np.log(breaks))) / k)


def kn_default(n: int) -> int:
    """``ceil(sqrt(n ln n))`` clamped to ``[1, n - 2]``."""
    if n < 3:
        raise ValueError("n must be >= 3")
    return int(min(max(math.ceil(math.sqrt(n * math.log(n))), 1), n - 2))


def scaling_b(params: ModelParams, side: str, t):
    """``b(t) = [c Gamma(1+delta+1/c)/Gamma(1+delta) (own delta/(1+c delta) + other/c)]^c t^c``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    c = params.side(side)[0]
    out = limits.tail_constant(params, side) ** c * t**c
    return out if out.ndim else float(out)


@dataclass
class TailMeasure1D:
    """``y -> (1/k) #{v : D_v / scale > y}`` for ``y > 0``."""

    k: int
    scale: float
    scaled_points: np.ndarray  # ascending
    normalization: str

    def __call__(self, y):
        y_arr = np.asarray(y, dtype=float)
        if np.any(y_arr <= 0):
            raise ValueError("the tail measure is evaluated at y > 0")
        above = self.scaled_points.size - np.searchsorted(self.scaled_points, y_arr, side="right")
        out = above / self.k
        return out if np.ndim(out) else float(out)


def tail_empirical_1d(degrees, side: str, params: ModelParams, k: int,
                      normalization: str = "b") -> TailMeasure1D:
    """Tail empirical measure of one degree sequence.

    ``normalization="b"`` divides by ``b(n/k)``; ``"order"`` divides by the
    order statistic ``D_(k+1)`` instead (then the measure of ``(1, inf]`` is
    exactly 1 without ties at the threshold).  Zero degrees are dropped.
    """
    d = np.asarray(degrees)
    n = d.size
    k = _check_k(k, n)
    top, _ = _positive_sorted_desc(d)
    if top.size < k + 1:
        raise DegenerateTailError(f"D_(k+1) = 0: only {top.size} positive entries for k={k}")
    if normalization == "b":
        scale = scaling_b(params, side, n / k)
    elif normalization == "order":
        scale = float(top[k])
    else:
        raise ValueError("normalization must be 'b' or 'order'")
    return TailMeasure1D(k, float(scale), np.sort(top / scale), normalization)


@dataclass
class TailGrid:
    """Joint tail rectangle masses ``(x, inf] x (y, inf]`` on a grid, empirical and limiting."""

    scale_x: float
    scale_y: float
    xs: np.ndarray
    ys: np.ndarray
    empirical_mass: np.ndarray  # [len(xs), len(ys)]
    theoretical_mass: np.ndarray
    k: int
    n: int

    def relative_deviation(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(self.empirical_mass - self.theoretical_mass) / self.theoretical_mass

    def rows(self):
        for a, x in enumerate(self.xs):
            for b, y in enumerate(self.ys):
                yield float(x), float(y), float(self.empirical_mass[a, b]), float(self.theoretical_mass[a, b])

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "empirical_mass", "theoretical_mass"])
            for row in self.rows():
                w.writerow([f"{v:.17g}" for v in row])


def joint_tail_counts(in_deg, out_deg, x_thresholds, y_thresholds) -> np.ndarray:
    """``#{v : D_in > x, D_out > y}`` for every threshold pair."""
    din = np.asarray(in_deg, dtype=float)
    dout = np.asarray(out_deg, dtype=float)
    out = np.empty((len(x_thresholds), len(y_thresholds)), dtype=np.int64)
    for a, xt in enumerate(x_thresholds):
        sel = dout[din > xt]
        sel.sort()
        out[a] = sel.size - np.searchsorted(sel, np.asarray(y_thresholds, dtype=float), side="right")
    return out


def tail_empirical_2d(in_deg, out_deg, params: ModelParams, k: int, xs, ys,
                      theoretical: bool = True) -> TailGrid:
    """``(1/k) N_{>(n/k)^c_in x, >(n/k)^c_out y}(n)`` on the grid, next to ``tail_region_mass``."""
    din = np.asarray(in_deg)
    n = din.size
    k = _check_k(k, n)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.any(xs <= 0) or np.any(ys < 0):
        raise ValueError("grid needs x > 0 and y >= 0")
    sx = (n / k) ** params.c_in
    sy = (n / k) ** params.c_out
    emp = joint_tail_counts(din, out_deg, xs * sx, ys * sy) / k
    theo = np.full(emp.shape, np.nan)
    if theoretical:
        for a, x in enumerate(xs):
            for b, y in enumerate(ys):
                theo[a, b] = limits.tail_region_mass(params, float(x), float(y))
    return TailGrid(sx, sy, xs, ys, emp, theo, k, n)


@dataclass
class HillExperiment:
    params: ModelParams
    results: list = field(default_factory=list)

    def estimates(self, n: int, side: str) -> np.ndarray:
        return np.array([r.estimate for r in self.results if r.n == n and r.side == side])

    def summary(self) -> list[dict]:
        rows = []
        for n in sorted({r.n for r in self.results}):
            for side in ("in", "out"):
                est = self.estimates(n, side)
                target = self.params.c_in if side == "in" else self.params.c_out
                q1, med, q3 = np.quantile(est, [0.25, 0.5, 0.75])
                rows.append({"n": n, "side": side, "k": kn_default(n), "median": float(med),
                             "iqr": float(q3 - q1), "q1": float(q1), "q3": float(q3),
                             "median_abs_error": float(np.median(np.abs(est - target))),
                             "target": target, "replicates": int(est.size)})
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "replicate", "side", "k", "H"])
            for r in self.results:
                w.writerow([r.n, r.replicate, r.side, r.k, f"{r.estimate:.17g}"])


def hill_replicate(params: ModelParams, n_list, seed, replicate: int, k=None) -> list[HillResult]:
    """One graph grown through every ``n`` in ``n_list``; Hill estimates at each size."""
    state = graph.new_graph(params, replicate_rng(seed, replicate), capacity=int(max(n_list)))
    out = []
    for n in sorted(int(m) for m in n_list):
        graph.evolve(state, n)
        kk = kn_default(n) if k is None else int(k)
        for side, deg, target in (("in", state.in_degrees, params.c_in),
                                  ("out", state.out_degrees, params.c_out)):
            out.append(HillResult(kk, n, hill(deg, kk), target, side, replicate,
                                  int(np.count_nonzero(deg == 0))))
    return out


def hill_consistency_experiment(params: ModelParams, n_list, replicates: int, seed, k=None,
                                mapper=map) -> HillExperiment:
    """Hill estimates ``H_{k_n,n}`` for both sides over replicates and sizes.

    Each replicate is a single graph evolved through the sizes in
    ``n_list`` (sizes within a replicate are nested, replicates are
    independent).  ``mapper`` may be a pool's ordered ``map``.
    """
    n_list = sorted(int(n) for n in n_list)
    if n_list[0] < 1000:
        raise ValueError("each n must be >= 1000")
    exp = HillExperiment(params)
    jobs = mapper(_hill_job, [(params, n_list, seed, r, k) for r in range(replicates)])
    for res in jobs:
        exp.results.extend(res)
    return exp


def _hill_job(args):
    return hill_replicate(*args)
