"""Continuous-time embedding of the degree chain into switched BI pairs.

Every node ``v`` carries two exponential clocks.  The in-clock rings at
rate ``c_in/(c_in+c_out) (I_v + delta_in)`` and the out-clock at
``c_out/(c_in+c_out) (O_v + delta_out)``.  Each ring increments the
corresponding component and gives birth to a new pair: an in-ring
(``J = 0``) births the pair (0, 1), an out-ring (``J = 1``) births (1, 0).
The state just after the ``(n-1)``-st ring has the law of the degree
sequence of ``G(n)``.

Clocks hold one pending deadline each.  After a ring only the winning
clock is re-armed (its rate grew by its own linear increment); by
memorylessness no other deadline needs resampling.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass

import numpy as np

from dpalab.params import ModelParams
from dpalab.rng import as_rng, replicate_rng


@dataclass
class EmbeddingRun:
    """Result of one embedding run stopped at ``T_n``.

    Arrays are indexed by ``v - 1``.  ``switch[0]`` is -1 (node 1 has no
    switch); ``winner[v-1]`` is the pair whose clock rang at ``T_v``
    (0 for node 1).
    """

    in_deg: np.ndarray
    out_deg: np.ndarray
    birth_times: np.ndarray
    switch: np.ndarray
    winner: np.ndarray

    @property
    def n(self) -> int:
        return int(self.in_deg.shape[0])

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["v", "T_v", "J_v", "winner", "I_v", "O_v"])
            for v in range(self.n):
                w.writerow([v + 1, repr(float(self.birth_times[v])), int(self.switch[v]),
                            int(self.winner[v]), int(self.in_deg[v]), int(self.out_deg[v])])


def clock_rates(params: ModelParams) -> tuple[float, float]:
    """Per-unit rate multipliers ``(c_in/(c_in+c_out), c_out/(c_in+c_out))``."""
    s = params.c_sum
    return params.c_in / s, params.c_out / s


def run_embedding(params: ModelParams, n: int, seed) -> EmbeddingRun:
    """Event-driven simulation up to the birth of pair ``n``, using a binary heap of deadlines."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_rng(seed)
    k_in, k_out = clock_rates(params)
    d_in, d_out = params.delta_in, params.delta_out
    in_deg = np.zeros(n, dtype=np.int64)
    out_deg = np.zeros(n, dtype=np.int64)
    births = np.zeros(n)
    switch = np.full(n, -1, dtype=np.int64)
    winner = np.zeros(n, dtype=np.int64)
    in_deg[0] = out_deg[0] = 1

    buf = rng.standard_exponential(4096)
    pos = 0

    def expo():
        nonlocal buf, pos
        if pos == buf.shape[0]:
            buf = rng.standard_exponential(4096)
            pos = 0
        pos += 1
        return buf[pos - 1]

    # heap entries: (deadline, pair index, kind) with kind 0 = in-clock, 1 = out-clock
    heap = [(expo() / (k_in * (1 + d_in)), 0, 0), (expo() / (k_out * (1 + d_out)), 0, 1)]
    heapq.heapify(heap)
    for born in range(1, n):
        t, v, kind = heapq.heappop(heap)
        if kind == 0:
            in_deg[v] += 1
            heapq.heappush(heap, (t + expo() / (k_in * (in_deg[v] + d_in)), v, 0))
            i0, o0 = 0, 1
        else:
            out_deg[v] += 1
            heapq.heappush(heap, (t + expo() / (k_out * (out_deg[v] + d_out)), v, 1))
            i0, o0 = 1, 0
        in_deg[born], out_deg[born] = i0, o0
        births[born] = t
        switch[born] = kind
        winner[born] = v + 1
        heapq.heappush(heap, (t + expo() / (k_in * (i0 + d_in)), born, 0))
        heapq.heappush(heap, (t + expo() / (k_out * (o0 + d_out)), born, 1))
    return EmbeddingRun(in_deg, out_deg, births, switch, winner)


def run_embedding_batch(params: ModelParams, n: int, replicates: int, seed):
    """Vectorized embedding for small ``n``: ``replicates`` independent runs at once.

    Same clock semantics as :func:`run_embedding`.  Returns
    ``(in_deg, out_deg, birth_times, switch)`` as ``(replicates, n)`` arrays.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_rng(seed)
    k = np.array(clock_rates(params))
    delta = np.array([params.delta_in, params.delta_out])
    r = int(replicates)
    deg = np.zeros((r, n, 2), dtype=np.int64)
    deg[:, 0, :] = 1
    deadline = np.full((r, n, 2), np.inf)
    deadline[:, 0, :] = rng.standard_exponential((r, 2)) / (k * (1 + delta))
    births = np.zeros((r, n))
    switch = np.full((r, n), -1, dtype=np.int64)
    rows = np.arange(r)
    for born in range(1, n):
        flat = deadline[:, :born, :].reshape(r, 2 * born)
        w = np.argmin(flat, axis=1)
        t = flat[rows, w]
        v, kind = w // 2, w % 2
        deg[rows, v, kind] += 1
        deadline[rows, v, kind] = t + rng.standard_exponential(r) / (k[kind] * (deg[rows, v, kind] + delta[kind]))
        deg[rows, born, 0] = kind
        deg[rows, born, 1] = 1 - kind
        deadline[rows, born, :] = t[:, None] + rng.standard_exponential((r, 2)) / (k * (deg[rows, born, :] + delta))
        births[:, born] = t
        switch[:, born] = kind
    return deg[:, :, 0], deg[:, :, 1], births, switch


def jump_statistics(params: ModelParams, n: int, replicates: int, seed) -> dict:
    """Empirical laws of the inter-birth times ``tau_k`` and switches ``J_k``.

    Returns per-index arrays for ``k = 2..n``: mean/variance of ``tau_k``,
    the target mean ``(c_in + c_out)/(k - 1)``, the frequency of ``J_k = 1``
    (target ``gamma``), and the sample correlation of ``(J_k, tau_k)``.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    _, _, births, switch = run_embedding_batch(params, n, replicates, seed)
    tau = np.diff(births, axis=1)
    jj = switch[:, 1:].astype(float)
    ks = np.arange(2, n + 1)
    tc = tau - tau.mean(axis=0)
    jc = jj - jj.mean(axis=0)
    denom = np.sqrt((tc**2).sum(axis=0) * (jc**2).sum(axis=0))
    corr = np.where(denom > 0, (tc * jc).sum(axis=0) / np.where(denom > 0, denom, 1), 0.0)
    return {
        "k": ks,
        "tau": tau,
        "switch": switch[:, 1:],
        "tau_mean": tau.mean(axis=0),
        "tau_var": tau.var(axis=0, ddof=1),
        "tau_mean_target": params.c_sum / (ks - 1),
        "p_switch": jj.mean(axis=0),
        "p_switch_target": np.full(ks.shape, params.gamma),
        "corr": corr,
    }


def fixed_node_scaled(params: ModelParams, v: int, n: int, replicates: int, seed,
                      method: str = "chain") -> tuple[np.ndarray, np.ndarray]:
    """Replicated ``(D_v^in(n) / n^c_in, D_v^out(n) / n^c_out)``.

    ``method`` selects the sampler: ``"chain"`` (the exact single-node
    degree chain, fast for large ``n``), ``"graph"`` (full graph
    generation) or ``"embedding"`` (the continuous-time construction).
    """
    from dpalab import graph

    if not (1 <= v <= n):
        raise ValueError(f"need 1 <= v <= n, got v={v}, n={n}")
    if n ** params.c_in < 10:
        import warnings
        warnings.warn(f"n^c_in = {n ** params.c_in:.2f} < 10: scaled degrees are far from their limit")
    if method == "chain":
        din, dout = graph.node_degree_chain(params, v, n, replicates, seed)
    elif method == "graph":
        din = np.empty(replicates, dtype=np.int64)
        dout = np.empty(replicates, dtype=np.int64)
        for r in range(replicates):
            g = graph.generate(params, n, replicate_rng(seed, r))
            din[r], dout[r] = graph.degree_pair(g, v)
    elif method == "embedding":
        din = np.empty(replicates, dtype=np.int64)
        dout = np.empty(replicates, dtype=np.int64)
        for r in range(replicates):
            run = run_embedding(params, n, replicate_rng(seed, r))
            din[r], dout[r] = run.in_deg[v - 1], run.out_deg[v - 1]
    else:
        raise ValueError(f"unknown method {method!r}")
    return din / n ** params.c_in, dout / n ** params.c_out


def max_degree_scaled(params: ModelParams, n: int, replicates: int, seed) -> dict:
    """Replicated scaled maximal degrees with the maximizing node ids and node 1's scaled degrees."""
    from dpalab import graph

    out = {key: np.empty(replicates) for key in ("max_in", "max_out", "node1_in", "node1_out")}
    out["argmax_in"] = np.empty(replicates, dtype=np.int64)
    out["argmax_out"] = np.empty(replicates, dtype=np.int64)
    s_in, s_out = n ** params.c_in, n ** params.c_out
    for r in range(replicates):
        g = graph.generate(params, n, replicate_rng(seed, r))
        din, dout = g.in_degrees, g.out_degrees
        out["argmax_in"][r] = int(np.argmax(din)) + 1
        out["argmax_out"][r] = int(np.argmax(dout)) + 1
        out["max_in"][r] = din.max() / s_in
        out["max_out"][r] = dout.max() / s_out
        out["node1_in"][r] = din[0] / s_in
        out["node1_out"][r] = dout[0] / s_out
    return out
