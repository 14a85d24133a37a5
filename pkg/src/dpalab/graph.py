"""Sequential generator of the directed preferential attachment graph.

Attachment sampling uses append-only "ballot" arrays holding one node id
per unit of in-degree (resp. out-degree).  With total degree ``n`` the
attachment law ``(D_v + delta) / ((1 + delta) n)`` is the mixture of a
uniform ballot draw (weight ``1/(1+delta)``) and a uniform node draw
(weight ``delta/(1+delta)``), so each step costs O(1).

Every step consumes exactly three uniforms from the state's generator
(coin, mixture branch, index), which makes chunked evolution identical to
a single long run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from dpalab.params import ModelParams
from dpalab.rng import as_rng

UNIFORMS_PER_STEP = 3
_CHUNK = 1 << 20


@numba.njit(cache=True)
def _evolve_kernel(n0, steps, u, alpha, w_in, w_out, in_deg, out_deg, in_ballot, out_ballot,
                   tails, heads, record):
    # w_in = 1/(1+delta_in): probability of a ballot (degree-proportional) draw
    n = n0
    for s in range(steps):
        u0 = u[3 * s]
        u1 = u[3 * s + 1]
        u2 = u[3 * s + 2]
        pick = int(u2 * n)
        if pick >= n:
            pick = n - 1
        new = n + 1
        if u0 < alpha:
            if u1 < w_in:
                v = in_ballot[pick]
            else:
                v = pick + 1
            in_deg[v - 1] += 1
            out_deg[new - 1] = 1
            in_ballot[n] = v
            out_ballot[n] = new
            if record:
                tails[n] = new
                heads[n] = v
        else:
            if u1 < w_out:
                v = out_ballot[pick]
            else:
                v = pick + 1
            out_deg[v - 1] += 1
            in_deg[new - 1] = 1
            out_ballot[n] = v
            in_ballot[n] = new
            if record:
                tails[n] = v
                heads[n] = new
        n = new
    return n


def _grow(arr: np.ndarray, size: int) -> np.ndarray:
    if arr.shape[0] >= size:
        return arr
    cap = max(size, 2 * arr.shape[0])
    out = np.zeros(cap, dtype=arr.dtype)
    out[: arr.shape[0]] = arr
    return out


@dataclass
class GraphState:
    """Degree bookkeeping of ``G(n)``; node ids are 1-based.

    Arrays are over-allocated; only the first ``n`` entries are live.
    Use :attr:`in_degrees` / :attr:`out_degrees` for trimmed views.
    """

    params: ModelParams
    rng: np.random.Generator
    n: int
    in_deg: np.ndarray
    out_deg: np.ndarray
    in_ballot: np.ndarray
    out_ballot: np.ndarray
    record_edges: bool = False
    tails: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    heads: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    alpha_steps: int = 0

    @property
    def in_degrees(self) -> np.ndarray:
        return self.in_deg[: self.n]

    @property
    def out_degrees(self) -> np.ndarray:
        return self.out_deg[: self.n]

    def _reserve(self, size: int) -> None:
        self.in_deg = _grow(self.in_deg, size)
        self.out_deg = _grow(self.out_deg, size)
        self.in_ballot = _grow(self.in_ballot, size)
        self.out_ballot = _grow(self.out_ballot, size)
        if self.record_edges:
            self.tails = _grow(self.tails, size)
            self.heads = _grow(self.heads, size)

    def copy(self) -> "GraphState":
        bitgen = type(self.rng.bit_generator)()
        bitgen.state = self.rng.bit_generator.state
        return GraphState(
            params=self.params, rng=np.random.Generator(bitgen), n=self.n,
            in_deg=self.in_deg.copy(), out_deg=self.out_deg.copy(),
            in_ballot=self.in_ballot.copy(), out_ballot=self.out_ballot.copy(),
            record_edges=self.record_edges, tails=self.tails.copy(), heads=self.heads.copy(),
            alpha_steps=self.alpha_steps,
        )


def new_graph(params: ModelParams, seed, record_edges: bool = False, capacity: int = 1024) -> GraphState:
    """``G(1)``: node 1 with a self loop, degrees (1, 1)."""
    if not isinstance(params, ModelParams):
        raise TypeError("params must be a ModelParams instance")
    cap = max(int(capacity), 1)
    state = GraphState(
        params=params, rng=as_rng(seed), n=1,
        in_deg=np.zeros(cap, dtype=np.int64), out_deg=np.zeros(cap, dtype=np.int64),
        in_ballot=np.zeros(cap, dtype=np.int64), out_ballot=np.zeros(cap, dtype=np.int64),
        record_edges=record_edges,
        tails=np.zeros(cap if record_edges else 0, dtype=np.int64),
        heads=np.zeros(cap if record_edges else 0, dtype=np.int64),
    )
    state.in_deg[0] = state.out_deg[0] = 1
    state.in_ballot[0] = state.out_ballot[0] = 1
    if record_edges:
        state.tails[0] = state.heads[0] = 1
    return state


def _advance(state: GraphState, steps: int) -> GraphState:
    p = state.params
    state._reserve(state.n + steps)
    done = 0
    while done < steps:
        m = min(_CHUNK, steps - done)
        u = state.rng.random(UNIFORMS_PER_STEP * m)
        state.alpha_steps += int(np.count_nonzero(u[0::3] < p.alpha))
        state.n = int(_evolve_kernel(
            state.n, m, u, p.alpha, 1.0 / (1.0 + p.delta_in), 1.0 / (1.0 + p.delta_out),
            state.in_deg, state.out_deg, state.in_ballot, state.out_ballot,
            state.tails, state.heads, state.record_edges,
        ))
        done += m
    return state


def step(state: GraphState) -> GraphState:
    """Append node ``n+1`` and one edge (in place; the state is returned)."""
    if state.n >= np.iinfo(np.int64).max - 1:
        raise OverflowError("node count overflow")
    return _advance(state, 1)


def evolve(state: GraphState, target_n: int) -> GraphState:
    """Apply ``target_n - state.n`` steps in place."""
    target_n = int(target_n)
    if target_n < state.n:
        raise ValueError(f"target_n={target_n} is smaller than the current size n={state.n}")
    if target_n > state.n:
        _advance(state, target_n - state.n)
    return state


def generate(params: ModelParams, n: int, seed, record_edges: bool = False) -> GraphState:
    """Convenience: ``evolve(new_graph(params, seed), n)`` with exact preallocation."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return evolve(new_graph(params, seed, record_edges=record_edges, capacity=n), n)


def degree_pair(state: GraphState, v: int) -> tuple[int, int]:
    """``(D_v^in(n), D_v^out(n))`` for a 1-based node id ``v``."""
    if not (1 <= v <= state.n):
        raise ValueError(f"node id {v} out of range 1..{state.n}")
    return int(state.in_deg[v - 1]), int(state.out_deg[v - 1])


def write_edge_list(state: GraphState, path) -> None:
    """Write ``tail<TAB>head`` lines; line 1 is the self loop of node 1."""
    if not state.record_edges:
        raise ValueError("edge recording was not enabled for this graph")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t, h in zip(state.tails[: state.n].tolist(), state.heads[: state.n].tolist()):
            fh.write(f"{t}\t{h}\n")


def transition_probabilities(params: ModelParams, in_deg, out_deg) -> tuple[np.ndarray, np.ndarray]:
    """Exact one-step probabilities from a degree configuration.

    Returns ``(p_in, p_out)`` where ``p_in[v]`` is the probability that node
    ``v+1`` gains an in-edge (alpha-scheme) and ``p_out[v]`` that it gains an
    out-edge (gamma-scheme).
    """
    din = np.asarray(in_deg, dtype=float)
    dout = np.asarray(out_deg, dtype=float)
    n = din.shape[0]
    p_in = params.alpha * (din + params.delta_in) / ((1.0 + params.delta_in) * n)
    p_out = params.gamma * (dout + params.delta_out) / ((1.0 + params.delta_out) * n)
    return p_in, p_out


def node_degree_chain(params: ModelParams, v: int, n: int, size: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``(D_v^in(n), D_v^out(n))`` for one fixed node, ``size`` independent copies.

    The degree pair of a single node is itself a Markov chain: at the step
    taking the graph from ``m`` to ``m+1`` nodes it gains an in-edge with
    probability ``a_in/m`` and an out-edge with probability ``a_out/m``,
    where ``a_in = alpha (D_in + delta_in) / (1 + delta_in)`` and likewise for
    out.  Between events the survival function is a ratio of gamma
    functions, so the next event step is found by inversion (bisection in
    log-gamma space) instead of stepping through all ``n`` sizes.
    """
    from scipy.special import gammaln

    if not (1 <= v <= n):
        raise ValueError(f"need 1 <= v <= n, got v={v}, n={n}")
    rng = as_rng(seed)
    p = params
    if v == 1:
        din = np.ones(size, dtype=np.int64)
        dout = np.ones(size, dtype=np.int64)
    else:
        heads = rng.random(size) < p.alpha
        # alpha-scheme birth: newborn points out (0, 1); gamma-scheme: (1, 0)
        din = np.where(heads, 0, 1).astype(np.int64)
        dout = np.where(heads, 1, 0).astype(np.int64)
    m = np.full(size, v, dtype=np.int64)
    active = m < n
    k_in = p.alpha / (1.0 + p.delta_in)
    k_out = p.gamma / (1.0 + p.delta_out)
    while np.any(active):
        idx = np.nonzero(active)[0]
        mm = m[idx].astype(float)
        a_in = k_in * (din[idx] + p.delta_in)
        a_out = k_out * (dout[idx] + p.delta_out)
        big_a = a_in + a_out
        u = rng.random(idx.size)
        certain = mm - big_a <= 1e-12
        base = gammaln(np.where(certain, 1.0, mm - big_a)) - gammaln(mm)
        log_u = np.log(u)

        def log_surv(x):
            return gammaln(x - big_a) - gammaln(x) - base

        lo = mm.copy()
        hi = np.full(idx.size, float(n))
        none = (~certain) & (log_surv(hi) >= log_u)
        search = (~certain) & (~none)
        while True:
            open_ = search & (hi - lo > 1)
            if not np.any(open_):
                break
            mid = np.floor((lo + hi) / 2)
            ok = log_surv(mid) >= log_u
            lo = np.where(open_ & ok, mid, lo)
            hi = np.where(open_ & ~ok, mid, hi)
        event_step = np.where(certain, mm, lo)
        fired = ~none
        is_in = rng.random(idx.size) * big_a < a_in
        fi = idx[fired]
        din[fi] += is_in[fired]
        dout[fi] += ~is_in[fired]
        m[fi] = event_step[fired].astype(np.int64) + 1
        m[idx[none]] = n
        active = m < n
    return din, dout
