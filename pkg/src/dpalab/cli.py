"""Command line interface: ``dpalab <subcommand> [options]``.

Every option can also be given in a ``key = value`` file passed with
``--config``; command-line flags override the file.  Output files go to
``--out`` (default: ``$DPALAB_OUTPUT_DIR`` or the working directory).

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 selftest failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from dpalab import __version__, bisbi, embedding, estimators, graph, limits, stats_tests
from dpalab.io import (ConfigError, ResultWriter, default_output_dir, parse_count, parse_count_list,
                       parse_float_list, read_config)
from dpalab.params import ModelParams
from dpalab.special import gamma_cdf

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SELFTEST = 0, 2, 3, 4


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _float(text) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"not a number: {text!r}") from None


def _optional_count(text):
    return None if text in (None, "", "none", "auto") else parse_count(text)


MODEL = {
    "alpha": (_float, 0.5, "probability of the alpha-scheme (new node -> existing node)"),
    "delta_in": (_float, 1.0, "in-degree offset delta_in > 0"),
    "delta_out": (_float, 1.0, "out-degree offset delta_out > 0"),
}
SEED = {"seed": (parse_count, 1, "master seed (natural number)")}

OPTIONS = {
    "generate": {**MODEL, **SEED,
                 "n": (parse_count, 100_000, "number of nodes"),
                 "degrees": (_bool, False, "also write per-node degrees"),
                 "edges": (_bool, False, "also write the edge list")},
    "embed": {**MODEL, **SEED,
              "n": (parse_count, 1000, "number of pairs born")},
    "bi-sim": {**SEED,
               "lam": (_float, 1.0, "birth rate per individual"),
               "theta": (_float, 1.0, "immigration rate"),
               "init": (parse_count, 0, "initial value"),
               "growth": (_float, 1000.0, "observe at t with e^{lam t} = growth"),
               "replicates": (parse_count, 10_000, "number of trajectories"),
               "method": (str, "direct", "direct or shotnoise")},
    "limits": {**MODEL, **SEED,
               "table": (_bool, False, "write the limit pmf tables"),
               "pair_samples": (parse_count, 0, "draws of the limit pair to write"),
               "fixed_node": (parse_count, 0, "node id v for fixed-node limit draws (0 = none)"),
               "replicates": (parse_count, 10_000, "draws for --fixed-node")},
    "hill": {**MODEL, **SEED,
             "n": (parse_count_list, [10_000, 100_000, 1_000_000], "comma-separated sizes"),
             "replicates": (parse_count, 50, "graphs per size"),
             "k": (_optional_count, None, "order statistics used (default ceil(sqrt(n ln n)))")},
    "tailmeasure": {**MODEL, **SEED,
                    "n": (parse_count, 1_000_000, "number of nodes"),
                    "k": (_optional_count, None, "intermediate k (default ceil(sqrt(n ln n)))"),
                    "x": (parse_float_list, [1.0, 2.0, 3.0, 4.0, 6.0], "x grid (in-degree, scaled)"),
                    "y": (parse_float_list, [0.0, 1.0, 2.0, 3.0, 4.0, 6.0], "y grid (out-degree, scaled)")},
    "concentration": {**MODEL, **SEED,
                      "n": (parse_count_list, [10_000, 100_000, 1_000_000], "comma-separated sizes"),
                      "replicates": (parse_count, 30, "graphs per size")},
    "selftest": {},
}

HELP = {
    "generate": "grow one graph and write its degree census",
    "embed": "run the continuous-time embedding up to n births",
    "bi-sim": "simulate a birth-immigration process and compare with its Gamma limit",
    "limits": "tabulate limit laws and draw from limit samplers",
    "hill": "Hill estimator consistency over sizes and replicates",
    "tailmeasure": "joint tail empirical measure against the limit measure",
    "concentration": "fluctuations of exceedance counts across replicates",
    "selftest": "fast internal consistency checks",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpalab", description="Directed preferential attachment laboratory.")
    parser.add_argument("--version", action="version", version=f"dpalab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        sp = sub.add_parser(name, help=HELP[name], description=HELP[name])
        sp.add_argument("--config", help="key = value file; flags override it")
        sp.add_argument("--out", help="output directory (default $DPALAB_OUTPUT_DIR or .)")
        sp.add_argument("--jobs", default=None, help="worker processes for replicate loops (default 1)")
        for key, (conv, default, text) in opts.items():
            flag = "--" + key.replace("_", "-")
            if conv is _bool:
                sp.add_argument(flag, dest=key, action="store_const", const=True, default=None, help=text)
            else:
                sp.add_argument(flag, dest=key, default=None, help=f"{text} (default {default})")
    return parser


def resolve_config(command: str, ns: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    opts = OPTIONS[command]
    from_file = read_config(ns.config) if ns.config else {}
    unknown = set(from_file) - set(opts) - {"out", "jobs"}
    if unknown:
        raise ConfigError(f"{ns.config}: unknown key(s) for {command}: {', '.join(sorted(unknown))}")
    cfg = {}
    for key, (conv, default, _) in opts.items():
        raw = getattr(ns, key)
        if raw is None:
            raw = from_file.get(key)
        try:
            cfg[key] = default if raw is None else conv(raw)
        except ConfigError as exc:
            raise ConfigError(f"option {key}: {exc}") from None
    cfg["_out"] = ns.out or from_file.get("out") or str(default_output_dir())
    jobs = parse_count(ns.jobs if ns.jobs is not None else from_file.get("jobs", 1))
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    cfg["_jobs"] = jobs
    return cfg


def _model(cfg) -> ModelParams:
    return ModelParams(cfg["alpha"], cfg["delta_in"], cfg["delta_out"])


def _echo(cfg) -> dict:
    return {k: (",".join(str(v) for v in val) if isinstance(val, list) else val)
            for k, val in cfg.items() if not k.startswith("_")}


class _Runner:
    def __init__(self, cfg, quiet: bool):
        self.cfg = cfg
        self.quiet = quiet
        self._pool = None

    def say(self, text: str) -> None:
        if not self.quiet:
            print(text)

    def mapper(self):
        jobs = self.cfg["_jobs"]
        if jobs <= 1:
            return map
        self._pool = ProcessPoolExecutor(max_workers=jobs)
        return self._pool.map  # preserves input order

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()


def cmd_generate(cfg, run: _Runner) -> int:
    p = _model(cfg)
    n = cfg["n"]
    g = graph.generate(p, n, cfg["seed"], record_edges=cfg["edges"])
    w = ResultWriter(cfg["_out"], "generate", _echo(cfg), cfg["seed"])
    ii, jj, cnt = stats_tests.degree_pair_histogram(g.in_degrees, g.out_degrees)
    w.write_rows("census.csv", ["i", "j", "count"], zip(ii.tolist(), jj.tolist(), cnt.tolist()))
    if cfg["degrees"]:
        w.write_rows("degrees.csv", ["v", "in_degree", "out_degree"],
                     zip(range(1, n + 1), g.in_degrees.tolist(), g.out_degrees.tolist()))
    if cfg["edges"]:
        w.write_with("edges.tsv", lambda path: graph.write_edge_list(g, path))
    n0 = float(np.mean(g.in_degrees == 0))
    n1 = float(np.mean(g.in_degrees == 1))
    run.say(f"n={n}: N_0^in/n={n0:.6f} (limit {limits.marginal_pmf_in(p, 0):.6f}), "
            f"N_1^in/n={n1:.6f} (limit {limits.marginal_pmf_in(p, 1):.6f})")
    run.say(f"wrote {', '.join(w.files)} to {w.out_dir}")
    return EXIT_OK


def cmd_embed(cfg, run: _Runner) -> int:
    res = embedding.run_embedding(_model(cfg), cfg["n"], cfg["seed"])
    w = ResultWriter(cfg["_out"], "embed", _echo(cfg), cfg["seed"])
    w.write_with("embedding.csv", res.write_csv)
    run.say(f"T_n={res.birth_times[-1]:.6f} after {res.n - 1} rings; wrote {w.files[0]}")
    return EXIT_OK


def cmd_bi_sim(cfg, run: _Runner) -> int:
    bp = bisbi.BIParams(cfg["lam"], cfg["theta"], cfg["init"])
    t = math.log(cfg["growth"]) / bp.lam
    m = cfg["replicates"]
    if cfg["method"] == "direct":
        z = bisbi.simulate_bi_batch(bp, t, m, cfg["seed"])
    elif cfg["method"] == "shotnoise":
        z = bisbi.simulate_bi_shotnoise(bp, t, cfg["seed"], size=m)
    else:
        raise ConfigError(f"method must be 'direct' or 'shotnoise', got {cfg['method']!r}")
    scaled = z * math.exp(-bp.lam * t)
    w = ResultWriter(cfg["_out"], "bi-sim", _echo(cfg), cfg["seed"])
    w.write_rows("bi.csv", ["replicate", "Z", "scaled"], zip(range(m), z.tolist(), scaled.tolist()))
    rep = stats_tests.ks_statistic(np.sort(scaled), lambda x: gamma_cdf(bp.limit_shape, x))
    run.say(rep.line(f"KS vs Gamma({bp.limit_shape:g}, 1)"))
    return EXIT_OK


def cmd_limits(cfg, run: _Runner) -> int:
    p = _model(cfg)
    w = ResultWriter(cfg["_out"], "limits", _echo(cfg), cfg["seed"])
    want_table = cfg["table"] or not (cfg["pair_samples"] or cfg["fixed_node"])
    if want_table:
        table = limits.LimitLawTable.build(p)
        w.write_with("marginals.csv", table.write_marginals_csv)
        w.write_with("joint.csv", table.write_joint_csv)
        w.write_rows("limits_checks.csv", ["check", "residual"], sorted(table.checks.items()))
        for key, val in sorted(table.checks.items()):
            run.say(f"{key}: {val:.3g}")
    if cfg["pair_samples"]:
        i, o, j = limits.sample_limit_pair(p, cfg["seed"], size=cfg["pair_samples"])
        w.write_rows("limit_pairs.csv", ["draw", "I", "O", "J"],
                     zip(range(i.size), i.tolist(), o.tolist(), j.tolist()))
    if cfg["fixed_node"]:
        x, y = limits.sample_fixed_node_limit(p, cfg["fixed_node"], cfg["seed"], size=cfg["replicates"])
        w.write_rows("fixed_node_limit.csv", ["draw", "x", "y"], zip(range(x.size), x.tolist(), y.tolist()))
    run.say(f"wrote {', '.join(w.files)} to {w.out_dir}")
    return EXIT_OK


def cmd_hill(cfg, run: _Runner) -> int:
    p = _model(cfg)
    exp = estimators.hill_consistency_experiment(p, cfg["n"], cfg["replicates"], cfg["seed"],
                                                 k=cfg["k"], mapper=run.mapper())
    w = ResultWriter(cfg["_out"], "hill", _echo(cfg), cfg["seed"], cfg["replicates"])
    w.write_with("hill.csv", exp.write_csv)
    summary = exp.summary()
    cols = ["n", "side", "k", "median", "q1", "q3", "iqr", "median_abs_error", "target", "replicates"]
    w.write_rows("hill_summary.csv", cols, ([row[c] for c in cols] for row in summary))
    for row in summary:
        run.say(f"n={row['n']:>9} {row['side']:>3}: median H={row['median']:.4f} "
                f"IQR={row['iqr']:.4f} target={row['target']:.4f}")
    return EXIT_OK


def cmd_tailmeasure(cfg, run: _Runner) -> int:
    p = _model(cfg)
    n = cfg["n"]
    k = estimators.kn_default(n) if cfg["k"] is None else cfg["k"]
    g = graph.generate(p, n, cfg["seed"])
    grid = estimators.tail_empirical_2d(g.in_degrees, g.out_degrees, p, k, cfg["x"], cfg["y"])
    w = ResultWriter(cfg["_out"], "tailmeasure", _echo(cfg), cfg["seed"])
    w.write_with("tail.csv", grid.write_csv)
    dev = grid.relative_deviation()
    big = grid.theoretical_mass >= 0.05
    if np.any(big):
        run.say(f"max relative deviation on rectangles with limit mass >= 0.05: {np.max(dev[big]):.3f}")
    run.say(f"wrote {w.files[0]} to {w.out_dir}")
    return EXIT_OK


def cmd_concentration(cfg, run: _Runner) -> int:
    p = _model(cfg)
    res = stats_tests.concentration_experiment(p, cfg["n"], cfg["replicates"], cfg["seed"], mapper=run.mapper())
    w = ResultWriter(cfg["_out"], "concentration", _echo(cfg), cfg["seed"], cfg["replicates"])
    w.write_with("concentration.csv", res.write_csv)
    cols = list(res.summary[0])
    w.write_rows("concentration_summary.csv", cols, ([row[c] for c in cols] for row in res.summary))
    for row in res.summary:
        run.say(f"n={row['n']:>9}: median ratio {row['median_ratio']:.4f} "
                f"[{row['ratio_ci_low']:.4f}, {row['ratio_ci_high']:.4f}]")
    return EXIT_OK


def cmd_selftest(cfg, run: _Runner) -> int:
    from dpalab.selftest import run_checks

    checks = run_checks()
    for c in checks:
        run.say(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_SELFTEST


COMMANDS = {
    "generate": cmd_generate, "embed": cmd_embed, "bi-sim": cmd_bi_sim, "limits": cmd_limits,
    "hill": cmd_hill, "tailmeasure": cmd_tailmeasure, "concentration": cmd_concentration,
    "selftest": cmd_selftest,
}


def main(argv=None, quiet: bool = False) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = resolve_config(ns.command, ns)
    except ConfigError as exc:
        print(f"dpalab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = _Runner(cfg, quiet)
    try:
        return COMMANDS[ns.command](cfg, run)
    except (ArithmeticError, FloatingPointError, bisbi.JumpBudgetExceeded) as exc:
        print(f"dpalab {ns.command}: numeric failure ({type(exc).__name__}) with config "
              f"{_echo(cfg)}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:  # ConfigError, ParameterError and invalid argument values
        print(f"dpalab {ns.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        run.close()


if __name__ == "__main__":
    sys.exit(main())
