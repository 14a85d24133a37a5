"""Fast internal-consistency checks (the ``selftest`` subcommand)."""

from __future__ import annotations

import filecmp
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dpalab import estimators, graph, limits
from dpalab.params import ModelParams

SELFTEST_PARAMS = (ModelParams(0.5, 1.0, 1.0), ModelParams(0.3, 0.4, 2.5))


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.value:.3g} (tolerance {self.tolerance:g})"


def limit_law_checks(params: ModelParams) -> list[Check]:
    tag = f"alpha={params.alpha},delta_in={params.delta_in},delta_out={params.delta_out}"
    table = limits.LimitLawTable.build(params)
    rep = table.checks
    return [
        Check(f"pmf normalization in [{tag}]", abs(table.pin.sum() - 1.0), 1e-6),
        Check(f"pmf normalization out [{tag}]", abs(table.pout.sum() - 1.0), 1e-6),
        Check(f"joint pmf normalization [{tag}]", rep["norm_joint"], 1e-6),
        Check(f"ccdf telescoping in [{tag}]", rep["telescoping_in"], 1e-10),
        Check(f"ccdf telescoping out [{tag}]", rep["telescoping_out"], 1e-10),
        Check(f"joint marginalization in [{tag}]", rep["marginalization_in"], 1e-6),
        Check(f"joint marginalization out [{tag}]", rep["marginalization_out"], 1e-6),
    ]


def hill_identity_check(seed: int = 20240601) -> Check:
    params = SELFTEST_PARAMS[0]
    g = graph.generate(params, 100_000, seed)
    worst = 0.0
    for deg in (g.in_degrees, g.out_degrees):
        for k in (10, 100, estimators.kn_default(g.n)):
            worst = max(worst, abs(estimators.hill(deg, k) - estimators.hill_integral(deg, k)))
    return Check("Hill integral identity", worst, 1e-8)


def determinism_check() -> Check:
    """Run ``generate`` twice with one configuration and compare the files byte for byte."""
    from dpalab.cli import main

    args = ["generate", "--n", "20000", "--alpha", "0.4", "--delta-in", "0.7", "--delta-out", "1.3",
            "--seed", "99", "--degrees", "--edges"]
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        for d in (a, b):
            if main(args + ["--out", d], quiet=True) != 0:
                return Check("byte-identical reruns", 1.0, 0.0)
        names = sorted(p.name for p in Path(a).iterdir() if not p.name.endswith(".meta.json"))
        same = all(filecmp.cmp(Path(a) / nm, Path(b) / nm, shallow=False) for nm in names)
    # chunked evolution must reproduce a single run
    p = SELFTEST_PARAMS[1]
    one = graph.generate(p, 5000, 3)
    two = graph.new_graph(p, 3)
    for m in (17, 1000, 4999, 5000):
        graph.evolve(two, m)
    same = same and np.array_equal(one.in_degrees, two.in_degrees) \
        and np.array_equal(one.out_degrees, two.out_degrees)
    return Check("byte-identical reruns", 0.0 if same and names else 1.0, 0.0)


def run_checks() -> list[Check]:
    checks = []
    for params in SELFTEST_PARAMS:
        checks.extend(limit_law_checks(params))
    checks.append(hill_identity_check())
    checks.append(determinism_check())
    return checks
