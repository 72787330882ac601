"""Acceptance criteria at their stated sizes and tolerances.

Each test records one PASS/FAIL line; ``conftest.py`` prints them in the
terminal summary.  Tolerances are pinned here, independent of the values
the verify suites carry.
"""
from pathlib import Path

import pytest

from freeutility import cli, verify

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
RESULTS = []

# criterion -> (suite, {check: (tolerance, comparison)})
CRITERIA = {
    1: ("conjugacy", {"roundtrip_measure": (1e-9, "<"), "roundtrip_beta": (1e-9, "<")}),
    2: ("variational", {"candidate_excess": (1e-9, "<="), "gibbs_equals_beta": (1e-9, "<")}),
    3: ("control_closed_form", {"candidate_excess": (1e-9, "<="), "log_partition_identity": (1e-9, "<")}),
    4: ("intervention", {"past_marginal_shift": (1e-12, "<"),
                         "regression_condition_shift": (0.05, ">="),
                         "regression_intervene_shift": (1e-12, "<")}),
    5: ("gvp", {"random_search_excess": (1e-6, "<="), "coordinate_ascent_excess": (1e-6, "<=")}),
    6: ("dp_limit", {"argmax_mismatches": (0.0, "<="), "enumeration_gap": (1e-12, "<=")}),
    7: ("temperature", {"tv_reference_at_high_alpha": (1e-3, "<"), "tv_dp_at_low_alpha": (1e-3, "<")}),
    8: ("estimation", {"sequential_vs_batch": (1e-12, "<"), "martingale": (1e-9, "<")}),
    9: ("bcr", {"runs_not_concentrated_by_200": (0.0, "<="), "mean_regret_steps_901_1000": (0.05, "<")}),
}
NAMES = {
    1: "conjugation round-trip", 2: "variational principle", 3: "control closed form",
    4: "intervention semantics", 5: "gvp oracle equivalence", 6: "dp limit",
    7: "temperature limits", 8: "adaptive estimation", 9: "bayesian control rule",
    10: "reproducibility",
}
COMPARE = {"<": lambda v, t: v < t, "<=": lambda v, t: v <= t, ">=": lambda v, t: v >= t}


def record(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {NAMES[n]}: {detail}"
    RESULTS.append(line)
    print(line)


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    suite, expected = CRITERIA[n]
    result = verify.run_suite(suite, scale=1.0)
    checks = {c.name: c.value for c in result.checks}
    assert set(checks) == set(expected)
    parts, ok = [], True
    for name, (tol, op) in expected.items():
        good = COMPARE[op](checks[name], tol)
        ok &= good
        parts.append(f"{name}={checks[name]:.3g} (need {op} {tol:g})")
    record(n, ok, "; ".join(parts) + f"; {result.seconds:.1f} s")
    assert ok
    assert result.seconds < 60


def test_criterion_10_reproducibility(tmp_path, capsys):
    code = cli.main(["verify", "--out", str(tmp_path / "verify.csv")])
    capsys.readouterr()
    problems = [] if code == 0 else [f"verify exit {code}"]
    for cfg in sorted(CONFIGS.glob("*.yaml")):
        if cfg.stem == "verify":
            continue
        kind = cli.parse_config(cfg).kind
        sub = "solve-control" if kind == "control" else kind
        outs = []
        for i in range(2):
            out = tmp_path / f"{cfg.stem}.{i}.csv"
            if cli.main([sub, "--config", str(cfg), "--out", str(out)]) != 0:
                problems.append(f"{cfg.name} failed")
            outs.append(out.read_bytes())
        if outs[0] != outs[1]:
            problems.append(f"{cfg.name} differs on rerun")
    ok = not problems
    record(10, ok, "verify exit 0 and byte-identical reruns of every shipped config" if ok
           else "; ".join(problems))
    assert ok
