"""End-to-end acceptance checks.

One test per shipped guarantee, each printing a single pass/fail line
with the observed statistic next to its limit. Sampled statistics get a
four-standard-error noise allowance; deterministic error counts are
compared exactly. Runtime ceilings are asserted so regressions in the
evaluation engine or the runner surface here.
"""

import time

import numpy as np
import pytest

from mdlpredict import metrics, predictors
from mdlpredict.harness import (
    evaluate_bounds,
    run_experiment,
    scenario_config,
    write_csv,
)
from mdlpredict.measures import bernoulli, build_family
from mdlpredict.model_class import ModelClass


def _announce(capsys, num, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {num:02d} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def _verdicts_for(name, overrides=None):
    cfg = scenario_config(name, overrides)
    t0 = time.perf_counter()
    result = run_experiment(cfg, collect_rows=False)
    elapsed = time.perf_counter() - t0
    verdicts = {v.name: v for v in evaluate_bounds(cfg, result.trajectory_summaries)}
    return verdicts, elapsed


@pytest.fixture(scope="module")
def pair_run():
    """One shared run of the two-point Bernoulli class, 1000 x 1000."""
    return _verdicts_for("bernoulli-pair")


def test_01_elimination_error_bound(capsys):
    t0 = time.perf_counter()
    parts = []
    ok = True
    for h in (1, 3):
        verdicts, _ = _verdicts_for("det-elimination", {"horizon": h})
        v = verdicts["elimination-errors"]
        ok = ok and v.passed
        parts.append(f"h={h} max errors {v.observed:.0f} <= {v.limit:.0f}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 1.0
    detail = (f"{'; '.join(parts)}; h=1 worst case attains 3; "
              f"100 runs each, {elapsed:.2f}s")
    _announce(capsys, 1, ok, detail)


def test_02_majority_error_bound(capsys):
    verdicts, elapsed = _verdicts_for("det-majority")
    v = verdicts["majority-errors"]
    ok = v.passed and elapsed < 1.0
    detail = (f"max errors {v.observed:.0f} <= ceil(log2 1/w) = {v.limit:.0f} "
              f"on every one of 100 runs, {elapsed:.2f}s")
    _announce(capsys, 2, ok, detail)


def test_03_sampled_bayes_expected_errors(capsys):
    verdicts, elapsed = _verdicts_for("det-majority", {"trajectories": 1000})
    v = verdicts["sampled-errors-mean"]
    ok = v.passed and elapsed < 10.0
    detail = (f"mean errors {v.observed:.4f} <= ln 1/w = {v.limit:.4f} "
              f"(+4 stderr) over 1000 seeds, {elapsed:.1f}s")
    _announce(capsys, 3, ok, detail)


def test_04_mixture_cumulative_bound(capsys, pair_run):
    verdicts, elapsed = pair_run
    v = verdicts["eq2-mixture"]
    ok = v.passed and elapsed < 60.0
    detail = (f"mean cumulative (d1/2)^2 of the mixture {v.observed:.4f} "
              f"<= ln 2 = {v.limit:.4f} (+4 stderr), 1000 x 1000, {elapsed:.1f}s")
    _announce(capsys, 4, ok, detail)


def test_05_two_part_cumulative_bound(capsys, pair_run):
    verdicts, elapsed = pair_run
    v = verdicts["eq2-two-part"]
    ok = v.passed and elapsed < 60.0
    detail = (f"mean cumulative d1 of the two-part selector {v.observed:.4f} "
              f"<= 21*2^1 = {v.limit:.0f}, margin {v.limit - v.observed:.1f}, "
              f"{elapsed:.1f}s")
    _announce(capsys, 5, ok, detail)


def test_06_distance_convergence(capsys):
    runs = [
        ("bernoulli-pair", {
            "horizon": 4, "steps": 2000, "trajectories": 200,
            "checkpoints": [100, 500, 2000],
            "bounds": [{"kind": "convergence",
                        "checkpoints": [100, 500, 2000], "final_max": 0.01}],
        }),
        ("markov-class", None),
        ("branching-nonergodic", None),
    ]
    t0 = time.perf_counter()
    ok = True
    finals = []
    for name, overrides in runs:
        verdicts, _ = _verdicts_for(name, overrides)
        v = verdicts["convergence"]
        ok = ok and v.passed
        finals.append(f"{name} {v.observed:.4f}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 300.0
    detail = (f"median d4 at step 2000 < 0.01 and non-increasing over "
              f"checkpoints: {', '.join(finals)}; 200 trajectories each, "
              f"{elapsed:.0f}s")
    _announce(capsys, 6, ok, detail)


def test_07_estimator_agreement(capsys):
    rng = np.random.default_rng(7)
    caps = {2: 12, 3: 7, 4: 6}          # largest h with A^h <= 4096
    t0 = time.perf_counter()
    worst = 0.0
    within = 0
    for _ in range(100):
        a = int(rng.integers(2, 5))
        h = int(rng.integers(1, caps[a] + 1))
        p, q = (build_family({"family": "iid",
                              "probs": rng.dirichlet(np.ones(a)).tolist()})
                for _ in range(2))
        exact = metrics.dh_exact(p, q, (), h)
        est = metrics.dh_monte_carlo(p, q, (), h, 100000, rng)
        dev = abs(est.estimate - exact)
        if dev <= 4.0 * est.stderr:
            within += 1
        if est.stderr > 0:
            worst = max(worst, dev / est.stderr)
    elapsed = time.perf_counter() - t0
    ok = within == 100 and elapsed < 60.0
    detail = (f"{within}/100 random pairs within 4 stderr of the exact "
              f"distance (worst {worst:.2f} stderr), n=1e5, {elapsed:.1f}s")
    _announce(capsys, 7, ok, detail)


def test_08_map_equals_mdl(capsys):
    rng = np.random.default_rng(2026)
    t0 = time.perf_counter()
    agree = 0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        models = [bernoulli(t) for t in rng.uniform(0.05, 0.95, size=n)]
        codes = -np.log2(rng.dirichlet(np.ones(n)))
        mc = ModelClass(models, complexity=codes.tolist(), truth_index=1)
        length = int(rng.integers(0, 31))
        x = mc.measure(int(rng.integers(1, n + 1))).sample_path(length, rng)
        if predictors.map_select(mc, x) == predictors.mdl_select(mc, x).index:
            agree += 1
    elapsed = time.perf_counter() - t0
    ok = agree == 1000 and elapsed < 5.0
    detail = (f"posterior-mode and two-part selections identical on "
              f"{agree}/1000 randomized instances, {elapsed:.1f}s")
    _announce(capsys, 8, ok, detail)


def test_09_ratio_exceedance_frequencies(capsys, pair_run):
    verdicts, elapsed = pair_run
    vs = [verdicts[f"ratio-surrogate(c={c})"] for c in (2, 4, 8)]
    ok = all(v.passed for v in vs) and elapsed < 60.0
    freqs = ", ".join(f"c={c}: {v.observed:.3f} <= {v.limit:.3f}"
                      for c, v in zip((2, 4, 8), vs))
    detail = f"exceedance frequencies {freqs} (+4 stderr), {elapsed:.1f}s"
    _announce(capsys, 9, ok, detail)


def test_10_value_convergence(capsys):
    verdicts, elapsed = _verdicts_for("rl-two-env")
    v = verdicts["value-gap"]
    ok = v.passed and elapsed < 300.0
    detail = (f"fraction of runs with value gap < 0.05 at step 500: "
              f"{v.observed:.2f} >= {v.limit:.2f}, 100 seeds, {elapsed:.0f}s")
    _announce(capsys, 10, ok, detail)


def test_11_flips_without_identification(capsys):
    verdicts, elapsed = _verdicts_for("trouble-osc")
    v = verdicts["selection-flips"]
    ok = v.passed and elapsed < 60.0
    detail = f"{v.detail}, {elapsed:.1f}s"
    _announce(capsys, 11, ok, detail)


def test_12_rerun_determinism(capsys, tmp_path):
    reduced = {
        "bernoulli-pair": {"trajectories": 3, "steps": 120},
        "branching-nonergodic": {"trajectories": 2, "steps": 150,
                                 "checkpoints": [150], "bounds": []},
        "det-elimination": {"trajectories": 5},
        "det-majority": {"trajectories": 5},
        "discriminative-regression": {"trajectories": 5},
        "markov-class": {"trajectories": 2, "steps": 150,
                         "checkpoints": [150], "bounds": []},
        "rl-two-env": {"trajectories": 2, "steps": 60, "checkpoints": [60],
                       "rl": {"value_checkpoints": [60], "n_rollouts": 25},
                       "bounds": []},
        "trouble-osc": {"trajectories": 2, "steps": 400, "bounds": []},
    }
    t0 = time.perf_counter()
    identical = 0
    for name, overrides in sorted(reduced.items()):
        cfg = scenario_config(name, overrides)
        blobs = []
        for tag in ("first", "second"):
            path = tmp_path / f"{name}-{tag}.csv"
            write_csv(run_experiment(cfg), path)
            blobs.append(path.read_bytes())
        if blobs[0] == blobs[1]:
            identical += 1
    pooled = tmp_path / "pooled.csv"
    cfg = scenario_config("bernoulli-pair", reduced["bernoulli-pair"])
    write_csv(run_experiment(cfg, jobs=2), pooled)
    pooled_same = pooled.read_bytes() == \
        (tmp_path / "bernoulli-pair-first.csv").read_bytes()
    elapsed = time.perf_counter() - t0
    ok = identical == 8 and pooled_same and elapsed < 60.0
    detail = (f"{identical}/8 scenarios byte-identical on rerun, worker pool "
              f"matches serial output, {elapsed:.1f}s")
    _announce(capsys, 12, ok, detail)
