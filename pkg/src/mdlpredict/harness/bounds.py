"""Checks of configured bounds against per-trajectory summaries.

Each bound declared in a config is evaluated over the trajectory
summaries an experiment produced and yields one verdict per checked
inequality. Sampled statistics get a noise allowance of four standard
errors on top of the stated limit, so a verdict flags a systematic
violation rather than Monte Carlo jitter. Deterministic counts (error
totals of the elimination and majority learners) are compared exactly.

Verdicts are plain records: bound name, pass flag, the observed
statistic, the limit it was held against and a one-line explanation.
Checks that need class constants (prior weight or codelength of the
truth) rebuild the model class from the config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, InsufficientDataError
from .config import config_hash

# sampled statistics may exceed their limit by this many standard errors
NOISE_SIGMAS = 4.0

_BOOTSTRAP_RESAMPLES = 500


@dataclass(frozen=True)
class Verdict:
    """Outcome of one bound check."""

    name: str
    passed: bool
    observed: float
    limit: float
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.detail}"


def _pull(summaries: list, *keys, bound: str) -> list:
    """Extract ``summary[k0][k1]...`` per trajectory or fail loudly."""
    out = []
    for s in summaries:
        v = s
        for k in keys:
            if not isinstance(v, dict) or k not in v:
                raise InsufficientDataError(
                    f"bound {bound!r} needs summary field "
                    f"{'.'.join(map(str, keys))}, not present in the records"
                )
            v = v[k]
        out.append(v)
    return out


def _sem(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


def _bootstrap_median_se(values: np.ndarray, rng: np.random.Generator) -> float:
    if values.size < 2:
        return 0.0
    idx = rng.integers(0, values.size, size=(_BOOTSTRAP_RESAMPLES, values.size))
    medians = np.median(values[idx], axis=1)
    return float(medians.std(ddof=1))


def _truth_constants(cfg: dict):
    """(normalized prior weight, codelength in bits, model count) of the truth."""
    from .runner import build_model_class

    mc = build_model_class(cfg)
    n = mc.enumerated_count
    ti = mc.truth_index - 1
    w = float(mc.prior_weights(n)[ti])
    k_bits = float(mc.codelengths(n)[ti])
    return w, k_bits, n


# --- individual checkers ---------------------------------------------------------

def _check_elimination_errors(cfg, summaries, b) -> list[Verdict]:
    errs = np.asarray(_pull(summaries, "errors", "elimination", bound=b["kind"]))
    _, _, m = _truth_constants(cfg)
    h = cfg["horizon"]
    limit = h * (m - 1)
    worst = int(errs.max())
    passed = bool((errs <= limit).all())
    detail = f"max errors {worst} <= h*(m-1) = {limit} over {errs.size} trajectories"
    attained = b.get("attained")
    if attained is not None:
        hit = worst == int(attained)
        passed = passed and hit
        detail += f"; worst case {'attains' if hit else 'misses'} {int(attained)}"
    return [Verdict(b["kind"], passed, float(worst), float(limit), detail)]


def _check_majority_errors(cfg, summaries, b) -> list[Verdict]:
    errs = np.asarray(_pull(summaries, "errors", "majority", bound=b["kind"]))
    w, _, _ = _truth_constants(cfg)
    limit = math.ceil(math.log2(1.0 / w))
    worst = int(errs.max())
    passed = bool((errs <= limit).all())
    detail = (f"max errors {worst} <= ceil(log2 1/w_truth) = {limit} "
              f"over {errs.size} trajectories")
    return [Verdict(b["kind"], passed, float(worst), float(limit), detail)]


def _check_sampled_errors_mean(cfg, summaries, b) -> list[Verdict]:
    errs = np.asarray(_pull(summaries, "errors", "bayes-sample", bound=b["kind"]),
                      dtype=float)
    w, _, _ = _truth_constants(cfg)
    limit = math.log(1.0 / w)
    mean = float(errs.mean())
    sem = _sem(errs)
    passed = mean <= limit + NOISE_SIGMAS * sem
    detail = (f"mean errors {mean:.4f} (sem {sem:.4f}) <= ln 1/w_truth = "
              f"{limit:.4f} over {errs.size} trajectories")
    return [Verdict(b["kind"], passed, mean, limit, detail)]


def _check_eq2_mixture(cfg, summaries, b) -> list[Verdict]:
    sums = np.asarray(_pull(summaries, "eq2_half_sq_sum", "bayes", bound=b["kind"]))
    w, _, _ = _truth_constants(cfg)
    limit = cfg["horizon"] * math.log(1.0 / w)
    mean = float(sums.mean())
    sem = _sem(sums)
    passed = mean <= limit + NOISE_SIGMAS * sem
    detail = (f"mean cumulative (d_h/2)^2 of the mixture {mean:.4f} "
              f"(sem {sem:.4f}) <= h*ln 1/w_truth = {limit:.4f}")
    return [Verdict(b["kind"], passed, mean, limit, detail)]


def _check_eq2_two_part(cfg, summaries, b) -> list[Verdict]:
    sums = np.asarray(_pull(summaries, "eq2_sum", "mdl", bound=b["kind"]))
    _, k_bits, _ = _truth_constants(cfg)
    limit = 21.0 * cfg["horizon"] * 2.0 ** k_bits
    mean = float(sums.mean())
    sem = _sem(sums)
    passed = mean <= limit + NOISE_SIGMAS * sem
    detail = (f"mean cumulative d_h of the two-part selector {mean:.4f} "
              f"(sem {sem:.4f}) <= 21*h*2^K(truth) = {limit:.1f}, "
              f"margin {limit - mean:.1f}")
    return [Verdict(b["kind"], passed, mean, limit, detail)]


def _check_ratio_surrogate(cfg, summaries, b) -> list[Verdict]:
    ratios = _pull(summaries, "max_log_ratio", bound=b["kind"])
    q = b.get("q_index")
    if not isinstance(q, int) or not 1 <= q <= len(ratios[0]):
        raise ConfigError(f"bounds.q_index: need a model index in 1..{len(ratios[0])}")
    cs = b.get("c", [2])
    maxima = np.asarray([row[q - 1] for row in ratios])
    out = []
    for c in cs:
        freq = float((maxima >= math.log2(c)).mean())
        limit = 1.0 / c
        se = math.sqrt(freq * (1.0 - freq) / maxima.size)
        passed = freq <= limit + NOISE_SIGMAS * se
        detail = (f"freq[max ratio >= {c}] = {freq:.4f} (se {se:.4f}) <= 1/c = "
                  f"{limit:.4f} over {maxima.size} trajectories")
        out.append(Verdict(f"{b['kind']}(c={c})", passed, freq, limit, detail))
    return out


def _convergence_predictor(cfg) -> str:
    from .runner import _MEASURE_PREDICTORS

    for p in cfg["predictors"]:
        if p in _MEASURE_PREDICTORS:
            return p
    raise InsufficientDataError(
        "bound 'convergence' needs a measure-valued predictor in the run"
    )


def _check_convergence(cfg, summaries, b) -> list[Verdict]:
    pred = _convergence_predictor(cfg)
    cps = b.get("checkpoints")
    if cps is None:
        cps = cfg["checkpoints"]
        cps = list(range(1, cfg["steps"] + 1)) if cps == "all" else list(cps)
    final_max = float(b.get("final_max", 0.01))

    per_cp = [np.asarray(_pull(summaries, "checkpoint_d", pred, str(t),
                               bound=b["kind"]), dtype=float)
              for t in cps]
    # bootstrap noise is tied to the config so reruns judge identically
    rng = np.random.default_rng(int(config_hash(cfg)[:16], 16))
    medians = [float(np.median(v)) for v in per_cp]
    ses = [_bootstrap_median_se(v, rng) for v in per_cp]

    monotone = True
    for i in range(len(cps) - 1):
        slack = NOISE_SIGMAS * math.hypot(ses[i], ses[i + 1])
        if medians[i + 1] > medians[i] + slack:
            monotone = False
    final_ok = medians[-1] < final_max
    passed = monotone and final_ok
    path = " -> ".join(f"{m:.4f}" for m in medians)
    detail = (f"median d_h of {pred} at steps {cps}: {path}; final "
              f"{medians[-1]:.4f} < {final_max} "
              f"{'and non-increasing' if monotone else 'but sequence rose'}")
    return [Verdict(b["kind"], passed, medians[-1], final_max, detail)]


def _check_selection_flips(cfg, summaries, b) -> list[Verdict]:
    pred = _convergence_predictor(cfg)
    flips = np.asarray(_pull(summaries, "flips", pred, bound=b["kind"]), dtype=float)
    fw = np.asarray(_pull(summaries, "final_window_median_d", pred, bound=b["kind"]),
                    dtype=float)
    min_flips = float(b.get("min_flips", 10))
    max_fw = float(b.get("max_final_window_median", 0.02))
    med_flips = float(np.median(flips))
    med_fw = float(np.median(fw))
    passed = med_flips >= min_flips and med_fw < max_fw
    detail = (f"median flips {med_flips:.1f} >= {min_flips:.0f} required while "
              f"median final-window d of {pred} {med_fw:.4f} < {max_fw}")
    return [Verdict(b["kind"], passed, med_flips, min_flips, detail)]


def _check_value_gap(cfg, summaries, b) -> list[Verdict]:
    step = b.get("step")
    if step is None:
        vcps = cfg["rl"]["value_checkpoints"] if cfg["rl"] else []
        if not vcps:
            raise ConfigError("bounds.step: no value checkpoints to read")
        step = vcps[-1]
    tol = float(b.get("tol", 0.05))
    min_fraction = float(b.get("min_fraction", 0.95))
    vals = _pull(summaries, "value", str(step), bound=b["kind"])
    gaps = np.asarray([v["gap"] for v in vals])
    slack = np.asarray([v["gap_stderr"] for v in vals])
    ok = gaps < tol + NOISE_SIGMAS * slack
    frac = float(ok.mean())
    passed = frac >= min_fraction
    detail = (f"fraction of trajectories with value gap < {tol} at step {step}: "
              f"{frac:.3f} >= {min_fraction} required (mean gap {gaps.mean():.4f})")
    return [Verdict(b["kind"], passed, frac, min_fraction, detail)]


def _check_identification(cfg, summaries, b) -> list[Verdict]:
    flags = _pull(summaries, "identified", bound=b["kind"])
    frac = float(np.mean([bool(f) for f in flags]))
    passed = frac == 1.0
    detail = f"fraction of trajectories selecting the truth at the end: {frac:.3f}"
    return [Verdict(b["kind"], passed, frac, 1.0, detail)]


_CHECKERS = {
    "elimination-errors": _check_elimination_errors,
    "majority-errors": _check_majority_errors,
    "sampled-errors-mean": _check_sampled_errors_mean,
    "eq2-mixture": _check_eq2_mixture,
    "eq2-two-part": _check_eq2_two_part,
    "ratio-surrogate": _check_ratio_surrogate,
    "convergence": _check_convergence,
    "selection-flips": _check_selection_flips,
    "value-gap": _check_value_gap,
    "identification": _check_identification,
}


def evaluate_bounds(cfg: dict, summaries: list) -> list[Verdict]:
    """Check every bound a validated config declares.

    ``summaries`` is the ``trajectory_summaries`` list of a run, either
    fresh from :func:`run_experiment` or read back from a summary file.
    Raises :class:`InsufficientDataError` when the records lack a field
    a bound needs.
    """
    if not summaries:
        raise InsufficientDataError("no trajectory summaries to check bounds against")
    out: list[Verdict] = []
    for b in cfg["bounds"]:
        out.extend(_CHECKERS[b["kind"]](cfg, summaries, b))
    return out
