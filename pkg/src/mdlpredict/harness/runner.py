"""Seeded experiment runner.

One trajectory = one sampled path from the configured truth plus every
requested predictor trace along it. Trajectories are independent: each
gets its own substream spawned from the master seed, so results do not
depend on the worker count. Per-step work is vectorized through the
shared evaluation engine; state-machine learners (elimination, majority,
posterior sampling) walk the path in a plain loop.

Uniform-draw order within a trajectory is part of the output contract:
first the sampled path (one draw per step), then the posterior-sample
draws (one per step, when enabled), then Monte Carlo distance draws in
checkpoint-then-predictor order. Interaction runs draw two uniforms per
step and rollout draws at each value checkpoint, selected environment
first.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import metrics, predictors
from .._engine import pred_bank
from ..errors import ClassNotDeterministicError
from ..measures import build_family, sample_symbol
from ..model_class import ModelClass
from ..rl import (
    ActionRewardEnv,
    EnvironmentClass,
    FixedActionPolicy,
    InteractionHistory,
    ParityEnv,
    PerceptSpace,
    RandomActionPolicy,
    bernoulli_reward_env,
    discriminative_select,
    interact,
    value_estimate,
    value_gap,
)
from .config import config_hash, validate_config

COLUMNS = ("run_id", "trajectory", "step", "predictor", "selected_index",
           "score_bits", "d_h", "d_h_stderr", "estimator", "errors_cum",
           "log_ratio_bits", "value_sel", "value_true", "value_gap", "seed")

# predictors whose next-block distribution is a measure we can hold a
# distance against; the remaining ones count symbol errors instead
_MEASURE_PREDICTORS = ("mdl", "map", "bayes", "mdli")


@dataclass
class RunResult:
    """Everything one experiment produced, trajectory order preserved."""

    config: dict
    config_hash: str
    run_id: str
    columns: tuple
    rows: list
    trajectory_summaries: list


# --- class and environment construction -----------------------------------------

def build_model_class(cfg: dict) -> ModelClass:
    """Instantiate the measure class a validated config describes."""
    c = cfg["class"]
    models = [build_family(spec) for spec in c["models"]]
    return ModelClass(models, complexity=c["complexity"],
                      truth_index=c["truth_index"])


def build_environment(spec: dict):
    kind = spec["kind"]
    if kind == "bernoulli-reward":
        return bernoulli_reward_env(spec["success"])
    if kind == "parity":
        return ParityEnv(spec["p_even"], spec["p_odd"])
    # deterministic-map: observation is a fixed function of the action
    outputs = list(spec["outputs"])
    space = PerceptSpace(int(spec["n_obs"]), (0.0,))
    table = np.zeros((len(outputs), space.size))
    table[np.arange(len(outputs)), outputs] = 1.0
    return ActionRewardEnv(space, table)


def build_policy(spec: dict):
    if spec["kind"] == "random":
        return RandomActionPolicy(spec["probs"])
    return FixedActionPolicy(spec["action"], spec["n_actions"])


def build_env_class(cfg: dict) -> tuple[EnvironmentClass, object]:
    rl = cfg["rl"]
    envs = [build_environment(spec) for spec in rl["envs"]]
    ec = EnvironmentClass(envs, rl["codelengths"], rl["truth_index"])
    return ec, build_policy(rl["policy"])


# one cache per process; workers inherit or rebuild on first use
_CACHE: dict[str, object] = {}


def _model_class_for(cfg: dict, chash: str) -> ModelClass:
    mc = _CACHE.get(chash)
    if mc is None:
        mc = build_model_class(cfg)
        _CACHE[chash] = mc
    return mc


def _env_setup_for(cfg: dict, chash: str):
    got = _CACHE.get(chash)
    if got is None:
        got = build_env_class(cfg)
        _CACHE[chash] = got
    return got


# --- shared row plumbing ---------------------------------------------------------

def _row(rid: str, r: int, t: int, pred: str, seed64: int) -> dict:
    row = dict.fromkeys(COLUMNS)
    row["run_id"] = rid
    row["trajectory"] = r
    row["step"] = t
    row["predictor"] = pred
    row["seed"] = seed64
    return row


def _checkpoint_list(cfg: dict) -> list[int]:
    cps = cfg["checkpoints"]
    if cps == "all":
        return list(range(1, cfg["steps"] + 1))
    return list(cps)


def _trajectory_seed(cfg: dict, r: int) -> tuple[np.random.Generator, int]:
    ss = np.random.SeedSequence(entropy=cfg["seed"], spawn_key=(r,))
    seed64 = int(ss.generate_state(1, dtype=np.uint64)[0])
    return np.random.default_rng(ss), seed64


# --- sequence trajectories -------------------------------------------------------

def _sequence_trajectory(cfg: dict, r: int, collect_rows: bool):
    chash = config_hash(cfg)
    mc = _model_class_for(cfg, chash)
    rid = chash[:12]
    L, h = cfg["steps"], cfg["horizon"]
    preds = list(cfg["predictors"])
    dist_cfg = cfg["distance"]
    estimator = dist_cfg["estimator"]
    window = cfg["report"]["window"]
    cps = _checkpoint_list(cfg)

    rng, seed64 = _trajectory_seed(cfg, r)
    x = mc.truth.sample_path(L, rng)

    n = mc.enumerated_count
    ti = mc.truth_index - 1
    rows3 = pred_bank(mc.bank(), x)          # (n, L+1, A) conditional rows
    tcol = np.arange(L + 1)
    picks = rows3[:, np.arange(L), x]
    with np.errstate(divide="ignore"):
        logpicks = np.log2(picks)
    cum = np.zeros((n, L + 1))               # cumulative log2 marginals
    np.cumsum(logpicks, axis=1, out=cum[:, 1:])

    codelengths = mc.codelengths(n)
    scores = codelengths[:, None] - cum
    sel = np.argmin(scores, axis=0)          # ties: lowest index

    weights = mc.prior_weights(n)
    with np.errstate(divide="ignore"):
        logw = np.log2(weights)
    joint = logw[:, None] + cum
    bayes_cum = np.logaddexp2.reduce(joint, axis=0)
    post = np.exp2(joint - joint.max(axis=0))
    post /= post.sum(axis=0)
    map_sel = np.argmax(post, axis=0)        # posterior mode, ties: lowest index

    sel_arrays = {"mdl": sel, "mdli": sel, "map": map_sel, "bayes": map_sel}

    mdli_cum = None
    if "mdli" in preds:
        # product of the per-step selected conditionals; a zero factor
        # makes every later cumulative value -inf, as it should
        step_log = logpicks[sel[:L], np.arange(L)]
        mdli_cum = np.concatenate(([0.0], np.cumsum(step_log)))

    # exact one-step distances are cheap for every position at once
    truth_rows = rows3[ti]
    d1: dict[str, np.ndarray] = {}
    if h == 1 and estimator != "none":
        for p in preds:
            if p not in _MEASURE_PREDICTORS:
                continue
            if p == "bayes":
                pred_rows = np.einsum("nt,nta->ta", post, rows3)
            else:
                pred_rows = rows3[sel_arrays[p], tcol]
            d1[p] = np.abs(truth_rows - pred_rows).sum(axis=1)

    summary: dict = {"trajectory": r, "seed": seed64}
    summary["final_selected"] = {}
    summary["flips"] = {}
    for p in preds:
        if p in _MEASURE_PREDICTORS:
            arr = sel_arrays[p]
            summary["final_selected"][p] = int(arr[L]) + 1
            summary["flips"][p] = int(np.count_nonzero(arr[1:] != arr[:-1]))
    summary["max_log_ratio"] = [float(v) for v in (cum - cum[ti]).max(axis=1)]
    if d1:
        summary["eq2_sum"] = {p: float(math.fsum(v[:L])) for p, v in d1.items()}
        # squared half-distance (a squared total-variation proxy); its
        # cumulative expectation is what the classic merging bounds cap
        summary["eq2_half_sq_sum"] = {
            p: float(math.fsum(0.25 * v[:L] * v[:L])) for p, v in d1.items()
        }
        lo = max(0, L - window)
        summary["final_window_median_d"] = {
            p: float(np.median(v[lo:L])) for p, v in d1.items()
        }

    errors: dict[str, int] = {}
    bs_sel = bs_errc = None
    if "bayes-sample" in preds:
        if not mc.is_deterministic():
            raise ClassNotDeterministicError(
                "posterior-sampled prediction counts errors over a deterministic class"
            )
        us = rng.random(L)
        bs_sel = np.empty(L, dtype=np.int64)
        bs_errc = np.empty(L, dtype=np.int64)
        wrong = 0
        for t in range(L):
            i = sample_symbol(post[:, t], float(us[t]))
            bs_sel[t] = i
            if int(np.argmax(rows3[i, t])) != int(x[t]):
                wrong += 1
            bs_errc[t] = wrong
        errors["bayes-sample"] = wrong

    el_sel = el_errc = None
    if "elimination" in preds:
        state = predictors.elimination_init(mc, h)
        el_sel = np.empty(L, dtype=np.int64)
        el_errc = np.empty(L, dtype=np.int64)
        for t in range(L):
            state = predictors.eliminate_step(mc, state, int(x[t]))
            el_sel[t] = next(i + 1 for i, a in enumerate(state.alive) if a)
            el_errc[t] = state.errors
        errors["elimination"] = int(state.errors)

    mj_sel = mj_errc = None
    if "majority" in preds:
        state = predictors.majority_init(mc)
        mj_sel = np.empty(L, dtype=np.int64)
        mj_errc = np.empty(L, dtype=np.int64)
        for t in range(L):
            state = predictors.majority_step(mc, state, int(x[t]))
            mj_sel[t] = int(np.argmax(state.weights)) + 1
            mj_errc[t] = state.errors
        errors["majority"] = int(state.errors)

    if errors:
        summary["errors"] = errors
        if bs_sel is not None:
            summary["final_selected"]["bayes-sample"] = int(bs_sel[L - 1]) + 1
        if el_sel is not None:
            summary["final_selected"]["elimination"] = int(el_sel[L - 1])
        if mj_sel is not None:
            summary["final_selected"]["majority"] = int(mj_sel[L - 1])

    mixture = None
    checkpoint_d: dict[str, dict] = {}

    def _distance(p: str, t: int):
        nonlocal mixture
        if p not in _MEASURE_PREDICTORS or estimator == "none":
            return None, None, ""
        if estimator == "exact" and h == 1:
            return float(d1[p][t]), None, "exact"
        if p == "bayes":
            if mixture is None:
                mixture = predictors.bayes_mixture(mc)
            q = mixture
        else:
            q = mc.measure(int(sel_arrays[p][t]) + 1)
        if estimator == "exact":
            val = metrics.dh_exact(mc.truth, q, x[:t], h, dist_cfg["budget"])
            return float(val), None, "exact"
        est = metrics.dh_monte_carlo(mc.truth, q, x[:t], h,
                                     dist_cfg["mc_samples"], rng)
        return float(est.estimate), float(est.stderr), "mc"

    out_rows = []
    for t in cps:
        for p in preds:
            d_val, d_se, est = _distance(p, t)
            if est:
                checkpoint_d.setdefault(p, {})[str(t)] = d_val
            if not collect_rows:
                continue
            row = _row(rid, r, t, p, seed64)
            row["d_h"], row["d_h_stderr"], row["estimator"] = d_val, d_se, est
            if p == "mdli":
                si = int(sel[t])
                row["selected_index"] = si + 1
                row["score_bits"] = float(-mdli_cum[t])
                row["log_ratio_bits"] = float(mdli_cum[t] - cum[ti, t])
            elif p == "bayes":
                row["selected_index"] = int(map_sel[t]) + 1
                row["score_bits"] = float(-bayes_cum[t])
                row["log_ratio_bits"] = float(bayes_cum[t] - cum[ti, t])
            elif p in ("mdl", "map"):
                si = int(sel_arrays[p][t])
                row["selected_index"] = si + 1
                row["score_bits"] = float(scores[si, t])
                row["log_ratio_bits"] = float(cum[si, t] - cum[ti, t])
            elif p == "bayes-sample":
                row["selected_index"] = int(bs_sel[t - 1]) + 1
                row["errors_cum"] = int(bs_errc[t - 1])
            elif p == "elimination":
                row["selected_index"] = int(el_sel[t - 1])
                row["errors_cum"] = int(el_errc[t - 1])
            elif p == "majority":
                row["selected_index"] = int(mj_sel[t - 1])
                row["errors_cum"] = int(mj_errc[t - 1])
            out_rows.append(row)

    if checkpoint_d:
        summary["checkpoint_d"] = checkpoint_d
    return out_rows, summary


# --- interaction trajectories ----------------------------------------------------

def _rl_trajectory(cfg: dict, r: int, collect_rows: bool):
    chash = config_hash(cfg)
    ec, policy = _env_setup_for(cfg, chash)
    rid = chash[:12]
    rl = cfg["rl"]
    L = cfg["steps"]
    cps = _checkpoint_list(cfg)
    vcps = set(rl["value_checkpoints"])
    probe = set(cps) | vcps | {L}

    rng, seed64 = _trajectory_seed(cfg, r)
    hist = InteractionHistory()
    truth_env = ec.truth

    sel_at: dict[int, object] = {}
    value_at: dict[int, dict] = {}
    for t in range(1, L + 1):
        hist = interact(truth_env, policy, 1, rng, hist)
        if t not in probe:
            continue
        s = discriminative_select(ec, hist)
        sel_at[t] = s
        if t in vcps:
            v_sel = value_estimate(ec.envs[s.index - 1], policy, hist,
                                   rl["gamma"], rl["value_horizon"],
                                   rl["n_rollouts"], rng)
            v_true = value_estimate(truth_env, policy, hist,
                                    rl["gamma"], rl["value_horizon"],
                                    rl["n_rollouts"], rng)
            gap, gap_se = value_gap(v_sel, v_true)
            value_at[t] = {"selected": v_sel.value,
                           "selected_stderr": v_sel.stderr,
                           "true": v_true.value,
                           "true_stderr": v_true.stderr,
                           "gap": gap, "gap_stderr": gap_se}

    final = sel_at[L]
    summary = {
        "trajectory": r,
        "seed": seed64,
        "final_selected": {"mdl": final.index},
        "identified": bool(final.index == ec.truth_index),
        "selected_at": {str(t): sel_at[t].index for t in sorted(sel_at)},
    }
    if value_at:
        summary["value"] = {str(t): value_at[t] for t in sorted(value_at)}

    out_rows = []
    if collect_rows:
        K = np.asarray(ec.codelengths)
        t0 = ec.truth_index - 1
        for t in cps:
            s = sel_at[t]
            logm = K - s.scores
            row = _row(rid, r, t, "mdl", seed64)
            row["selected_index"] = s.index
            row["score_bits"] = float(s.scores[s.index - 1])
            row["log_ratio_bits"] = float(logm[s.index - 1] - logm[t0])
            if t in value_at:
                v = value_at[t]
                row["value_sel"] = v["selected"]
                row["value_true"] = v["true"]
                row["value_gap"] = v["gap"]
            out_rows.append(row)
    return out_rows, summary


# --- the experiment entry point --------------------------------------------------

def _trajectory_task(args):
    cfg, r, collect_rows = args
    if cfg["class"] is not None:
        return _sequence_trajectory(cfg, r, collect_rows)
    return _rl_trajectory(cfg, r, collect_rows)


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None:
        jobs = int(os.environ.get("MDLPREDICT_JOBS", "1") or 1)
    return max(1, int(jobs))


def run_experiment(cfg: dict, jobs: int | None = None,
                   collect_rows: bool = True) -> RunResult:
    """Run every trajectory of a validated config and gather the results.

    ``jobs`` > 1 fans trajectories over worker processes (default from
    MDLPREDICT_JOBS); the output is identical for any worker count.
    ``collect_rows=False`` skips row materialization for large sweeps
    whose checks only need the per-trajectory summaries.
    """
    cfg = validate_config(cfg)
    chash = config_hash(cfg)
    n_traj = cfg["trajectories"]
    tasks = [(cfg, r, collect_rows) for r in range(n_traj)]

    jobs = resolve_jobs(jobs)
    if jobs == 1 or n_traj == 1:
        outs = [_trajectory_task(t) for t in tasks]
    else:
        workers = min(jobs, n_traj)
        chunk = max(1, n_traj // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_trajectory_task, tasks, chunksize=chunk))

    rows: list = []
    summaries: list = []
    for traj_rows, traj_summary in outs:
        rows.extend(traj_rows)
        summaries.append(traj_summary)
    return RunResult(cfg, chash, chash[:12], COLUMNS, rows, summaries)
