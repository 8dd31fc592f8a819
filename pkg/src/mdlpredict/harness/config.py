"""Experiment configuration: loading, merging, validation, hashing.

A configuration is a plain mapping, read from one YAML file (JSON is a
subset). If it names a ``scenario``, the registered scenario supplies the
base configuration and the file's remaining keys override it, recursively
for mappings and wholesale for lists and scalars.

The fully resolved form is canonical: hashing its sorted JSON encoding
gives ``config_hash``, whose first 12 hex digits are the run id that ties
records, summaries and reruns together.
"""

from __future__ import annotations

import copy
import hashlib
import json
import numbers
from typing import Any, Mapping

import yaml

from ..errors import ConfigError

VALID_PREDICTORS = ("mdl", "map", "bayes", "mdli", "bayes-sample", "elimination", "majority")
VALID_ESTIMATORS = ("exact", "mc", "none")

BOUND_KINDS = {
    "elimination-errors": {"attained"},
    "majority-errors": set(),
    "sampled-errors-mean": set(),
    "eq2-mixture": set(),
    "eq2-two-part": set(),
    "ratio-surrogate": {"q_index", "c"},
    "convergence": {"checkpoints", "final_max"},
    "selection-flips": {"min_flips", "max_final_window_median"},
    "value-gap": {"step", "tol", "min_fraction"},
    "identification": set(),
}

_DEFAULTS: dict[str, Any] = {
    "scenario": None,
    "description": "",
    "seed": 0,
    "trajectories": 1,
    "steps": 100,
    "horizon": 1,
    "predictors": ["mdl"],
    "class": None,
    "rl": None,
    "distance": {"estimator": "exact", "mc_samples": 4096, "budget": 2 ** 20},
    "checkpoints": "final",
    "report": {"window": 100},
    "bounds": [],
}

_RL_DEFAULTS: dict[str, Any] = {
    "gamma": 0.5,
    "value_horizon": 20,
    "n_rollouts": 300,
    "value_checkpoints": [],
}


def deep_merge(base: Mapping, override: Mapping) -> dict:
    """Recursive merge: mappings merge key-wise, anything else is replaced."""
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _need(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _is_int(v) -> bool:
    return isinstance(v, numbers.Integral) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, numbers.Real) and not isinstance(v, bool)


def _validate_class(c, path: str) -> None:
    _need(isinstance(c, Mapping), path, "expected a mapping")
    extra = set(c) - {"models", "complexity", "truth_index", "cutoff"}
    _need(not extra, path, f"unknown fields {sorted(extra)}")
    models = c.get("models")
    _need(isinstance(models, list) and models, f"{path}.models", "need a non-empty list")
    for i, m in enumerate(models):
        _need(isinstance(m, Mapping) and "family" in m, f"{path}.models[{i}]",
              "expected a measure mapping with a 'family'")
    comp = c.get("complexity", "two-log")
    if isinstance(comp, str):
        _need(comp in ("two-log", "uniform"), f"{path}.complexity",
              f"unknown rule {comp!r}")
    else:
        _need(isinstance(comp, list) and len(comp) == len(models),
              f"{path}.complexity", "need one codelength per model")
        for i, k in enumerate(comp):
            _need(_is_num(k) and k >= 0, f"{path}.complexity[{i}]", "must be a number >= 0")
    ti = c.get("truth_index")
    _need(_is_int(ti) and 1 <= ti <= len(models), f"{path}.truth_index",
          f"need an index in 1..{len(models)}")


_ENV_KINDS = {
    "bernoulli-reward": {"success"},
    "parity": {"p_even", "p_odd"},
    "deterministic-map": {"outputs", "n_obs"},
}

_POLICY_KINDS = {
    "random": {"probs"},
    "fixed": {"action", "n_actions"},
}


def _validate_rl(c, path: str, steps: int) -> None:
    _need(isinstance(c, Mapping), path, "expected a mapping")
    extra = set(c) - {"envs", "codelengths", "truth_index", "policy",
                      "gamma", "value_horizon", "n_rollouts", "value_checkpoints"}
    _need(not extra, path, f"unknown fields {sorted(extra)}")
    envs = c.get("envs")
    _need(isinstance(envs, list) and envs, f"{path}.envs", "need a non-empty list")
    for i, e in enumerate(envs):
        _need(isinstance(e, Mapping) and e.get("kind") in _ENV_KINDS,
              f"{path}.envs[{i}]", f"expected a mapping with kind in {sorted(_ENV_KINDS)}")
        extra = set(e) - _ENV_KINDS[e["kind"]] - {"kind"}
        _need(not extra, f"{path}.envs[{i}]", f"unknown fields {sorted(extra)}")
    cl = c.get("codelengths")
    _need(isinstance(cl, list) and len(cl) == len(envs),
          f"{path}.codelengths", "need one codelength per environment")
    ti = c.get("truth_index")
    _need(_is_int(ti) and 1 <= ti <= len(envs), f"{path}.truth_index",
          f"need an index in 1..{len(envs)}")
    pol = c.get("policy")
    _need(isinstance(pol, Mapping) and pol.get("kind") in _POLICY_KINDS,
          f"{path}.policy", f"expected a mapping with kind in {sorted(_POLICY_KINDS)}")
    extra = set(pol) - _POLICY_KINDS[pol["kind"]] - {"kind"}
    _need(not extra, f"{path}.policy", f"unknown fields {sorted(extra)}")
    gamma = c["gamma"]
    _need(_is_num(gamma) and 0.0 < gamma < 1.0, f"{path}.gamma", "must lie in (0, 1)")
    _need(_is_int(c["value_horizon"]) and c["value_horizon"] >= 1,
          f"{path}.value_horizon", "must be an integer >= 1")
    _need(_is_int(c["n_rollouts"]) and c["n_rollouts"] >= 2,
          f"{path}.n_rollouts", "must be an integer >= 2")
    vc = c["value_checkpoints"]
    _need(isinstance(vc, list), f"{path}.value_checkpoints", "expected a list of steps")
    for i, t in enumerate(vc):
        _need(_is_int(t) and 1 <= t <= steps, f"{path}.value_checkpoints[{i}]",
              f"need a step in 1..{steps}")


def _validate_bound(b, path: str) -> None:
    _need(isinstance(b, Mapping) and "kind" in b, path, "expected a mapping with a 'kind'")
    kind = b["kind"]
    _need(kind in BOUND_KINDS, f"{path}.kind", f"unknown bound kind {kind!r}")
    extra = set(b) - BOUND_KINDS[kind] - {"kind"}
    _need(not extra, path, f"unknown fields {sorted(extra)} for {kind!r}")


def validate_config(cfg: Mapping) -> dict:
    """Fill defaults and validate; returns the canonical configuration."""
    _need(isinstance(cfg, Mapping), "config", "expected a mapping")
    extra = set(cfg) - set(_DEFAULTS)
    _need(not extra, "config", f"unknown fields {sorted(extra)}")
    out = deep_merge(_DEFAULTS, cfg)

    _need(_is_int(out["seed"]) and out["seed"] >= 0, "seed", "must be an integer >= 0")
    _need(_is_int(out["trajectories"]) and out["trajectories"] >= 1,
          "trajectories", "must be an integer >= 1")
    _need(_is_int(out["steps"]) and out["steps"] >= 1, "steps", "must be an integer >= 1")
    _need(_is_int(out["horizon"]) and out["horizon"] >= 1, "horizon", "must be an integer >= 1")

    preds = out["predictors"]
    _need(isinstance(preds, list) and preds, "predictors", "need a non-empty list")
    for i, p in enumerate(preds):
        _need(p in VALID_PREDICTORS, f"predictors[{i}]",
              f"unknown predictor {p!r}; valid: {', '.join(VALID_PREDICTORS)}")

    has_class = out["class"] is not None
    has_rl = out["rl"] is not None
    _need(has_class != has_rl, "config", "need exactly one of 'class' or 'rl'")
    if has_class:
        _validate_class(out["class"], "class")
    else:
        out["rl"] = deep_merge(_RL_DEFAULTS, out["rl"])
        _validate_rl(out["rl"], "rl", out["steps"])

    dist = out["distance"]
    extra = set(dist) - {"estimator", "mc_samples", "budget"}
    _need(not extra, "distance", f"unknown fields {sorted(extra)}")
    _need(dist["estimator"] in VALID_ESTIMATORS, "distance.estimator",
          f"must be one of {', '.join(VALID_ESTIMATORS)}")
    _need(_is_int(dist["mc_samples"]) and dist["mc_samples"] >= 2,
          "distance.mc_samples", "must be an integer >= 2")
    _need(_is_int(dist["budget"]) and dist["budget"] >= 2,
          "distance.budget", "must be an integer >= 2")

    cps = out["checkpoints"]
    if cps == "final":
        cps = [out["steps"]]
    if isinstance(cps, list):
        _need(all(_is_int(t) for t in cps), "checkpoints", "steps must be integers")
        _need(all(1 <= t <= out["steps"] for t in cps), "checkpoints",
              f"steps must lie in 1..{out['steps']}")
        _need(sorted(set(cps)) == cps, "checkpoints", "steps must be increasing and unique")
    else:
        _need(cps == "all", "checkpoints", "expected 'all', 'final' or a list of steps")
    out["checkpoints"] = cps

    rep = out["report"]
    extra = set(rep) - {"window"}
    _need(not extra, "report", f"unknown fields {sorted(extra)}")
    _need(_is_int(rep["window"]) and rep["window"] >= 1, "report.window",
          "must be an integer >= 1")

    _need(isinstance(out["bounds"], list), "bounds", "expected a list")
    for i, b in enumerate(out["bounds"]):
        _validate_bound(b, f"bounds[{i}]")

    _need(isinstance(out["description"], str), "description", "expected a string")
    return out


def resolve_config(raw: Mapping) -> dict:
    """Expand a scenario reference (if any), merge overrides, validate."""
    _need(isinstance(raw, Mapping), "config", "expected a mapping")
    name = raw.get("scenario")
    if name is None:
        return validate_config(raw)
    from . import scenarios  # deferred: scenarios builds on this module

    overrides = {k: v for k, v in raw.items() if k != "scenario"}
    return scenarios.scenario_config(name, overrides)


def load_config(path: str) -> dict:
    """Read one YAML/JSON file and return the resolved canonical config."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not parseable as YAML ({exc})") from exc
    if raw is None:
        raise ConfigError(f"{path}: the file is empty")
    return resolve_config(raw)


def config_hash(canonical: Mapping) -> str:
    """sha256 over the sorted JSON encoding of the canonical config."""
    blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def run_id_of(canonical: Mapping) -> str:
    return config_hash(canonical)[:12]
