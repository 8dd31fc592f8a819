"""Registered experiment scenarios.

Each scenario builds a complete configuration exercising one theoretical
claim at desk scale; user overrides are merged in before dependent pieces
(model patterns, bound parameters) are derived, so overriding, say, the
horizon regenerates the class to match.
"""

from __future__ import annotations

from typing import Callable, Mapping

from ..errors import ConfigError
from .config import deep_merge, validate_config

_REGISTRY: dict[str, tuple[str, Callable[[dict], dict]]] = {}


def _scenario(name: str, description: str):
    def wrap(fn: Callable[[dict], dict]):
        _REGISTRY[name] = (description, fn)
        return fn
    return wrap


def list_scenarios() -> list[tuple[str, str]]:
    """(name, description) pairs of every registered scenario."""
    return [(name, desc) for name, (desc, _) in sorted(_REGISTRY.items())]


def scenario_config(name: str, overrides: Mapping | None = None) -> dict:
    """Build a scenario's canonical config with ``overrides`` merged in."""
    if name not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY))
        raise ConfigError(f"scenario: unknown scenario {name!r}; known: {known}")
    overrides = dict(overrides or {})
    _, build = _REGISTRY[name]
    cfg = build(overrides)
    cfg = deep_merge(cfg, overrides)
    cfg["scenario"] = name
    return validate_config(cfg)


# --- deterministic classes ------------------------------------------------------

@_scenario("det-elimination",
           "h-step elimination over nested all-ones prefixes; errors attain h(m-1)")
def _det_elimination(overrides: dict) -> dict:
    h = int(overrides.get("horizon", 1))
    m = 4
    models = [
        {"family": "deterministic", "pattern": [1] * (i * h), "tail_symbol": 0,
         "alphabet_size": 2}
        for i in range(1, m + 1)
    ]
    return {
        "description": "elimination learner on the worst-case nested deterministic class",
        "trajectories": 100,
        "steps": h * (m + 1),
        "horizon": h,
        "predictors": ["elimination"],
        "class": {"models": models, "complexity": "uniform", "truth_index": m},
        "distance": {"estimator": "none"},
        "checkpoints": "final",
        "bounds": [{"kind": "elimination-errors", "attained": h * (m - 1)}],
    }


def _expansion_models(n_bits: int) -> list[dict]:
    # model i realizes the n-bit binary expansion of (i-1)/2**n, then zeros
    models = []
    for i in range(1, 2 ** n_bits):
        pattern = [(i - 1) >> (n_bits - 1 - j) & 1 for j in range(n_bits)]
        models.append({"family": "deterministic", "pattern": pattern,
                       "tail_symbol": 0, "alphabet_size": 2})
    return models


@_scenario("det-majority",
           "weighted majority over all 6-bit expansions; errors stay under log2 of the class size")
def _det_majority(overrides: dict) -> dict:
    n_bits = 6
    models = _expansion_models(n_bits)
    return {
        "description": "majority and posterior-sampled prediction on the binary-expansion class",
        "trajectories": 100,
        "steps": n_bits + 2,
        "predictors": ["majority", "bayes-sample"],
        "class": {"models": models, "complexity": "uniform",
                  "truth_index": len(models)},
        "distance": {"estimator": "none"},
        "checkpoints": "final",
        "bounds": [{"kind": "majority-errors"}, {"kind": "sampled-errors-mean"}],
    }


# --- stochastic sequence classes ---------------------------------------------------

@_scenario("bernoulli-pair",
           "two Bernoulli models, equal one-bit codes; regret and ratio bounds")
def _bernoulli_pair(overrides: dict) -> dict:
    return {
        "description": "fair-coin truth against Bernoulli(0.75) with one-bit codelengths",
        "trajectories": 1000,
        "steps": 1000,
        "horizon": 1,
        "predictors": ["mdl", "bayes"],
        "class": {
            "models": [{"family": "bernoulli", "theta": 0.5},
                       {"family": "bernoulli", "theta": 0.75}],
            "complexity": [1.0, 1.0],
            "truth_index": 1,
        },
        "distance": {"estimator": "exact"},
        "checkpoints": "final",
        "bounds": [
            {"kind": "eq2-mixture"},
            {"kind": "eq2-two-part"},
            {"kind": "ratio-surrogate", "q_index": 2, "c": [2, 4, 8]},
        ],
    }


@_scenario("markov-class",
           "order-1 Markov truth among misspecified rivals; block distances vanish")
def _markov_class(overrides: dict) -> dict:
    return {
        "description": "Markov truth hidden behind simpler i.i.d. models under two-log codes",
        "trajectories": 200,
        "steps": 2000,
        "horizon": 4,
        "predictors": ["mdl"],
        "class": {
            "models": [
                {"family": "bernoulli", "theta": 0.5},
                {"family": "markov", "order": 1, "initial": [0.5, 0.5],
                 "transition": [[0.8, 0.2], [0.3, 0.7]]},
                {"family": "markov", "order": 1, "initial": [0.5, 0.5],
                 "transition": [[0.5, 0.5], [0.9, 0.1]]},
                {"family": "bernoulli", "theta": 0.7},
            ],
            "complexity": "two-log",
            "truth_index": 2,
        },
        "distance": {"estimator": "exact"},
        "checkpoints": [100, 500, 2000],
        "bounds": [{"kind": "convergence", "checkpoints": [100, 500, 2000],
                    "final_max": 0.01}],
    }


@_scenario("trouble-osc",
           "oscillating near-miss rival keeps flipping the selection while distances stay small")
def _trouble_osc(overrides: dict) -> dict:
    return {
        "description": "selection churn without prediction harm: an oscillating Bernoulli rival",
        "trajectories": 20,
        "steps": 10000,
        "horizon": 1,
        "predictors": ["mdl"],
        "class": {
            "models": [
                {"family": "osc_bernoulli", "theta0": 0.5, "amplitude": 0.008,
                 "clip_eps": 0.01, "decay": 0.05},
                {"family": "bernoulli", "theta": 0.5},
            ],
            "complexity": [1.0, 1.0],
            "truth_index": 2,
        },
        "distance": {"estimator": "exact"},
        "checkpoints": "final",
        "report": {"window": 100},
        "bounds": [{"kind": "selection-flips", "min_flips": 10,
                    "max_final_window_median": 0.02}],
    }


@_scenario("branching-nonergodic",
           "branch-committed truth: distances vanish although the truth is never identified on one branch")
def _branching_nonergodic(overrides: dict) -> dict:
    sub_half = {"family": "bernoulli", "theta": 0.5}
    return {
        "description": "prediction without identification on a branching, non-mixing process",
        "trajectories": 200,
        "steps": 2000,
        "horizon": 4,
        "predictors": ["mdl"],
        "class": {
            "models": [
                {"family": "branching", "first_step": [0.5, 0.5],
                 "branches": [{"family": "bernoulli", "theta": 0.2}, sub_half]},
                {"family": "branching", "first_step": [0.5, 0.5],
                 "branches": [{"family": "bernoulli", "theta": 0.9}, sub_half]},
                {"family": "bernoulli", "theta": 0.7},
            ],
            "complexity": "two-log",
            "truth_index": 2,
        },
        "distance": {"estimator": "exact"},
        "checkpoints": [100, 500, 2000],
        "bounds": [{"kind": "convergence", "checkpoints": [100, 500, 2000],
                    "final_max": 0.01}],
    }


# --- decision scenarios --------------------------------------------------------------

@_scenario("rl-two-env",
           "two candidate reward laws; value under the selected one converges to the truth's")
def _rl_two_env(overrides: dict) -> dict:
    return {
        "description": "discriminative selection between reward environments, judged by value gap",
        "trajectories": 100,
        "steps": 500,
        "predictors": ["mdl"],
        "rl": {
            "envs": [
                {"kind": "bernoulli-reward", "success": [0.1, 0.9]},
                {"kind": "bernoulli-reward", "success": [0.5, 0.5]},
            ],
            "codelengths": [1.0, 1.0],
            "truth_index": 1,
            "policy": {"kind": "random", "probs": [0.4, 0.6]},
            "gamma": 0.5,
            "value_horizon": 20,
            "n_rollouts": 300,
            "value_checkpoints": [500],
        },
        "distance": {"estimator": "none"},
        "checkpoints": [100, 500],
        "bounds": [{"kind": "value-gap", "step": 500, "tol": 0.05,
                    "min_fraction": 0.95}],
    }


@_scenario("discriminative-regression",
           "four deterministic response maps; the true one is pinned down from interaction")
def _discriminative_regression(overrides: dict) -> dict:
    outputs = [[0, 1, 2, 3], [0, 1, 3, 2], [1, 0, 2, 3], [3, 2, 1, 0]]
    return {
        "description": "exact identification of a deterministic action-to-observation map",
        "trajectories": 50,
        "steps": 40,
        "predictors": ["mdl"],
        "rl": {
            "envs": [{"kind": "deterministic-map", "outputs": o, "n_obs": 4}
                     for o in outputs],
            "codelengths": [2.0, 2.0, 2.0, 2.0],
            "truth_index": 1,
            "policy": {"kind": "random", "probs": [0.25, 0.25, 0.25, 0.25]},
            "gamma": 0.5,
            "value_horizon": 10,
            "n_rollouts": 2,
            "value_checkpoints": [],
        },
        "distance": {"estimator": "none"},
        "checkpoints": [10, 40],
        "bounds": [{"kind": "identification"}],
    }
