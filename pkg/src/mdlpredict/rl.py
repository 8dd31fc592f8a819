"""Sequential decision layer: environments, policies, and value estimates.

An environment is a chronological conditional measure over percepts: at
step t it sees the actions a_1..a_t and the earlier percepts e_1..e_{t-1}
and gives the distribution of e_t. Causality is enforced by the call
shape (one more action than percepts), not by convention.

Percepts factor into an observation and a reward drawn from a fixed finite
grid, so environments stay finite-alphabet objects and the prediction
machinery applies unchanged: log-scores of environments are sums of log2
conditionals of the percepts actually seen, and the discriminative
two-part selector is the sequence selector with actions threaded through.

Values are truncated discounted reward sums; truncation at horizon T
costs at most ``r_max * gamma**T / (1 - gamma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AllExcludedError, InvalidSpecError
from .measures import Measure, sample_symbol

NEG_INF = float("-inf")


# --- percepts and histories ----------------------------------------------------

@dataclass(frozen=True)
class PerceptSpace:
    """Finite percept alphabet factored as observation x reward-grid index."""

    n_obs: int
    reward_grid: tuple[float, ...]

    def __post_init__(self):
        if self.n_obs < 1:
            raise InvalidSpecError("n_obs: must be >= 1")
        if len(self.reward_grid) < 1:
            raise InvalidSpecError("reward_grid: must be non-empty")
        object.__setattr__(self, "reward_grid", tuple(float(r) for r in self.reward_grid))

    @property
    def size(self) -> int:
        return self.n_obs * len(self.reward_grid)

    def percept(self, obs: int, reward_index: int) -> int:
        return obs * len(self.reward_grid) + reward_index

    def observation(self, percept: int) -> int:
        return percept // len(self.reward_grid)

    def reward(self, percept: int) -> float:
        return self.reward_grid[percept % len(self.reward_grid)]

    @property
    def max_reward(self) -> float:
        return max(self.reward_grid)


@dataclass(frozen=True)
class InteractionHistory:
    """A completed action/percept record: one percept per action."""

    actions: tuple[int, ...] = ()
    percepts: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.actions) != len(self.percepts):
            raise InvalidSpecError("history: one percept per action")

    def __len__(self) -> int:
        return len(self.actions)

    def step(self, action: int, percept: int) -> "InteractionHistory":
        return InteractionHistory(self.actions + (int(action),),
                                  self.percepts + (int(percept),))

    def rewards(self, space: PerceptSpace) -> np.ndarray:
        return np.array([space.reward(e) for e in self.percepts])


# --- environments ---------------------------------------------------------------

class Environment:
    """Chronological conditional measure over percepts."""

    space: PerceptSpace
    n_actions: int

    def percept_distribution(self, actions: Sequence[int],
                             percepts: Sequence[int]) -> np.ndarray:
        """Distribution of the next percept given a_1..a_t, e_1..e_{t-1}.

        ``len(actions)`` must equal ``len(percepts) + 1``.
        """
        raise NotImplementedError

    def _check_call(self, actions, percepts) -> None:
        if len(actions) != len(percepts) + 1:
            raise ValueError("need exactly one action beyond the percepts seen")


class ActionRewardEnv(Environment):
    """Percept depends on the current action only, i.i.d. across steps."""

    def __init__(self, space: PerceptSpace, table) -> None:
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2 or table.shape[1] != space.size:
            raise InvalidSpecError("table: expected shape (n_actions, space.size)")
        for a in range(table.shape[0]):
            row = table[a]
            if np.any(row < 0) or abs(float(row.sum()) - 1.0) > 1e-9:
                raise InvalidSpecError(f"table[{a}]: not a distribution")
        table.setflags(write=False)
        self.space = space
        self.table = table
        self.n_actions = int(table.shape[0])

    def percept_distribution(self, actions, percepts) -> np.ndarray:
        self._check_call(actions, percepts)
        return self.table[actions[-1]]


def bernoulli_reward_env(success: Sequence[float]) -> ActionRewardEnv:
    """Reward 1 with probability success[a] for action a; no observations."""
    space = PerceptSpace(1, (0.0, 1.0))
    table = np.stack([[1.0 - s, s] for s in success])
    return ActionRewardEnv(space, table)


class ParityEnv(Environment):
    """Reward odds depend on the parity of all past actions.

    The percept law is a function of the entire action history, so no
    fixed-order Markov model in the percepts reproduces it.
    """

    def __init__(self, p_even: float, p_odd: float) -> None:
        for name, v in (("p_even", p_even), ("p_odd", p_odd)):
            if not 0.0 <= v <= 1.0:
                raise InvalidSpecError(f"{name}: must lie in [0, 1]")
        self.space = PerceptSpace(1, (0.0, 1.0))
        self.n_actions = 2
        self.p_even = float(p_even)
        self.p_odd = float(p_odd)

    def percept_distribution(self, actions, percepts) -> np.ndarray:
        self._check_call(actions, percepts)
        p = self.p_even if sum(actions) % 2 == 0 else self.p_odd
        return np.array([1.0 - p, p])


class MeasureEnvironment(Environment):
    """A plain measure acting as an environment that ignores actions.

    Percepts are the measure's symbols with zero reward attached; with the
    action stream irrelevant, discriminative selection degenerates to
    ordinary sequence selection over the wrapped measures.
    """

    def __init__(self, measure: Measure, n_actions: int = 1) -> None:
        self.measure = measure
        self.space = PerceptSpace(measure.alphabet_size, (0.0,))
        self.n_actions = int(n_actions)

    def percept_distribution(self, actions, percepts) -> np.ndarray:
        self._check_call(actions, percepts)
        return self.measure.predictive_distribution(list(percepts))


# --- policies --------------------------------------------------------------------

class Policy:
    """Maps a history and one uniform draw to an action (deterministically)."""

    n_actions: int

    def action(self, history: InteractionHistory, u: float) -> int:
        raise NotImplementedError


class FixedActionPolicy(Policy):
    def __init__(self, action: int, n_actions: int) -> None:
        self.n_actions = n_actions
        self._action = int(action)

    def action(self, history, u) -> int:
        return self._action


class RandomActionPolicy(Policy):
    """Actions i.i.d. from a fixed distribution, driven by the uniform."""

    def __init__(self, probs: Sequence[float]) -> None:
        probs = np.asarray(probs, dtype=np.float64)
        if np.any(probs < 0) or abs(float(probs.sum()) - 1.0) > 1e-9:
            raise InvalidSpecError("probs: not a distribution")
        self.probs = probs
        self.n_actions = int(probs.size)

    def action(self, history, u) -> int:
        return sample_symbol(self.probs, u)


def interact(env: Environment, policy: Policy, steps: int,
             rng: np.random.Generator,
             history: InteractionHistory | None = None) -> InteractionHistory:
    """Run the action/percept loop for ``steps`` steps (two uniforms each)."""
    h = history if history is not None else InteractionHistory()
    for _ in range(steps):
        a = policy.action(h, float(rng.random()))
        dist = env.percept_distribution(h.actions + (a,), h.percepts)
        e = sample_symbol(dist, float(rng.random()))
        h = h.step(a, e)
    return h


# --- discriminative selection ------------------------------------------------------

def env_log_marginal(env: Environment, history: InteractionHistory) -> float:
    """log2 of the percept stream's probability under ``env``, actions given."""
    total = 0.0
    for t in range(len(history)):
        dist = env.percept_distribution(history.actions[:t + 1], history.percepts[:t])
        p = float(dist[history.percepts[t]])
        if p == 0.0:
            return NEG_INF
        total += math.log2(p)
    return total


class EnvironmentClass:
    """Finitely many candidate environments with codelengths in bits."""

    def __init__(self, envs: Sequence[Environment], codelengths: Sequence[float],
                 truth_index: int | None = None) -> None:
        envs = list(envs)
        if not envs:
            raise InvalidSpecError("envs: must be non-empty")
        if len(codelengths) != len(envs):
            raise InvalidSpecError("codelengths: need one per environment")
        sizes = {e.space.size for e in envs}
        if len(sizes) > 1:
            raise InvalidSpecError("envs: must share one percept space size")
        self.envs = envs
        self.codelengths = np.asarray(codelengths, dtype=np.float64)
        if truth_index is not None and not 1 <= truth_index <= len(envs):
            raise InvalidSpecError("truth_index: out of range")
        self.truth_index = truth_index

    @property
    def truth(self) -> Environment:
        if self.truth_index is None:
            raise InvalidSpecError("truth_index: not set")
        return self.envs[self.truth_index - 1]


class EnvSelection(NamedTuple):
    index: int
    scores: np.ndarray


def discriminative_select(ec: EnvironmentClass, history: InteractionHistory) -> EnvSelection:
    """Two-part selection over environments given the interaction so far.

    Only the percept stream is scored; the actions are conditioning
    information. Ties pick the lowest index.
    """
    logm = np.array([env_log_marginal(e, history) for e in ec.envs])
    scores = ec.codelengths - logm
    best = int(np.argmin(scores))
    if not np.isfinite(scores[best]):
        raise AllExcludedError("every environment assigns the percepts probability zero")
    return EnvSelection(best + 1, scores)


# --- values -----------------------------------------------------------------------

class ValueEstimate(NamedTuple):
    value: float
    stderr: float
    n_rollouts: int


def truncation_error(gamma: float, horizon: int, max_reward: float) -> float:
    """Upper bound on the value mass an horizon-T truncation discards."""
    return max_reward * gamma ** horizon / (1.0 - gamma)


def value_estimate(env: Environment, policy: Policy, history: InteractionHistory,
                   gamma: float, horizon: int, n_rollouts: int,
                   rng: np.random.Generator) -> ValueEstimate:
    """Monte Carlo estimate of the truncated discounted value from here on.

    Rolls the interaction forward ``horizon`` steps ``n_rollouts`` times
    under ``env`` and ``policy`` and averages ``sum_k gamma**(k-1) r_k``.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if horizon < 1 or n_rollouts < 1:
        raise ValueError("horizon and n_rollouts must be >= 1")
    discounts = gamma ** np.arange(horizon)
    totals = np.empty(n_rollouts)
    for r in range(n_rollouts):
        rolled = interact(env, policy, horizon, rng, history)
        rewards = rolled.rewards(env.space)[len(history):]
        totals[r] = float(discounts @ rewards)
    stderr = float(totals.std(ddof=1) / math.sqrt(n_rollouts)) if n_rollouts > 1 else 0.0
    return ValueEstimate(float(totals.mean()), stderr, n_rollouts)


def value_gap(selected: ValueEstimate, true: ValueEstimate) -> tuple[float, float]:
    """Absolute value difference and the combined standard error."""
    gap = abs(selected.value - true.value)
    stderr = math.hypot(selected.stderr, true.stderr)
    return gap, stderr
