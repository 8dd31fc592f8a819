"""Distances and diagnostics between measures along observed prefixes.

The central quantity is the h-step block distance

    d_h(P, Q | x) = sum over blocks z of length h of |P(z|x) - Q(z|x)|,

computed exactly by enumerating the A**h blocks or estimated without bias
by sampling blocks from the even mixture (P+Q)/2 and averaging
``|P - Q| / mix``. Exact enumeration is capped by an explicit budget;
past it the caller is pointed at the estimator rather than silently
switched, since the two have different error characteristics.

Cumulative statistics use compensated (Kahan) summation so that reported
sums of many small distances do not drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import _engine as engine
from .errors import BudgetExceededError, UndefinedConditionalError
from .measures import Measure, sample_symbol

NEG_INF = float("-inf")

# largest A**h enumerated exactly by default (4096 blocks at A=2, h=12)
DEFAULT_DH_BUDGET = 2 ** 20


def kahan_cumsum(values) -> np.ndarray:
    """Running sums with Kahan compensation, same length as the input."""
    out = np.empty(len(values))
    total = 0.0
    carry = 0.0
    for i, v in enumerate(values):
        y = float(v) - carry
        t = total + y
        carry = (t - total) - y
        total = t
        out[i] = total
    return out


def _check_pair(p: Measure, q: Measure, x) -> np.ndarray:
    if p.alphabet_size != q.alphabet_size:
        raise ValueError("the two measures live on different alphabets")
    x = np.ascontiguousarray(x, dtype=np.int64)
    if p.log_marginal(x) == NEG_INF or q.log_marginal(x) == NEG_INF:
        raise UndefinedConditionalError(
            "block distance undefined: the prefix has probability zero"
        )
    return x


def dh_exact(p: Measure, q: Measure, x, h: int, budget: int = DEFAULT_DH_BUDGET) -> float:
    """Exact d_h(P, Q | x) by enumerating all length-h blocks."""
    if h < 1:
        raise ValueError("h must be >= 1")
    x = _check_pair(p, q, x)
    if p.alphabet_size ** h > budget:
        raise BudgetExceededError(
            f"{p.alphabet_size}**{h} blocks exceed the budget {budget}; "
            "use dh_monte_carlo for horizons this deep"
        )
    diffs = np.abs(p.block_probs(x, h) - q.block_probs(x, h))
    return math.fsum(diffs.tolist())


class MCEstimate(NamedTuple):
    estimate: float
    stderr: float
    n: int


def dh_monte_carlo(p: Measure, q: Measure, x, h: int, n: int,
                   rng: np.random.Generator) -> MCEstimate:
    """Unbiased Monte Carlo estimate of d_h(P, Q | x).

    Draws each block from the even mixture of the two conditionals and
    averages ``|P(z|x) - Q(z|x)| / mix(z|x)``; the expectation of that
    score is exactly d_h. Consumes ``n * (h+1)`` uniforms from ``rng``.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    if n < 2:
        raise ValueError("need at least 2 samples for a standard error")
    x = _check_pair(p, q, x)
    uniforms = rng.random((n, h + 1))
    try:
        bank = engine.bank_of([p.encode(), q.encode()])
    except NotImplementedError:
        scores = _mc_scores_generic(p, q, x, h, uniforms)
    else:
        scores = engine.mc_block_scores(bank, 0, 1, x, h, uniforms)
    estimate = float(scores.mean())
    stderr = float(scores.std(ddof=1) / math.sqrt(n))
    return MCEstimate(estimate, stderr, n)


def _mc_scores_generic(p: Measure, q: Measure, x: np.ndarray, h: int,
                       uniforms: np.ndarray) -> np.ndarray:
    """Measure-API fallback for mixtures and other unencodable measures."""
    scores = np.empty(uniforms.shape[0])
    for i in range(uniforms.shape[0]):
        chosen = p if uniforms[i, 0] < 0.5 else q
        prefix = list(x)
        pp, qq = 1.0, 1.0
        for j in range(h):
            row_p = p.predictive_distribution(prefix) if pp > 0.0 else None
            row_q = q.predictive_distribution(prefix) if qq > 0.0 else None
            row = row_p if chosen is p else row_q
            s = sample_symbol(row, float(uniforms[i, 1 + j]))
            pp *= row_p[s] if row_p is not None else 0.0
            qq *= row_q[s] if row_q is not None else 0.0
            prefix.append(s)
        scores[i] = abs(pp - qq) / (0.5 * (pp + qq))
    return scores


# --- per-step traces ----------------------------------------------------------

@dataclass(frozen=True)
class StepDistance:
    step: int         # 1-based position the prefix ends at
    value: float
    estimator: str    # "exact" or "mc"
    stderr: float     # 0.0 for exact values


@dataclass(frozen=True)
class DistanceReport:
    """Per-step block distances along one trajectory, with running sums."""

    h: int
    steps: tuple[StepDistance, ...]

    @property
    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.steps])

    @property
    def cumulative(self) -> np.ndarray:
        return kahan_cumsum([s.value for s in self.steps])

    @property
    def total(self) -> float:
        return float(self.cumulative[-1]) if self.steps else 0.0


def distance_report(h: int, values: Sequence[float], estimator: str = "exact",
                    stderrs: Sequence[float] | None = None) -> DistanceReport:
    steps = tuple(
        StepDistance(i + 1, float(v), estimator,
                     0.0 if stderrs is None else float(stderrs[i]))
        for i, v in enumerate(values)
    )
    return DistanceReport(h, steps)


@dataclass(frozen=True)
class LogRatioTrace:
    """The trace log2 Q(x_{1:t}) / P(x_{1:t}) along one sequence.

    If either marginal hits zero the trace is absorbed: the value at that
    step is ``+inf`` (P vanished), ``-inf`` (Q vanished) or ``nan`` (both),
    and later steps are flagged as ``nan`` rather than computed. Summary
    statistics are taken over the finite part, relative to its last value.
    """

    values: np.ndarray
    absorbed_at: int | None      # 1-based step of absorption, None if none
    absorbed_sign: int           # +1 P vanished, -1 Q vanished, 0 both/none
    final: float                 # last finite value (nan if none exists)
    sign_changes: int            # sign flips of (finite trace - final)
    window_max: float
    window_min: float


def log_ratio_trace(q: Measure, p: Measure, omega, window: int = 100) -> LogRatioTrace:
    """Trace of the log ratio of Q to P along the observed sequence.

    ``window`` controls how many trailing finite steps feed the
    window_max/window_min summary fields.
    """
    omega = np.ascontiguousarray(omega, dtype=np.int64)
    if omega.size == 0:
        raise ValueError("need at least one observed symbol")
    if window < 1:
        raise ValueError("window must be >= 1")
    cq = q.cumulative_log_marginal(omega)[1:]
    cp = p.cumulative_log_marginal(omega)[1:]

    q_dead = np.flatnonzero(cq == NEG_INF)
    p_dead = np.flatnonzero(cp == NEG_INF)
    first_q = int(q_dead[0]) if q_dead.size else omega.size
    first_p = int(p_dead[0]) if p_dead.size else omega.size
    cut = min(first_q, first_p)

    values = np.full(omega.size, np.nan)
    values[:cut] = cq[:cut] - cp[:cut]

    if cut == omega.size:
        absorbed_at, sign = None, 0
    else:
        absorbed_at = cut + 1
        if first_p < first_q:
            values[cut], sign = np.inf, 1
        elif first_q < first_p:
            values[cut], sign = NEG_INF, -1
        else:
            sign = 0  # both vanished at once: the ratio has no limit side

    finite = values[:cut]
    if finite.size == 0:
        final = float("nan")
        changes = 0
        wmax = wmin = float("nan")
    else:
        final = float(finite[-1])
        rel = np.sign(finite - final)
        rel = rel[rel != 0.0]
        changes = int(np.sum(rel[1:] != rel[:-1])) if rel.size > 1 else 0
        tail = finite[-window:]
        wmax = float(tail.max())
        wmin = float(tail.min())

    return LogRatioTrace(values, absorbed_at, sign, final, changes, wmax, wmin)
