"""Predictors over a model class.

Batch selectors score every enumerated model against the observed prefix;
online learners carry immutable state records through per-step updates, so
shared use across threads is safe by construction.

Scores and log-probabilities are in bits. A model that assigns the prefix
probability zero scores ``+inf`` and can never be selected; if every
enumerated model is excluded the selectors raise
:class:`~mdlpredict.errors.AllExcludedError`.

Tie rules are pinned: score ties select the lowest index, vote ties the
lowest symbol.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import _engine as engine
from .errors import AllExcludedError, ClassNotDeterministicError
from .measures import Measure, MixtureMeasure, sample_symbol
from .model_class import ModelClass

NEG_INF = float("-inf")


# --- shared scoring ----------------------------------------------------------

def cumulative_log_marginals(mc: ModelClass, x, upto: int | None = None) -> np.ndarray:
    """log2 Q_i(x_{1:l}) for every enumerated model i and every l=0..len(x).

    Shape (n, len(x)+1); column 0 is zeros, excluded prefixes are ``-inf``.
    """
    x = np.ascontiguousarray(x, dtype=np.int64)
    rows = engine.pred_bank(mc.bank(upto), x)
    n = rows.shape[0]
    out = np.zeros((n, x.size + 1))
    if x.size:
        picks = rows[:, np.arange(x.size), x]
        with np.errstate(divide="ignore"):
            np.cumsum(np.log2(picks), axis=1, out=out[:, 1:])
    return out


def log_marginals(mc: ModelClass, x, upto: int | None = None) -> np.ndarray:
    """log2 Q_i(x) for every enumerated model (vector of length n)."""
    return cumulative_log_marginals(mc, x, upto)[:, -1]


def two_part_scores(mc: ModelClass, x, upto: int | None = None) -> np.ndarray:
    """K(i) - log2 Q_i(x) for every enumerated model, in bits."""
    upto = mc.enumerated_count if upto is None else upto
    return mc.codelengths(upto) - log_marginals(mc, x, upto)


class Selection(NamedTuple):
    index: int            # 1-based selected model
    scores: np.ndarray    # two-part scores of all enumerated models


def _argmin_selection(scores: np.ndarray) -> int:
    best = int(np.argmin(scores))
    if not np.isfinite(scores[best]):
        raise AllExcludedError(
            "every enumerated model assigns the prefix probability zero"
        )
    return best + 1


def mdl_select(mc: ModelClass, x) -> Selection:
    """Minimize the two-part score K(i) - log2 Q_i(x); ties pick the lowest index."""
    scores = two_part_scores(mc, x)
    return Selection(_argmin_selection(scores), scores)


def mdl_predict(mc: ModelClass, x) -> np.ndarray:
    """One-step predictive distribution of the currently selected model."""
    sel = mdl_select(mc, x)
    return mc.measure(sel.index).predictive_distribution(x)


def map_select(mc: ModelClass, x) -> int:
    """Model with the largest posterior weight; ties pick the lowest index.

    With weights w_i = 2**-K(i) the posterior order is the reverse of the
    two-part score order, so this must agree with :func:`mdl_select`. The
    two routes are kept separate so that the agreement stays a checkable
    fact rather than a definition.
    """
    post = bayes_posterior(mc, x)
    return int(np.argmax(post)) + 1


# --- mixture (Bayes) predictors ------------------------------------------------

def bayes_posterior(mc: ModelClass, x) -> np.ndarray:
    """Posterior over the enumerated models given ``x``.

    The prior is 2**-K(i) normalized over the enumeration; the
    normalization cancels in the posterior, so truncation of a countable
    class only rescales what the cutoff already discarded.
    """
    joint = np.log2(mc.prior_weights()) + log_marginals(mc, x)
    top = joint.max()
    if top == NEG_INF:
        raise AllExcludedError(
            "every enumerated model assigns the prefix probability zero"
        )
    rel = np.exp2(joint - top)
    return rel / rel.sum()


def bayes_predict(mc: ModelClass, x) -> np.ndarray:
    """Posterior-weighted one-step predictive distribution."""
    post = bayes_posterior(mc, x)
    x = np.ascontiguousarray(x, dtype=np.int64)
    rows = engine.pred_bank(mc.bank(), x)[:, -1, :]
    return post @ rows


def bayes_log_marginal(mc: ModelClass, x) -> float:
    """log2 of the prior-weighted mixture probability of ``x``."""
    joint = np.log2(mc.prior_weights()) + log_marginals(mc, x)
    return float(np.logaddexp2.reduce(joint))


def bayes_mixture(mc: ModelClass) -> MixtureMeasure:
    """The mixture over the enumerated models as a measure of its own."""
    return MixtureMeasure(mc.measures(), mc.prior_weights())


# --- MDLI: product of one-step conditionals of the running selection -----------

@dataclass(frozen=True)
class MdliState:
    """Online state of the instantaneous two-part predictor.

    ``selected`` is the model chosen from the prefix seen so far; its
    one-step conditional scores the next symbol, after which selection is
    redone. ``log_prob_bits`` accumulates log2 of those conditionals.
    """

    prefix: tuple[int, ...]
    log_marginals: tuple[float, ...]
    selected: int
    log_prob_bits: float


def mdli_init(mc: ModelClass) -> MdliState:
    n = mc.enumerated_count
    scores = mc.codelengths(n)
    return MdliState((), (0.0,) * n, _argmin_selection(scores), 0.0)


def mdli_step(mc: ModelClass, state: MdliState, x_t: int) -> MdliState:
    """Score ``x_t`` with the selected model's conditional, then reselect."""
    x = np.array(state.prefix, dtype=np.int64)
    rows = engine.pred_bank(mc.bank(), x)[:, -1, :]
    with np.errstate(divide="ignore"):
        steps = np.log2(rows[:, x_t])
    contribution = steps[state.selected - 1]
    # -inf propagates: an excluded model stays excluded
    logm = np.array(state.log_marginals) + steps
    scores = mc.codelengths(len(logm)) - logm
    return MdliState(
        state.prefix + (int(x_t),),
        tuple(float(v) for v in logm),
        _argmin_selection(scores),
        state.log_prob_bits + float(contribution),
    )


def mdli_trace(mc: ModelClass, x) -> tuple[np.ndarray, np.ndarray]:
    """Per-step selections and log2 conditionals along a whole sequence.

    Returns ``(indices, log_conds)`` of length len(x): ``indices[t]`` is
    the model selected from ``x_{<t+1}`` and ``log_conds[t]`` its log2
    probability of ``x_{t+1}``, the step factors of the product measure.
    """
    x = np.ascontiguousarray(x, dtype=np.int64)
    cum = cumulative_log_marginals(mc, x)
    scores = mc.codelengths(cum.shape[0])[:, None] - cum
    indices = np.empty(x.size, dtype=np.int64)
    log_conds = np.empty(x.size)
    for t in range(x.size):
        col = scores[:, t]
        best = int(np.argmin(col))
        if not np.isfinite(col[best]):
            raise AllExcludedError(
                "every enumerated model assigns the prefix probability zero"
            )
        indices[t] = best + 1
        log_conds[t] = cum[best, t + 1] - cum[best, t]
    return indices, log_conds


def mdli_log_marginal(mc: ModelClass, x) -> float:
    """log2 of the product of the running selection's one-step conditionals."""
    _, log_conds = mdli_trace(mc, x)
    return float(np.sum(log_conds))


# --- deterministic elimination --------------------------------------------------

@dataclass(frozen=True)
class EliminationState:
    """State of the h-step elimination learner over a deterministic class.

    Each step the simplest (lowest-index) alive model issues its next
    ``horizon`` symbols as a block; a block is charged one error at the
    first observation that contradicts it and never again. ``pending``
    holds the blocks whose windows are still open, as (issue position,
    symbols) pairs.
    """

    horizon: int
    t: int
    alive: tuple[bool, ...]
    errors: int
    pending: tuple[tuple[int, tuple[int, ...]], ...]


def elimination_init(mc: ModelClass, horizon: int) -> EliminationState:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not mc.is_deterministic():
        raise ClassNotDeterministicError(
            "elimination learning needs a class of deterministic sequences"
        )
    return EliminationState(horizon, 0, (True,) * mc.enumerated_count, 0, ())


def _simplest_alive(state: EliminationState) -> int:
    for i, a in enumerate(state.alive):
        if a:
            return i + 1
    raise AllExcludedError("every model has been eliminated")


def elimination_predict(mc: ModelClass, state: EliminationState) -> tuple[int, ...]:
    """The simplest alive model's next ``horizon`` symbols."""
    m = mc.measure(_simplest_alive(state))
    return tuple(m.symbol_at(state.t + j) for j in range(state.horizon))


def eliminate_step(mc: ModelClass, state: EliminationState, x_t: int) -> EliminationState:
    """Observe one symbol: issue a block, charge contradicted blocks, eliminate."""
    t = state.t
    block = elimination_predict(mc, state)
    pending = list(state.pending) + [(t, block)]

    errors = state.errors
    keep = []
    for t0, b in pending:
        if b[t - t0] != x_t:
            errors += 1          # first contradiction: charge once, retire
        elif t0 + state.horizon - 1 > t:
            keep.append((t0, b)) # still consistent, window still open

    alive = tuple(
        a and mc.measure(i + 1).symbol_at(t) == x_t
        for i, a in enumerate(state.alive)
    )
    if not any(alive):
        raise AllExcludedError("the observed symbol contradicts every remaining model")
    return EliminationState(state.horizon, t + 1, alive, errors, tuple(keep))


# --- weighted majority -----------------------------------------------------------

@dataclass(frozen=True)
class MajorityState:
    """State of the weighted-majority learner over a deterministic class.

    Wrong models lose their entire weight (deterministic models are either
    right or dead). A wrong majority prediction therefore at least halves
    the total alive weight, which is what caps the number of errors.
    """

    t: int
    weights: tuple[float, ...]
    errors: int


def majority_init(mc: ModelClass, weights: Sequence[float] | None = None) -> MajorityState:
    if not mc.is_deterministic():
        raise ClassNotDeterministicError(
            "majority learning needs a class of deterministic sequences"
        )
    if weights is None:
        weights = mc.prior_weights()
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size != mc.enumerated_count or np.any(weights < 0) or weights.sum() <= 0:
        raise ValueError("weights: need a non-negative vector with positive total")
    return MajorityState(0, tuple(float(w) for w in weights), 0)


def _votes(mc: ModelClass, state: MajorityState) -> np.ndarray:
    votes = np.zeros(mc.alphabet_size)
    for i, w in enumerate(state.weights):
        if w > 0.0:
            votes[mc.measure(i + 1).symbol_at(state.t)] += w
    return votes


def majority_predict(mc: ModelClass, state: MajorityState) -> int:
    """Symbol with the largest alive weight; ties pick the lowest symbol."""
    return int(np.argmax(_votes(mc, state)))


def majority_step(mc: ModelClass, state: MajorityState, x_t: int) -> MajorityState:
    votes = _votes(mc, state)
    total = votes.sum()
    if total <= 0.0:
        raise AllExcludedError("every model has been eliminated")
    predicted = int(np.argmax(votes))

    errors = state.errors
    if predicted != x_t:
        errors += 1

    weights = tuple(
        w if w > 0.0 and mc.measure(i + 1).symbol_at(state.t) == x_t else 0.0
        for i, w in enumerate(state.weights)
    )
    remaining = sum(weights)
    if predicted != x_t:
        # the discarded majority carried at least half the alive weight
        assert remaining <= total / 2.0 + 1e-12 * total
    return MajorityState(state.t + 1, weights, errors)
