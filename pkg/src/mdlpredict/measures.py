"""Measures over infinite sequences from a finite alphabet.

A measure here is a stochastic process given by its one-step predictive
distributions and extended to finite strings by the chain rule:
``Q(x_1..x_L) = prod_t Q(x_t | x_<t)``. Conditionals given a prefix of
probability zero are undefined and requesting one raises
:class:`~mdlpredict.errors.UndefinedConditionalError`; the marginal itself
is still a value, reported as a ``-inf`` log-probability.

Log-probabilities are base 2 (bits) everywhere.

Families
--------
- :class:`DeterministicSequence`: a fixed pattern, then a constant symbol.
- :class:`IIDCategorical`: independent draws from one distribution.
- :class:`MarkovChain`: order-k chain; the first k symbols are drawn from
  the initial distribution independently.
- :class:`OscillatingBernoulli`: a Bernoulli whose parameter oscillates
  around a base rate with a 1/sqrt(t) envelope.
- :class:`BranchingMeasure`: the first symbol picks which sub-process
  generates the rest; distinct branches never mix, so the process has no
  single stationary regime.
- :class:`MixtureMeasure`: a fixed convex combination of measures, with
  posterior-weighted predictive distributions.

All built-in families except the mixture compile to a flat numeric encoding
evaluated by the engine backends (:mod:`mdlpredict._engine`).
"""

from __future__ import annotations

import math
from typing import Hashable, Mapping, Sequence

import numpy as np

from . import _engine as engine
from ._engine import encode as _enc
from .errors import InvalidSpecError, UndefinedConditionalError

NEG_INF = float("-inf")

# absolute slack accepted when validating that probabilities sum to one
PROB_ATOL = 1e-9


def _check_prob_vector(values, field: str, size: int | None = None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise InvalidSpecError(f"{field}: need a 1-d vector with at least 2 entries")
    if size is not None and arr.size != size:
        raise InvalidSpecError(f"{field}: expected {size} entries, got {arr.size}")
    if np.any(arr < 0.0) or np.any(~np.isfinite(arr)):
        raise InvalidSpecError(f"{field}: entries must be finite and non-negative")
    if abs(float(arr.sum()) - 1.0) > PROB_ATOL:
        raise InvalidSpecError(f"{field}: entries must sum to 1 (got {arr.sum()!r})")
    arr.setflags(write=False)
    return arr


def sample_symbol(row: np.ndarray, u: float) -> int:
    """Map a uniform draw to a symbol: first ``a`` with ``u < cumsum(row)[a]``.

    Matches the engine backends' sampling rule exactly, including the
    clamp-and-walk-back treatment of a draw beyond the row total.
    """
    cum = np.cumsum(row)
    s = int(np.sum(u >= cum))
    if s >= row.size:
        s = row.size - 1
    while s > 0 and row[s] == 0.0:
        s -= 1
    return s


def _as_prefix(x) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("a prefix must be a 1-d sequence of symbols")
    return arr


# --- base class -------------------------------------------------------------

class Measure:
    """Common behaviour for all measure families.

    Subclasses set ``alphabet_size`` and either provide an engine encoding
    via :meth:`encode` or override the evaluation methods (the mixture does
    the latter).
    """

    alphabet_size: int
    is_deterministic: bool = False

    def encode(self) -> _enc.EncodedMeasure:
        raise NotImplementedError

    # built-ins cache a single-measure bank for engine evaluation
    _bank_cache: engine.EncodedBank | None = None

    def _bank(self) -> engine.EncodedBank:
        if self._bank_cache is None:
            self._bank_cache = engine.bank_of([self.encode()])
        return self._bank_cache

    def _rows(self, x: np.ndarray) -> np.ndarray:
        """Predictive rows for prefix lengths 0..len(x), shape (len(x)+1, A)."""
        return engine.pred_bank(self._bank(), x)[0]

    def _check_symbols(self, x: np.ndarray) -> None:
        if x.size and (x.min() < 0 or x.max() >= self.alphabet_size):
            raise ValueError("symbol out of range for this alphabet")

    def log_marginal(self, x) -> float:
        """log2 Q(x); ``-inf`` when the prefix has probability zero."""
        x = _as_prefix(x)
        if x.size == 0:
            return 0.0
        return float(self.cumulative_log_marginal(x)[-1])

    def cumulative_log_marginal(self, x) -> np.ndarray:
        """log2 Q(x_{1:l}) for every l = 0..len(x) (entry 0 is 0.0)."""
        x = _as_prefix(x)
        self._check_symbols(x)
        out = np.zeros(x.size + 1)
        if x.size:
            rows = self._rows(x)
            picks = rows[np.arange(x.size), x]
            with np.errstate(divide="ignore"):
                np.cumsum(np.log2(picks), out=out[1:])
        return out

    def predictive_distribution(self, x) -> np.ndarray:
        """One-step conditional Q(. | x) as a length-A probability vector."""
        x = _as_prefix(x)
        self._check_symbols(x)
        rows = self._rows(x)
        picks = rows[np.arange(x.size), x]
        if np.any(picks == 0.0):
            raise UndefinedConditionalError(
                "conditional undefined: the prefix has probability zero"
            )
        return rows[x.size]

    def block_probs(self, x, h: int) -> np.ndarray:
        """Conditional probabilities of every length-h block given ``x``.

        Blocks are ordered lexicographically (symbol 0 first; entry ``i``
        spells block ``i`` in base-A digits, most significant first).
        """
        x = _as_prefix(x)
        self._check_symbols(x)
        if h < 0:
            raise ValueError("h must be >= 0")
        if self.log_marginal(x) == NEG_INF:
            raise UndefinedConditionalError(
                "conditional undefined: the prefix has probability zero"
            )
        return engine.block_probs(self._bank(), 0, x, h)

    def sample_next(self, x, rng: np.random.Generator) -> int:
        """Draw one symbol from Q(. | x)."""
        row = self.predictive_distribution(x)
        return sample_symbol(row, float(rng.random()))

    def sample_path(self, length: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``length`` symbols from the process, one uniform per step."""
        if length < 0:
            raise ValueError("length must be >= 0")
        return engine.sample_path(self._bank(), 0, length, rng.random(length))

    def block_key(self, x) -> Hashable:
        """Sufficient statistic of ``x`` for conditional block probabilities.

        Two prefixes with equal keys have identical conditional processes,
        so callers may cache block computations by key.
        """
        raise NotImplementedError


# --- built-in families -------------------------------------------------------

class DeterministicSequence(Measure):
    """Point mass on one sequence: a finite pattern, then a constant tail.

    Parameters
    ----------
    pattern : sequence of int
        The first ``len(pattern)`` symbols.
    tail_symbol : int
        The symbol repeated forever after the pattern.
    alphabet_size : int
        Size of the alphabet the sequence lives in.
    """

    is_deterministic = True

    def __init__(self, pattern: Sequence[int], tail_symbol: int, alphabet_size: int = 2):
        if alphabet_size < 2:
            raise InvalidSpecError("alphabet_size: must be >= 2")
        pattern = tuple(int(s) for s in pattern)
        if any(s < 0 or s >= alphabet_size for s in pattern):
            raise InvalidSpecError("pattern: symbol out of range")
        if not 0 <= tail_symbol < alphabet_size:
            raise InvalidSpecError("tail_symbol: out of range")
        self.pattern = pattern
        self.tail_symbol = int(tail_symbol)
        self.alphabet_size = alphabet_size

    def symbol_at(self, t: int) -> int:
        """The sequence's symbol at 0-based position ``t``."""
        if t < 0:
            raise ValueError("t must be >= 0")
        return self.pattern[t] if t < len(self.pattern) else self.tail_symbol

    def encode(self) -> _enc.EncodedMeasure:
        return _enc.encode_deterministic(self.pattern, self.tail_symbol, self.alphabet_size)

    def block_key(self, x) -> Hashable:
        return ("det", len(_as_prefix(x)))

    def __repr__(self) -> str:
        return (f"DeterministicSequence(pattern={list(self.pattern)}, "
                f"tail_symbol={self.tail_symbol}, alphabet_size={self.alphabet_size})")


class IIDCategorical(Measure):
    """Independent, identically distributed draws from one distribution."""

    def __init__(self, probs: Sequence[float]):
        self.probs = _check_prob_vector(probs, "probs")
        self.alphabet_size = int(self.probs.size)

    def encode(self) -> _enc.EncodedMeasure:
        return _enc.encode_iid(self.probs)

    def block_key(self, x) -> Hashable:
        return ("iid",)

    def __repr__(self) -> str:
        return f"IIDCategorical({self.probs.tolist()})"


def bernoulli(theta: float) -> IIDCategorical:
    """Binary i.i.d. measure with P(symbol 1) = theta."""
    if not 0.0 <= theta <= 1.0:
        raise InvalidSpecError("theta: must lie in [0, 1]")
    return IIDCategorical([1.0 - theta, theta])


class MarkovChain(Measure):
    """Order-k Markov chain over a finite alphabet.

    The first ``order`` symbols are drawn independently from ``initial``;
    from then on the next-symbol distribution is the transition row indexed
    by the last ``order`` symbols (most recent symbol least significant).

    Parameters
    ----------
    order : int
        Context length k >= 1.
    initial : sequence of float
        Distribution of each of the first k symbols.
    transition : array-like, shape (A**k, A)
        One distribution per context.
    """

    def __init__(self, order: int, initial: Sequence[float], transition) -> None:
        if order < 1:
            raise InvalidSpecError("order: must be >= 1")
        self.order = int(order)
        self.initial = _check_prob_vector(initial, "initial")
        self.alphabet_size = int(self.initial.size)
        transition = np.asarray(transition, dtype=np.float64)
        expected = (self.alphabet_size ** self.order, self.alphabet_size)
        if transition.shape != expected:
            raise InvalidSpecError(
                f"transition: expected shape {expected}, got {transition.shape}"
            )
        for c in range(transition.shape[0]):
            _check_prob_vector(transition[c], f"transition[{c}]", self.alphabet_size)
        transition.setflags(write=False)
        self.transition = transition

    def encode(self) -> _enc.EncodedMeasure:
        return _enc.encode_markov(self.order, self.initial, self.transition)

    def block_key(self, x) -> Hashable:
        x = _as_prefix(x)
        if x.size < self.order:
            return ("markov-init", x.size, tuple(int(s) for s in x))
        return ("markov", tuple(int(s) for s in x[x.size - self.order:]))

    def __repr__(self) -> str:
        return f"MarkovChain(order={self.order}, alphabet_size={self.alphabet_size})"


class OscillatingBernoulli(Measure):
    """Binary process whose success rate oscillates around a base value.

    At step t (1-based) the probability of symbol 1 is
    ``theta0 - amplitude/t**decay`` for odd t and ``theta0 + amplitude/t**decay``
    for even t, clipped to ``[clip_eps, 1 - clip_eps]``. With ``decay`` at or
    near zero the deviation never becomes summable, which makes the process a
    persistent near-miss of the plain Bernoulli(theta0).
    """

    def __init__(self, theta0: float, amplitude: float, clip_eps: float = 0.01,
                 decay: float = 0.5):
        if not 0.0 < theta0 < 1.0:
            raise InvalidSpecError("theta0: must lie in (0, 1)")
        if amplitude < 0.0:
            raise InvalidSpecError("amplitude: must be >= 0")
        if not 0.0 < clip_eps < 0.5:
            raise InvalidSpecError("clip_eps: must lie in (0, 0.5)")
        if decay < 0.0:
            raise InvalidSpecError("decay: must be >= 0")
        self.theta0 = float(theta0)
        self.amplitude = float(amplitude)
        self.clip_eps = float(clip_eps)
        self.decay = float(decay)
        self.alphabet_size = 2

    def theta_at(self, t: int) -> float:
        """Success probability at 1-based step ``t``."""
        if t < 1:
            raise ValueError("t is 1-based")
        # branch per decay value so every caller hits the same libm routine
        if self.decay == 0.0:
            dev = self.amplitude
        elif self.decay == 0.5:
            dev = self.amplitude / math.sqrt(t)
        else:
            dev = self.amplitude * math.pow(t, -self.decay)
        theta = self.theta0 + dev if t % 2 == 0 else self.theta0 - dev
        return min(max(theta, self.clip_eps), 1.0 - self.clip_eps)

    def encode(self) -> _enc.EncodedMeasure:
        return _enc.encode_osc_bernoulli(
            self.theta0, self.amplitude, self.clip_eps, self.decay
        )

    def block_key(self, x) -> Hashable:
        return ("osc", len(_as_prefix(x)))

    def __repr__(self) -> str:
        return (f"OscillatingBernoulli(theta0={self.theta0}, "
                f"amplitude={self.amplitude}, clip_eps={self.clip_eps}, "
                f"decay={self.decay})")


class BranchingMeasure(Measure):
    """The first symbol selects which sub-process generates the rest.

    Sampled paths commit to one branch forever, so long-run behaviour
    depends on the first symbol and no single invariant regime exists.
    Branch measures must be non-branching built-ins over the same alphabet.
    """

    def __init__(self, first_step: Sequence[float], branches: Sequence[Measure]):
        self.first_step = _check_prob_vector(first_step, "first_step")
        self.alphabet_size = int(self.first_step.size)
        branches = tuple(branches)
        if len(branches) != self.alphabet_size:
            raise InvalidSpecError("branches: need one measure per symbol")
        for i, sub in enumerate(branches):
            if isinstance(sub, (BranchingMeasure, MixtureMeasure)):
                raise InvalidSpecError(f"branches[{i}]: must be a non-branching built-in")
            if not isinstance(sub, Measure):
                raise InvalidSpecError(f"branches[{i}]: not a measure")
            if sub.alphabet_size != self.alphabet_size:
                raise InvalidSpecError(f"branches[{i}]: alphabet mismatch")
        self.branches = branches

    def encode(self) -> _enc.EncodedMeasure:
        return _enc.encode_branching(self.first_step, [b.encode() for b in self.branches])

    def block_key(self, x) -> Hashable:
        x = _as_prefix(x)
        if x.size == 0:
            return ("branch-root",)
        first = int(x[0])
        return ("branch", first, self.branches[first].block_key(x[1:]))

    def __repr__(self) -> str:
        return f"BranchingMeasure(first_step={self.first_step.tolist()}, branches={self.branches!r})"


# --- mixtures ---------------------------------------------------------------

def log2_weights(weights: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log2(weights)


class MixtureMeasure(Measure):
    """Fixed convex combination of measures.

    ``Bayes(x) = sum_i w_i Q_i(x)``; its predictive distribution is the
    posterior-weighted average of the components' predictives, which is the
    exact chain-rule conditional of the mixture.
    """

    def __init__(self, components: Sequence[Measure], weights: Sequence[float]):
        components = tuple(components)
        if not components:
            raise InvalidSpecError("components: must be non-empty")
        self.alphabet_size = components[0].alphabet_size
        for i, c in enumerate(components):
            if c.alphabet_size != self.alphabet_size:
                raise InvalidSpecError(f"components[{i}]: alphabet mismatch")
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (len(components),):
            raise InvalidSpecError("weights: need one weight per component")
        if np.any(weights <= 0.0):
            raise InvalidSpecError("weights: must be positive")
        if abs(float(weights.sum()) - 1.0) > PROB_ATOL:
            raise InvalidSpecError(f"weights: must sum to 1 (got {weights.sum()!r})")
        weights.setflags(write=False)
        self.components = components
        self.weights = weights
        self._log_weights = log2_weights(weights)

    def encode(self) -> _enc.EncodedMeasure:
        raise NotImplementedError("mixtures are evaluated from their components")

    def component_log_marginals(self, x) -> np.ndarray:
        return np.array([c.log_marginal(x) for c in self.components])

    def log_marginal(self, x) -> float:
        joint = self._log_weights + self.component_log_marginals(x)
        return float(np.logaddexp2.reduce(joint))

    def cumulative_log_marginal(self, x) -> np.ndarray:
        per = np.stack([c.cumulative_log_marginal(x) for c in self.components])
        return np.logaddexp2.reduce(self._log_weights[:, None] + per, axis=0)

    def posterior(self, x) -> np.ndarray:
        """Posterior component weights given ``x`` (sums to 1)."""
        joint = self._log_weights + self.component_log_marginals(x)
        top = joint.max()
        if top == NEG_INF:
            raise UndefinedConditionalError(
                "conditional undefined: the prefix has probability zero under every component"
            )
        rel = np.exp2(joint - top)
        return rel / rel.sum()

    def predictive_distribution(self, x) -> np.ndarray:
        post = self.posterior(x)
        rows = np.stack([
            c.predictive_distribution(x) if post[i] > 0.0 else np.zeros(self.alphabet_size)
            for i, c in enumerate(self.components)
        ])
        return post @ rows

    def block_probs(self, x, h: int) -> np.ndarray:
        post = self.posterior(x)
        out = np.zeros(self.alphabet_size ** h)
        for i, c in enumerate(self.components):
            if post[i] > 0.0:
                out += post[i] * c.block_probs(x, h)
        return out

    def sample_path(self, length: int, rng: np.random.Generator) -> np.ndarray:
        i = sample_symbol(self.weights, float(rng.random()))
        return self.components[i].sample_path(length, rng)

    def block_key(self, x) -> Hashable:
        post = self.posterior(x)
        return ("mixture", post.tobytes(),
                tuple(c.block_key(x) for c in self.components))

    def __repr__(self) -> str:
        return f"MixtureMeasure({len(self.components)} components)"


# --- declarative construction ------------------------------------------------

_FAMILY_FIELDS = {
    "deterministic": {"pattern", "tail_symbol", "alphabet_size"},
    "iid": {"probs"},
    "bernoulli": {"theta"},
    "markov": {"order", "initial", "transition"},
    "osc_bernoulli": {"theta0", "amplitude", "clip_eps", "decay"},
    "branching": {"first_step", "branches"},
    "mixture": {"components", "weights"},
}


def build_family(spec: Mapping) -> Measure:
    """Construct a measure from a declarative mapping.

    The mapping carries a ``family`` name plus that family's fields, e.g.
    ``{"family": "bernoulli", "theta": 0.75}``. Nested measures (branching
    branches, mixture components) are mappings of the same form.
    """
    if not isinstance(spec, Mapping):
        raise InvalidSpecError("measure spec: expected a mapping")
    if "family" not in spec:
        raise InvalidSpecError("measure spec: missing 'family'")
    family = spec["family"]
    if family not in _FAMILY_FIELDS:
        raise InvalidSpecError(f"family: unknown family {family!r}")
    extra = set(spec) - _FAMILY_FIELDS[family] - {"family"}
    if extra:
        raise InvalidSpecError(f"measure spec: unknown fields {sorted(extra)} for {family!r}")

    try:
        if family == "deterministic":
            return DeterministicSequence(
                spec["pattern"], spec["tail_symbol"], spec.get("alphabet_size", 2)
            )
        if family == "iid":
            return IIDCategorical(spec["probs"])
        if family == "bernoulli":
            return bernoulli(spec["theta"])
        if family == "markov":
            return MarkovChain(spec["order"], spec["initial"], spec["transition"])
        if family == "osc_bernoulli":
            return OscillatingBernoulli(
                spec["theta0"], spec["amplitude"], spec.get("clip_eps", 0.01),
                spec.get("decay", 0.5)
            )
        if family == "branching":
            branches = [build_family(b) for b in spec["branches"]]
            return BranchingMeasure(spec["first_step"], branches)
        components = [build_family(c) for c in spec["components"]]
        return MixtureMeasure(components, spec["weights"])
    except KeyError as missing:
        raise InvalidSpecError(f"measure spec: missing field {missing}") from None
