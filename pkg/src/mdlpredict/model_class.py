"""Countable model classes: indexed measures with codelengths.

A model class pairs a (finite or countable) enumeration of measures
``Q_1, Q_2, ...`` with a complexity assignment ``K(i)`` in bits. The prior
weight of a model is ``2**-K(i)``; the assignment must keep the total
weight below a Kraft-style bound so that two-part scores stay meaningful.

Indices are 1-based everywhere, matching the enumeration order. Countable
classes are given by a callable ``index -> measure`` and materialize
lazily up to a cutoff; materialization is memoized and thread-safe, and
every selector that consumed the enumeration reports how much prior mass
the cutoff discarded.
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Sequence

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

from . import _engine as engine
from .errors import CutoffExhaustedError, InvalidSpecError
from .measures import Measure

# Safety margin for the total prior mass: twice the two-log rule's exact
# total of pi^2/6 = 1.645 bits of mass.
DEFAULT_KRAFT_BOUND = 3.29

DEFAULT_CUTOFF = 10_000


# --- complexity rules --------------------------------------------------------

class ComplexityRule:
    """Assigns a codelength in bits to each 1-based model index."""

    def codelength(self, index: int) -> float:
        raise NotImplementedError

    def tail_weight(self, m: int) -> float:
        """Total prior weight of indices > m; NotImplementedError if unknown."""
        raise NotImplementedError


class TwoLogComplexity(ComplexityRule):
    """K(i) = 2 log2 i, total prior mass pi^2/6.

    The natural default for open-ended enumerations: the weight of index i
    is exactly i**-2, so tail weights have a closed form (the Hurwitz zeta
    function at s=2).
    """

    def codelength(self, index: int) -> float:
        return 2.0 * math.log2(index)

    def tail_weight(self, m: int) -> float:
        # sum_{i > m} i**-2 = zeta(2, m+1)
        return float(_hurwitz_zeta(2, m + 1))


class ExplicitComplexity(ComplexityRule):
    """Codelengths listed per index; only finitely many models."""

    def __init__(self, codelengths: Sequence[float]):
        values = [float(k) for k in codelengths]
        if not values:
            raise InvalidSpecError("codelengths: must be non-empty")
        if any(k < 0 or not math.isfinite(k) for k in values):
            raise InvalidSpecError("codelengths: must be finite and >= 0")
        self.values = tuple(values)

    def codelength(self, index: int) -> float:
        if index > len(self.values):
            raise IndexError(f"index {index} beyond the {len(self.values)} listed codelengths")
        return self.values[index - 1]

    def tail_weight(self, m: int) -> float:
        return math.fsum(2.0 ** -k for k in self.values[m:])

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "ExplicitComplexity":
        """Codelengths -log2 w_i for given positive prior weights."""
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w <= 0):
            raise InvalidSpecError("weights: must be positive")
        return cls((-np.log2(w)).tolist())


class UniformComplexity(ComplexityRule):
    """K(i) = log2(n) over a finite class of n models: the uniform prior."""

    def __init__(self, n: int):
        if n < 1:
            raise InvalidSpecError("n: must be >= 1")
        self.n = int(n)

    def codelength(self, index: int) -> float:
        if index > self.n:
            raise IndexError(f"index {index} beyond the {self.n} models")
        return math.log2(self.n)

    def tail_weight(self, m: int) -> float:
        if m >= self.n:
            return 0.0
        return math.fsum(2.0 ** -math.log2(self.n) for _ in range(self.n - m))


# --- the class itself --------------------------------------------------------

class ModelClass:
    """An enumerated family of measures with a complexity assignment.

    Parameters
    ----------
    models : sequence of Measure, or callable int -> Measure
        A finite list, or a 1-based builder for a countable enumeration.
    complexity : "two-log", "uniform", sequence of float, or ComplexityRule
        Codelength assignment. "uniform" and explicit lists require a
        finite class.
    truth_index : int, optional
        1-based index of the designated data-generating model.
    cutoff : int
        Materialization limit for countable enumerations.
    kraft_bound : float
        Maximum admissible total prior mass of the enumerated models.
    """

    def __init__(self, models, complexity="two-log", truth_index: int | None = None,
                 cutoff: int = DEFAULT_CUTOFF, kraft_bound: float = DEFAULT_KRAFT_BOUND):
        if cutoff < 1:
            raise InvalidSpecError("cutoff: must be >= 1")
        self._lock = threading.Lock()
        self._memo: list[Measure] = []
        self._banks: dict[int, engine.EncodedBank] = {}

        if callable(models) and not isinstance(models, Sequence):
            self._builder: Callable[[int], Measure] | None = models
            self.size: int | None = None
        else:
            models = list(models)
            if not models:
                raise InvalidSpecError("models: must be non-empty")
            for i, m in enumerate(models):
                if not isinstance(m, Measure):
                    raise InvalidSpecError(f"models[{i}]: not a measure")
            self._builder = None
            self._memo = models
            self.size = len(models)

        if self.size is not None and len({m.alphabet_size for m in self._memo}) > 1:
            raise InvalidSpecError("models: must share one alphabet")

        if isinstance(complexity, ComplexityRule):
            self.complexity = complexity
        elif complexity == "two-log":
            self.complexity = TwoLogComplexity()
        elif complexity == "uniform":
            if self.size is None:
                raise InvalidSpecError("complexity: 'uniform' needs a finite class")
            self.complexity = UniformComplexity(self.size)
        elif isinstance(complexity, (Sequence, np.ndarray)) and not isinstance(complexity, str):
            if self.size is None:
                raise InvalidSpecError("complexity: explicit codelengths need a finite class")
            if len(complexity) != self.size:
                raise InvalidSpecError("complexity: need one codelength per model")
            self.complexity = ExplicitComplexity(complexity)
        else:
            raise InvalidSpecError(f"complexity: unrecognized rule {complexity!r}")

        self.cutoff = int(cutoff) if self.size is None else min(int(cutoff), self.size)
        self.kraft_bound = float(kraft_bound)
        mass = self.kraft_mass(self.enumerated_count if self.size is None else self.size)
        if mass > self.kraft_bound + 1e-12:
            raise InvalidSpecError(
                f"complexity: total prior mass {mass:.6g} exceeds the bound {self.kraft_bound}"
            )

        if truth_index is not None:
            if truth_index < 1 or (self.size is not None and truth_index > self.size):
                raise InvalidSpecError("truth_index: out of range")
        self.truth_index = truth_index

    # -- enumeration ----------------------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self.size is not None

    @property
    def enumerated_count(self) -> int:
        """How many models selectors enumerate: min(cutoff, class size)."""
        return self.cutoff

    def _materialize(self, upto: int) -> None:
        if len(self._memo) >= upto or self._builder is None:
            return
        with self._lock:
            while len(self._memo) < upto:
                i = len(self._memo) + 1
                m = self._builder(i)
                if not isinstance(m, Measure):
                    raise InvalidSpecError(f"models({i}): builder returned a non-measure")
                if self._memo and m.alphabet_size != self._memo[0].alphabet_size:
                    raise InvalidSpecError(f"models({i}): alphabet mismatch")
                self._memo.append(m)

    def measure(self, index: int) -> Measure:
        """The model at 1-based ``index``."""
        if index < 1:
            raise IndexError("model indices are 1-based")
        if self.size is not None and index > self.size:
            raise IndexError(f"index {index} beyond the {self.size} models")
        if index > self.cutoff:
            raise CutoffExhaustedError(
                f"index {index} beyond the enumeration cutoff {self.cutoff}"
            )
        self._materialize(index)
        return self._memo[index - 1]

    def measures(self, upto: int | None = None) -> list[Measure]:
        upto = self.enumerated_count if upto is None else min(upto, self.enumerated_count)
        self._materialize(upto)
        return self._memo[:upto]

    @property
    def truth(self) -> Measure:
        if self.truth_index is None:
            raise InvalidSpecError("truth_index: not set for this class")
        return self.measure(self.truth_index)

    def is_deterministic(self, upto: int | None = None) -> bool:
        return all(m.is_deterministic for m in self.measures(upto))

    @property
    def alphabet_size(self) -> int:
        return self.measures(1)[0].alphabet_size

    # -- codelengths and prior mass --------------------------------------------

    def codelength(self, index: int) -> float:
        """K(index) in bits (1-based)."""
        if index < 1:
            raise IndexError("model indices are 1-based")
        return self.complexity.codelength(index)

    def codelengths(self, upto: int | None = None) -> np.ndarray:
        upto = self.enumerated_count if upto is None else upto
        return np.array([self.codelength(i) for i in range(1, upto + 1)])

    def kraft_mass(self, upto: int | None = None) -> float:
        """Total prior weight of models 1..upto."""
        upto = self.enumerated_count if upto is None else upto
        return math.fsum(2.0 ** -self.codelength(i) for i in range(1, upto + 1))

    def tail_weight(self, m: int) -> float:
        """Prior weight beyond index m: sum_{i>m} 2**-K(i)."""
        return self.complexity.tail_weight(m)

    def discarded_tail_mass(self, upto: int | None = None) -> float:
        """Prior mass beyond what selectors enumerate (0 for finite classes)."""
        upto = self.enumerated_count if upto is None else upto
        if self.size is not None and upto >= self.size:
            return 0.0
        return self.tail_weight(upto)

    def effective_size(self, eps: float, truth_codelength: float | None = None) -> int:
        """Least m whose discarded tail, inflated by 2**K(truth), is <= eps.

        Truncating the class at this m perturbs two-part and mixture scores
        by at most eps relative to the truth's own weight.
        """
        if eps <= 0:
            raise ValueError("eps must be positive")
        if truth_codelength is None:
            if self.truth_index is None:
                raise InvalidSpecError("truth_index: needed to anchor effective_size")
            truth_codelength = self.codelength(self.truth_index)
        factor = 2.0 ** truth_codelength
        limit = self.cutoff if self.size is None else self.size
        for m in range(1, limit + 1):
            if self.tail_weight(m) * factor <= eps:
                return m
        raise CutoffExhaustedError(
            f"no m <= {limit} brings the inflated tail below {eps}"
        )

    def prior_weights(self, upto: int | None = None, normalized: bool = True) -> np.ndarray:
        """Prior weights 2**-K(i) of models 1..upto, optionally normalized."""
        upto = self.enumerated_count if upto is None else upto
        w = np.exp2(-self.codelengths(upto))
        if normalized:
            w = w / math.fsum(w)
        return w

    # -- engine access ----------------------------------------------------------

    def bank(self, upto: int | None = None) -> engine.EncodedBank:
        """Encoded bank of models 1..upto for engine evaluation."""
        upto = self.enumerated_count if upto is None else min(upto, self.enumerated_count)
        got = self._banks.get(upto)
        if got is None:
            got = engine.bank_of([m.encode() for m in self.measures(upto)])
            self._banks[upto] = got
        return got
