"""Flat numeric encodings of the built-in measure families.

Every built-in measure reduces to ``(kind, alphabet, ints, floats)``. Both
engine backends interpret this encoding with identical semantics, so a
measure is encoded once and evaluated on whichever backend is active.

Layouts (all arrays int64 / float64):

- deterministic: ints = [pattern_len, tail_symbol, *pattern], floats = []
- iid:           ints = [],      floats = [p_0, ..., p_{A-1}]
- markov(k):     ints = [k],     floats = [init (A), transition (A^k * A)]
- osc_bernoulli: ints = [],      floats = [theta0, amplitude, clip_eps, decay]
- branching:     ints = [sub_kind (A), (int_off, int_len, float_off,
                 float_len) per branch (4A), *concatenated sub ints],
                 floats = [first_step (A), *concatenated sub floats];
                 branch offsets are absolute within this measure's arrays.

Branch sub-measures must themselves be non-branching, which keeps engine
dispatch one level deep.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

KIND_DETERMINISTIC = 0
KIND_IID = 1
KIND_MARKOV = 2
KIND_OSC_BERNOULLI = 3
KIND_BRANCHING = 4


def _frozen_ints(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    arr.setflags(write=False)
    return arr


def _frozen_floats(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EncodedMeasure:
    kind: int
    alphabet: int
    ints: np.ndarray
    floats: np.ndarray


def encode_deterministic(pattern: Sequence[int], tail_symbol: int, alphabet: int) -> EncodedMeasure:
    ints = [len(pattern), tail_symbol, *pattern]
    return EncodedMeasure(KIND_DETERMINISTIC, alphabet, _frozen_ints(ints), _frozen_floats([]))


def encode_iid(probs: Sequence[float]) -> EncodedMeasure:
    floats = _frozen_floats(probs)
    return EncodedMeasure(KIND_IID, floats.size, _frozen_ints([]), floats)


def encode_markov(order: int, initial: Sequence[float], transition: np.ndarray) -> EncodedMeasure:
    initial = np.asarray(initial, dtype=np.float64)
    transition = np.asarray(transition, dtype=np.float64)
    alphabet = initial.size
    floats = np.concatenate([initial, transition.reshape(-1)])
    return EncodedMeasure(KIND_MARKOV, alphabet, _frozen_ints([order]), _frozen_floats(floats))


def encode_osc_bernoulli(theta0: float, amplitude: float, clip_eps: float,
                         decay: float = 0.5) -> EncodedMeasure:
    return EncodedMeasure(
        KIND_OSC_BERNOULLI, 2, _frozen_ints([]),
        _frozen_floats([theta0, amplitude, clip_eps, decay])
    )


def encode_branching(first_step: Sequence[float], branches: Sequence[EncodedMeasure]) -> EncodedMeasure:
    first = np.asarray(first_step, dtype=np.float64)
    alphabet = first.size
    if len(branches) != alphabet:
        raise ValueError("need one branch measure per symbol")
    for sub in branches:
        if sub.kind == KIND_BRANCHING:
            raise ValueError("branch measures must be non-branching")
        if sub.alphabet != alphabet:
            raise ValueError("branch alphabet mismatch")

    header_len = alphabet + 4 * alphabet
    int_parts = []
    float_parts = [first]
    header = np.zeros(header_len, dtype=np.int64)
    int_cursor = header_len
    float_cursor = alphabet
    for a, sub in enumerate(branches):
        header[a] = sub.kind
        base = alphabet + 4 * a
        header[base + 0] = int_cursor
        header[base + 1] = sub.ints.size
        header[base + 2] = float_cursor
        header[base + 3] = sub.floats.size
        int_parts.append(sub.ints)
        float_parts.append(sub.floats)
        int_cursor += sub.ints.size
        float_cursor += sub.floats.size

    ints = np.concatenate([header, *int_parts]) if int_parts else header
    floats = np.concatenate(float_parts)
    return EncodedMeasure(KIND_BRANCHING, alphabet, _frozen_ints(ints), _frozen_floats(floats))


@dataclass(frozen=True)
class EncodedBank:
    """A contiguous batch of encoded measures over one alphabet."""

    alphabet: int
    kinds: np.ndarray      # int64 (n,)
    int_off: np.ndarray    # int64 (n+1,) offsets into int_data
    int_data: np.ndarray   # int64
    float_off: np.ndarray  # int64 (n+1,) offsets into float_data
    float_data: np.ndarray # float64

    @property
    def size(self) -> int:
        return int(self.kinds.size)

    def model(self, i: int) -> tuple[int, np.ndarray, np.ndarray]:
        """Return ``(kind, ints, floats)`` views for model ``i`` (0-based)."""
        ints = self.int_data[self.int_off[i]:self.int_off[i + 1]]
        floats = self.float_data[self.float_off[i]:self.float_off[i + 1]]
        return int(self.kinds[i]), ints, floats


def bank_of(models: Sequence[EncodedMeasure]) -> EncodedBank:
    if not models:
        raise ValueError("empty bank")
    alphabet = models[0].alphabet
    for m in models:
        if m.alphabet != alphabet:
            raise ValueError("bank models must share one alphabet")
    kinds = _frozen_ints([m.kind for m in models])
    int_off = np.zeros(len(models) + 1, dtype=np.int64)
    float_off = np.zeros(len(models) + 1, dtype=np.int64)
    np.cumsum([m.ints.size for m in models], out=int_off[1:])
    np.cumsum([m.floats.size for m in models], out=float_off[1:])
    int_data = np.concatenate([m.ints for m in models] or [np.empty(0, np.int64)])
    float_data = np.concatenate([m.floats for m in models] or [np.empty(0, np.float64)])
    int_off.setflags(write=False)
    float_off.setflags(write=False)
    int_data.setflags(write=False)
    float_data.setflags(write=False)
    return EncodedBank(alphabet, kinds, int_off, int_data, float_off, float_data)
