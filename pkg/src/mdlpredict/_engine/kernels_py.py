"""Pure-numpy engine backend.

The compiled backend must match this one bit for bit, so the contract is
pinned here:

- Predictive rows are the family formulas evaluated positionally; rows are
  emitted even after a zero-probability prefix (callers see the zero as a
  ``-inf`` log-marginal, the engine never gates on consistency).
- Sampling maps a uniform ``u`` to the first symbol ``a`` with
  ``u < cumsum(row)[a]``; if ``u`` lands beyond the row total (the total can
  sit one ulp below 1), the draw clamps to the last symbol and then walks
  left past zero-probability cells.
- Path products accumulate left to right, one factor per step.
- No transcendental functions: rows and products only. Logs and reductions
  belong to the caller, which keeps backend outputs comparable exactly.

Uniform consumption is positional: ``sample_path`` takes one uniform per
step whatever the family, ``mc_block_scores`` takes ``h + 1`` per sample.
"""

from __future__ import annotations

import math

import numpy as np

from .encode import (
    KIND_BRANCHING,
    KIND_DETERMINISTIC,
    KIND_IID,
    KIND_MARKOV,
    KIND_OSC_BERNOULLI,
    EncodedBank,
)

ENGINE_NAME = "python"


# --- row formulas ---------------------------------------------------------

def _branch_sub(ints: np.ndarray, floats: np.ndarray, alphabet: int, symbol: int):
    """Decode one branch of a branching measure: ``(kind, ints, floats)``."""
    base = alphabet + 4 * symbol
    io, il, fo, fl = ints[base], ints[base + 1], ints[base + 2], ints[base + 3]
    return int(ints[symbol]), ints[io:io + il], floats[fo:fo + fl]


def _osc_thetas(floats: np.ndarray, t: np.ndarray) -> np.ndarray:
    # t is 1-based; odd steps dip below theta0, even steps rise above
    theta0, amplitude, eps, decay = floats[0], floats[1], floats[2], floats[3]
    t64 = t.astype(np.float64)
    # route each decay through the scalar libm call the compiled backend uses;
    # numpy's vectorized power can disagree with libm pow in the last ulp
    if decay == 0.0:
        dev = np.full(t64.shape, amplitude)
    elif decay == 0.5:
        dev = amplitude / np.sqrt(t64)
    else:
        dev = amplitude * np.array([math.pow(v, -decay) for v in t64])
    theta = np.where(t % 2 == 0, theta0 + dev, theta0 - dev)
    return np.minimum(np.maximum(theta, eps), 1.0 - eps)


def _rows_single(kind: int, ints: np.ndarray, floats: np.ndarray, alphabet: int,
                 x: np.ndarray) -> np.ndarray:
    """Predictive rows for prefix lengths ``0..len(x)``, shape (len(x)+1, A)."""
    L = x.size
    A = alphabet
    if kind == KIND_IID:
        return np.broadcast_to(floats, (L + 1, A)).copy()
    if kind == KIND_DETERMINISTIC:
        plen = int(ints[0])
        tail = int(ints[1])
        pos = np.arange(L + 1)
        if plen == 0:
            sym = np.full(L + 1, tail)
        else:
            pattern = ints[2:2 + plen]
            sym = np.where(pos < plen, pattern[np.minimum(pos, plen - 1)], tail)
        return np.eye(A, dtype=np.float64)[sym]
    if kind == KIND_MARKOV:
        k = int(ints[0])
        init = floats[:A]
        trans = floats[A:].reshape(A ** k, A)
        rows = np.empty((L + 1, A))
        rows[:min(k, L + 1)] = init
        if L >= k:
            powers = A ** np.arange(k - 1, -1, -1, dtype=np.int64)
            windows = np.lib.stride_tricks.sliding_window_view(x, k)[:L - k + 1]
            rows[k:] = trans[windows @ powers]
        return rows
    if kind == KIND_OSC_BERNOULLI:
        theta = _osc_thetas(floats, np.arange(1, L + 2))
        return np.stack([1.0 - theta, theta], axis=1)
    if kind == KIND_BRANCHING:
        rows = np.empty((L + 1, A))
        rows[0] = floats[:A]
        if L >= 1:
            sub_kind, sub_ints, sub_floats = _branch_sub(ints, floats, A, int(x[0]))
            rows[1:] = _rows_single(sub_kind, sub_ints, sub_floats, A, x[1:])
        return rows
    raise ValueError(f"unknown measure kind {kind}")


def pred_bank(bank: EncodedBank, x) -> np.ndarray:
    """Predictive rows for every model: shape (n_models, len(x)+1, A)."""
    x = np.ascontiguousarray(x, dtype=np.int64)
    n = bank.size
    out = np.empty((n, x.size + 1, bank.alphabet))
    for m in range(n):
        kind, ints, floats = bank.model(m)
        out[m] = _rows_single(kind, ints, floats, bank.alphabet, x)
    return out


# --- steppers: per-path row evaluation for continuations of a prefix ------

class _LeafStepper:
    """Rows for continuation paths of one non-branching model.

    ``rows(n)`` returns an array broadcastable to (n, A) for the current
    depth; ``advance(symbols)`` consumes one symbol per path; ``expand()``
    replaces each path by its A children in symbol order (path-major).
    """

    def __init__(self, kind, ints, floats, alphabet, x, npaths):
        self.kind = kind
        self.A = alphabet
        self.pos = int(x.size)
        self.npaths = npaths
        if kind == KIND_IID:
            self._row = np.asarray(floats).reshape(1, alphabet)
        elif kind == KIND_DETERMINISTIC:
            self.plen = int(ints[0])
            self.tail = int(ints[1])
            self.pattern = ints[2:2 + self.plen]
            self.eye = np.eye(alphabet, dtype=np.float64)
        elif kind == KIND_MARKOV:
            self.k = int(ints[0])
            self.init = np.asarray(floats[:alphabet]).reshape(1, alphabet)
            self.trans = np.asarray(floats[alphabet:]).reshape(alphabet ** self.k, alphabet)
            self.mod = alphabet ** self.k
            ctx = 0
            for s in x[max(0, self.pos - self.k):]:
                ctx = ctx * alphabet + int(s)
            self.ctx = np.full(npaths, ctx, dtype=np.int64)
        elif kind == KIND_OSC_BERNOULLI:
            self.floats = floats
        else:
            raise ValueError(f"unsupported stepper kind {kind}")

    def rows(self) -> np.ndarray:
        if self.kind == KIND_IID:
            return self._row
        if self.kind == KIND_DETERMINISTIC:
            s = self.pattern[self.pos] if self.pos < self.plen else self.tail
            return self.eye[int(s)].reshape(1, self.A)
        if self.kind == KIND_MARKOV:
            if self.pos < self.k:
                return self.init
            return self.trans[self.ctx]
        theta = _osc_thetas(self.floats, np.arange(self.pos + 1, self.pos + 2))
        return np.stack([1.0 - theta, theta], axis=1)

    def advance(self, symbols: np.ndarray) -> None:
        if self.kind == KIND_MARKOV:
            self.ctx = self.ctx * self.A + symbols
            if self.pos + 1 >= self.k:
                self.ctx %= self.mod
        self.pos += 1

    def expand(self) -> None:
        if self.kind == KIND_MARKOV:
            children = np.arange(self.A, dtype=np.int64)
            self.ctx = (np.repeat(self.ctx, self.A) * self.A
                        + np.tile(children, self.npaths))
            if self.pos + 1 >= self.k:
                self.ctx %= self.mod
        self.npaths *= self.A
        self.pos += 1


class _BranchStepperMC:
    """Branching-measure stepper for Monte Carlo paths (fixed path count)."""

    def __init__(self, ints, floats, alphabet, x, npaths):
        self.A = alphabet
        self.ints = ints
        self.floats = floats
        self.npaths = npaths
        if x.size >= 1:
            kind, si, sf = _branch_sub(ints, floats, alphabet, int(x[0]))
            self.groups = [(slice(None), _LeafStepper(kind, si, sf, alphabet, x[1:], npaths))]
            self.stage = 1
        else:
            self.groups = None
            self.stage = 0

    def rows(self) -> np.ndarray:
        if self.stage == 0:
            return np.asarray(self.floats[:self.A]).reshape(1, self.A)
        out = np.empty((self.npaths, self.A))
        for idx, stepper in self.groups:
            out[idx] = stepper.rows()
        return out

    def advance(self, symbols: np.ndarray) -> None:
        if self.stage == 0:
            empty = np.empty(0, dtype=np.int64)
            self.groups = []
            for a in range(self.A):
                idx = np.flatnonzero(symbols == a)
                if idx.size:
                    kind, si, sf = _branch_sub(self.ints, self.floats, self.A, a)
                    self.groups.append((idx, _LeafStepper(kind, si, sf, self.A, empty, idx.size)))
            self.stage = 1
        else:
            for idx, stepper in self.groups:
                stepper.advance(symbols[idx])


def _make_mc_stepper(kind, ints, floats, alphabet, x, npaths):
    if kind == KIND_BRANCHING:
        return _BranchStepperMC(ints, floats, alphabet, x, npaths)
    return _LeafStepper(kind, ints, floats, alphabet, x, npaths)


# --- sampling -------------------------------------------------------------

def _sample_rows(rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """First index with u < cumsum(row), clamped and walked off zero cells."""
    n = u.size
    A = rows.shape[-1]
    cum = np.cumsum(rows, axis=-1)
    s = np.sum(u[:, None] >= cum, axis=-1)
    np.minimum(s, A - 1, out=s)
    flat = np.broadcast_to(rows, (n, A))
    picked = flat[np.arange(n), s]
    while True:
        bad = (picked == 0.0) & (s > 0)
        if not bad.any():
            break
        s[bad] -= 1
        picked = flat[np.arange(n), s]
    return s


def block_probs(bank: EncodedBank, model_index: int, x, h: int) -> np.ndarray:
    """Probabilities of all length-h continuations of ``x``, lexicographic.

    Symbol 0 varies slowest: entry ``i`` is the block whose base-A digits,
    most significant first, spell ``i``.
    """
    x = np.ascontiguousarray(x, dtype=np.int64)
    kind, ints, floats = bank.model(model_index)
    return _block_single(kind, ints, floats, bank.alphabet, x, h, 1.0)


def _block_single(kind, ints, floats, alphabet, x, h, seed):
    if h == 0:
        return np.array([seed])
    if kind == KIND_BRANCHING:
        first = floats[:alphabet]
        if x.size == 0:
            parts = []
            empty = np.empty(0, dtype=np.int64)
            for a in range(alphabet):
                sub_kind, si, sf = _branch_sub(ints, floats, alphabet, a)
                parts.append(_block_single(sub_kind, si, sf, alphabet, empty,
                                           h - 1, seed * first[a]))
            return np.concatenate(parts)
        sub_kind, si, sf = _branch_sub(ints, floats, alphabet, int(x[0]))
        return _block_single(sub_kind, si, sf, alphabet, x[1:], h, seed)

    stepper = _LeafStepper(kind, ints, floats, alphabet, x, 1)
    prods = np.array([seed])
    for _ in range(h):
        rows = stepper.rows()
        prods = (prods[:, None] * rows).reshape(-1)
        stepper.expand()
    return prods


def mc_block_scores(bank: EncodedBank, p_index: int, q_index: int, x, h: int,
                    uniforms: np.ndarray) -> np.ndarray:
    """Per-sample scores |P(z|x) - Q(z|x)| / mix(z|x), z ~ the even mixture.

    ``uniforms`` has shape (n, h+1): column 0 picks the component, column
    1+j drives step j. The mean of the returned scores estimates the
    block distance between P and Q given x without bias.
    """
    x = np.ascontiguousarray(x, dtype=np.int64)
    uniforms = np.asarray(uniforms, dtype=np.float64)
    n = uniforms.shape[0]
    A = bank.alphabet
    kp, ip, fp = bank.model(p_index)
    kq, iq, fq = bank.model(q_index)
    sp = _make_mc_stepper(kp, ip, fp, A, x, n)
    sq = _make_mc_stepper(kq, iq, fq, A, x, n)
    choose_p = uniforms[:, 0] < 0.5
    pp = np.ones(n)
    qq = np.ones(n)
    rows_idx = np.arange(n)
    for j in range(h):
        rp = np.broadcast_to(sp.rows(), (n, A))
        rq = np.broadcast_to(sq.rows(), (n, A))
        mixed = np.where(choose_p[:, None], rp, rq)
        s = _sample_rows(mixed, uniforms[:, 1 + j])
        pp *= rp[rows_idx, s]
        qq *= rq[rows_idx, s]
        sp.advance(s)
        sq.advance(s)
    return np.abs(pp - qq) / (0.5 * (pp + qq))


def sample_path(bank: EncodedBank, model_index: int, length: int,
                uniforms: np.ndarray) -> np.ndarray:
    """Draw one path of ``length`` symbols, one uniform per step."""
    uniforms = np.asarray(uniforms, dtype=np.float64)
    kind, ints, floats = bank.model(model_index)
    return _sample_single(kind, ints, floats, bank.alphabet, length, uniforms)


def _sample_single(kind, ints, floats, alphabet, length, uniforms):
    A = alphabet
    if length == 0:
        return np.empty(0, dtype=np.int64)
    if kind == KIND_IID:
        rows = np.broadcast_to(floats, (length, A))
        return _sample_rows(rows, uniforms[:length])
    if kind == KIND_DETERMINISTIC:
        plen = int(ints[0])
        tail = int(ints[1])
        pos = np.arange(length)
        if plen == 0:
            return np.full(length, tail, dtype=np.int64)
        pattern = ints[2:2 + plen]
        return np.where(pos < plen, pattern[np.minimum(pos, plen - 1)], tail).astype(np.int64)
    if kind == KIND_OSC_BERNOULLI:
        theta = _osc_thetas(floats, np.arange(1, length + 1))
        rows = np.stack([1.0 - theta, theta], axis=1)
        return _sample_rows(rows, uniforms[:length])
    if kind == KIND_MARKOV:
        k = int(ints[0])
        init = floats[:A]
        trans = floats[A:].reshape(A ** k, A)
        mod = A ** k
        out = np.empty(length, dtype=np.int64)
        ctx = 0
        for t in range(length):
            row = init if t < k else trans[ctx]
            s = int(_sample_rows(row.reshape(1, A), uniforms[t:t + 1])[0])
            out[t] = s
            ctx = ctx * A + s
            if t + 1 >= k:
                ctx %= mod
        return out
    if kind == KIND_BRANCHING:
        first = floats[:A]
        s0 = int(_sample_rows(first.reshape(1, A), uniforms[0:1])[0])
        out = np.empty(length, dtype=np.int64)
        out[0] = s0
        sub_kind, si, sf = _branch_sub(ints, floats, A, s0)
        out[1:] = _sample_single(sub_kind, si, sf, A, length - 1, uniforms[1:length])
        return out
    raise ValueError(f"unknown measure kind {kind}")
