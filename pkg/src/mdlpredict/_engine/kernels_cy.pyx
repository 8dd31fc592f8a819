# cython: language_level=3
"""Compiled engine backend.

Mirrors kernels_py exactly; see that module for the semantics contract.
Uniform consumption, sampling tie rules and the left-to-right order of
products must not drift, the test suite compares both backends bitwise.
"""

import numpy as np

from libc.math cimport fabs, pow, sqrt

ENGINE_NAME = "compiled"

cdef long long K_DET = 0
cdef long long K_IID = 1
cdef long long K_MARKOV = 2
cdef long long K_OSC = 3
cdef long long K_BRANCH = 4


cdef inline long long _sym(const long long[::1] x, Py_ssize_t xlen,
                           const long long[::1] z, Py_ssize_t t):
    # symbol t of the concatenation x + z
    if t < xlen:
        return x[t]
    return z[t - xlen]


cdef void _leaf_row(long long kind, const long long[::1] I, Py_ssize_t io,
                    const double[::1] F, Py_ssize_t fo, Py_ssize_t A,
                    const long long[::1] x, Py_ssize_t xlen,
                    const long long[::1] z, Py_ssize_t shift, Py_ssize_t gpos,
                    double[::1] out, Py_ssize_t ob):
    # Predictive row of a non-branching model whose own frame starts `shift`
    # symbols into the global buffer; gpos counts symbols in the global frame.
    # The row is written to out[ob:ob+A].
    cdef Py_ssize_t pos = gpos - shift
    cdef Py_ssize_t a, j, plen, k
    cdef long long ctx, s
    cdef double th, dev, lo, hi
    if kind == K_IID:
        for a in range(A):
            out[ob + a] = F[fo + a]
    elif kind == K_DET:
        plen = <Py_ssize_t> I[io]
        if pos < plen:
            s = I[io + 2 + pos]
        else:
            s = I[io + 1]
        for a in range(A):
            out[ob + a] = 0.0
        out[ob + s] = 1.0
    elif kind == K_MARKOV:
        k = <Py_ssize_t> I[io]
        if pos < k:
            for a in range(A):
                out[ob + a] = F[fo + a]
        else:
            ctx = 0
            for j in range(k):
                ctx = ctx * A + _sym(x, xlen, z, shift + pos - k + j)
            for a in range(A):
                out[ob + a] = F[fo + A + ctx * A + a]
    elif kind == K_OSC:
        if F[fo + 3] == 0.0:
            dev = F[fo + 1]
        elif F[fo + 3] == 0.5:
            dev = F[fo + 1] / sqrt(<double> (pos + 1))
        else:
            dev = F[fo + 1] * pow(<double> (pos + 1), -F[fo + 3])
        if (pos + 1) % 2 == 0:
            th = F[fo] + dev
        else:
            th = F[fo] - dev
        lo = F[fo + 2]
        hi = 1.0 - F[fo + 2]
        if th < lo:
            th = lo
        if th > hi:
            th = hi
        out[ob] = 1.0 - th
        out[ob + 1] = th


cdef void _model_row(long long kind, const long long[::1] I, Py_ssize_t io,
                     const double[::1] F, Py_ssize_t fo, Py_ssize_t A,
                     const long long[::1] x, Py_ssize_t xlen,
                     const long long[::1] z, Py_ssize_t gpos,
                     double[::1] out, Py_ssize_t ob):
    cdef Py_ssize_t a, base
    cdef long long s, sub_kind
    if kind != K_BRANCH:
        _leaf_row(kind, I, io, F, fo, A, x, xlen, z, 0, gpos, out, ob)
        return
    if gpos == 0:
        for a in range(A):
            out[ob + a] = F[fo + a]
        return
    s = _sym(x, xlen, z, 0)
    sub_kind = I[io + s]
    base = io + A + 4 * s
    _leaf_row(sub_kind, I, io + I[base], F, fo + I[base + 2], A,
              x, xlen, z, 1, gpos, out, ob)


cdef inline Py_ssize_t _sample_row(const double[::1] row, Py_ssize_t rb,
                                   Py_ssize_t A, double u):
    # first a with u < cumsum(row)[a]; clamp and walk off zero cells
    cdef Py_ssize_t a
    cdef double c = 0.0
    for a in range(A):
        c = c + row[rb + a]
        if u < c:
            return a
    a = A - 1
    while a > 0 and row[rb + a] == 0.0:
        a -= 1
    return a


def pred_bank(bank, x):
    """Predictive rows for every model: shape (n_models, len(x)+1, A)."""
    cdef const long long[::1] xv = np.ascontiguousarray(x, dtype=np.int64)
    cdef const long long[::1] kinds = bank.kinds
    cdef const long long[::1] int_off = bank.int_off
    cdef const long long[::1] I = bank.int_data
    cdef const long long[::1] float_off = bank.float_off
    cdef const double[::1] F = bank.float_data
    cdef Py_ssize_t A = bank.alphabet
    cdef Py_ssize_t n = kinds.shape[0]
    cdef Py_ssize_t L = xv.shape[0]
    out_arr = np.empty(n * (L + 1) * A, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef const long long[::1] empty_z = np.empty(0, dtype=np.int64)
    cdef Py_ssize_t m, pos
    for m in range(n):
        for pos in range(L + 1):
            _model_row(kinds[m], I, int_off[m], F, float_off[m], A,
                       xv, L, empty_z, pos, out, (m * (L + 1) + pos) * A)
    return out_arr.reshape(n, L + 1, A)


def block_probs(bank, model_index, x, h):
    """Probabilities of all length-h continuations of ``x``, lexicographic."""
    cdef const long long[::1] xv = np.ascontiguousarray(x, dtype=np.int64)
    cdef const long long[::1] kinds = bank.kinds
    cdef const long long[::1] int_off = bank.int_off
    cdef const long long[::1] I = bank.int_data
    cdef const long long[::1] float_off = bank.float_off
    cdef const double[::1] F = bank.float_data
    cdef Py_ssize_t A = bank.alphabet
    cdef Py_ssize_t hh = h
    cdef Py_ssize_t L = xv.shape[0]
    cdef Py_ssize_t m = model_index
    out_arr = np.empty(int(bank.alphabet) ** int(h), dtype=np.float64)
    cdef double[::1] out = out_arr
    z_arr = np.zeros(hh if hh > 0 else 1, dtype=np.int64)
    cdef long long[::1] z = z_arr
    rows_arr = np.empty((hh if hh > 0 else 1) * A, dtype=np.float64)
    cdef double[::1] rows = rows_arr
    prod_arr = np.empty(hh + 1, dtype=np.float64)
    cdef double[::1] prod = prod_arr
    if hh == 0:
        out_arr[0] = 1.0
        return out_arr

    # iterative DFS over blocks in lexicographic order
    cdef long long kind = kinds[m]
    cdef Py_ssize_t io = int_off[m], fo = float_off[m]
    cdef Py_ssize_t depth = 0, leaf = 0
    cdef Py_ssize_t a
    prod[0] = 1.0
    z[0] = 0
    _model_row(kind, I, io, F, fo, A, xv, L, z, L, rows, 0)
    while True:
        a = z[depth]
        prod[depth + 1] = prod[depth] * rows[depth * A + a]
        if depth + 1 == hh:
            out[leaf] = prod[depth + 1]
            leaf += 1
            # backtrack to the deepest level with symbols left
            while depth >= 0 and z[depth] == A - 1:
                depth -= 1
            if depth < 0:
                break
            z[depth] += 1
        else:
            depth += 1
            z[depth] = 0
            _model_row(kind, I, io, F, fo, A, xv, L, z, L + depth, rows, depth * A)
    return out_arr


def mc_block_scores(bank, p_index, q_index, x, h, uniforms):
    """Per-sample scores |P(z|x) - Q(z|x)| / mix(z|x), z ~ the even mixture."""
    cdef const long long[::1] xv = np.ascontiguousarray(x, dtype=np.int64)
    u_arr = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef const double[:, ::1] u = u_arr
    cdef const long long[::1] kinds = bank.kinds
    cdef const long long[::1] int_off = bank.int_off
    cdef const long long[::1] I = bank.int_data
    cdef const long long[::1] float_off = bank.float_off
    cdef const double[::1] F = bank.float_data
    cdef Py_ssize_t A = bank.alphabet
    cdef Py_ssize_t hh = h
    cdef Py_ssize_t L = xv.shape[0]
    cdef Py_ssize_t n = u.shape[0]
    cdef long long kp = kinds[p_index], kq = kinds[q_index]
    cdef Py_ssize_t iop = int_off[p_index], fop = float_off[p_index]
    cdef Py_ssize_t ioq = int_off[q_index], foq = float_off[q_index]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    z_arr = np.zeros(hh if hh > 0 else 1, dtype=np.int64)
    cdef long long[::1] z = z_arr
    row_arr = np.empty(2 * A, dtype=np.float64)
    cdef double[::1] rowbuf = row_arr
    cdef Py_ssize_t i, j, s
    cdef double pp, qq
    cdef bint choose_p
    for i in range(n):
        choose_p = u[i, 0] < 0.5
        pp = 1.0
        qq = 1.0
        for j in range(hh):
            _model_row(kp, I, iop, F, fop, A, xv, L, z, L + j, rowbuf, 0)
            _model_row(kq, I, ioq, F, foq, A, xv, L, z, L + j, rowbuf, A)
            if choose_p:
                s = _sample_row(rowbuf, 0, A, u[i, 1 + j])
            else:
                s = _sample_row(rowbuf, A, A, u[i, 1 + j])
            z[j] = s
            pp = pp * rowbuf[s]
            qq = qq * rowbuf[A + s]
        out[i] = fabs(pp - qq) / (0.5 * (pp + qq))
    return out_arr


def sample_path(bank, model_index, length, uniforms):
    """Draw one path of ``length`` symbols, one uniform per step."""
    u_arr = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef const double[::1] u = u_arr
    cdef const long long[::1] kinds = bank.kinds
    cdef const long long[::1] int_off = bank.int_off
    cdef const long long[::1] I = bank.int_data
    cdef const long long[::1] float_off = bank.float_off
    cdef const double[::1] F = bank.float_data
    cdef Py_ssize_t A = bank.alphabet
    cdef Py_ssize_t L = length
    cdef Py_ssize_t m = model_index
    out_arr = np.empty(L, dtype=np.int64)
    cdef long long[::1] out = out_arr
    row_arr = np.empty(A, dtype=np.float64)
    cdef double[::1] row = row_arr
    cdef const long long[::1] empty_x = np.empty(0, dtype=np.int64)
    cdef Py_ssize_t t
    for t in range(L):
        _model_row(kinds[m], I, int_off[m], F, float_off[m], A,
                   empty_x, 0, out, t, row, 0)
        out[t] = _sample_row(row, 0, A, u[t])
    return out_arr
