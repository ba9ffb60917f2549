"""Compiled RK4 propagation of a block of hierarchy columns.

A block of ``C`` complex columns is stored as a flat real array in which
row ``r`` occupies ``[r*2C, (r+1)*2C)`` and holds ``[Re x[r, :], Im x[r, :]]``.
Operators arrive as two real CSR matrices (real and imaginary part), so a
real entry updates a row in one contiguous loop and an imaginary entry in
two. All offsets are unsigned: numba then skips negative-index wraparound,
which otherwise blocks vectorisation of the column loops.
"""
from __future__ import annotations

import numba as nb
import numpy as np

# no nnan/ninf: the divergence check below relies on NaN and Inf surviving
_FASTMATH = {"nsz", "arcp", "contract", "afn", "reassoc"}


@nb.njit(nogil=True, cache=True, fastmath=_FASTMATH)
def _matvec_row(rp, rx, rv, ip, ix, iv, r, y, s, C, C2):
    for b in range(C2):
        s[b] = 0.0
    for p in range(rp[r], rp[r + 1]):
        o = rx[p] * C2
        v = rv[p]
        for b in range(C2):
            s[b] += v * y[o + b]
    for p in range(ip[r], ip[r + 1]):
        o = ix[p] * C2
        v = iv[p]
        for b in range(C):
            s[b] -= v * y[o + C + b]
        for b in range(C):
            s[C + b] += v * y[o + b]


@nb.njit(nogil=True, cache=True, fastmath=_FASTMATH)
def _stage(L, F, z, zo, y, x, acc, out, wacc, wy, mode, s, g, C, C2):
    """One RK4 stage fused with its update.

    ``k = L y - i z F y`` row by row, with ``z[zo : zo + 2C]`` holding
    ``[Re z, Im z]``, then
    mode 0: ``acc = x + wacc k``, ``out = x + wy k``;
    mode 1: ``acc += wacc k``,   ``out = x + wy k``;
    mode 2: ``out = acc + wacc k``.
    """
    rp, rx, rv, ip, ix, iv = L
    frp, frx, frv, fip, fix, fiv = F
    D = rp.size - 1
    for r in range(D):
        _matvec_row(rp, rx, rv, ip, ix, iv, r, y, s, C, C2)
        if frp[r + 1] > frp[r] or fip[r + 1] > fip[r]:
            _matvec_row(frp, frx, frv, fip, fix, fiv, r, y, g, C, C2)
            # -i z g
            for b in range(C):
                s[b] += z[zo + b] * g[C + b] + z[zo + C + b] * g[b]
            for b in range(C):
                s[C + b] += z[zo + C + b] * g[C + b] - z[zo + b] * g[b]
        q = np.uint64(r) * C2
        if mode == 0:
            for b in range(C2):
                acc[q + b] = x[q + b] + wacc * s[b]
            for b in range(C2):
                out[q + b] = x[q + b] + wy * s[b]
        elif mode == 1:
            for b in range(C2):
                acc[q + b] += wacc * s[b]
            for b in range(C2):
                out[q + b] = x[q + b] + wy * s[b]
        else:
            for b in range(C2):
                out[q + b] = acc[q + b] + wacc * s[b]


@nb.njit(nogil=True, cache=True, fastmath=_FASTMATH)
def rk4_block(L, F, z, x, h, nsteps, stride, rows, out, fail):
    """Classic RK4 for ``x' = L x - i z(t) F x`` on every column.

    ``z`` is ``(2 nsteps + 1, 2C)``: ``[Re z, Im z]`` of every column on the
    half-step grid. ``x`` is the flat ``(D, 2C)`` state, advanced in place.
    Rows ``rows`` of ``x`` are copied to ``out`` every ``stride`` steps,
    starting at t=0; ``fail[b]`` records the first step at which column
    ``b`` stopped being finite (``-1`` if never).
    """
    C2 = np.uint64(z.shape[1])
    C = C2 // np.uint64(2)
    zf = z.ravel()
    n_el = x.size
    D = n_el // z.shape[1]
    a = np.empty(n_el)
    b2 = np.empty(n_el)
    acc = np.empty(n_el)
    s = np.empty(C2)
    g = np.empty(C2)
    nrow = rows.size
    for j in range(nrow):
        q = np.uint64(rows[j]) * C2
        for b in range(C2):
            out[0, j, b] = x[q + b]
    h2 = 0.5 * h
    h3 = h / 3.0
    h6 = h / 6.0
    o = 1
    for n in range(nsteps):
        z0 = np.uint64(2 * n) * C2
        z1 = z0 + C2
        z2 = z1 + C2
        _stage(L, F, zf, z0, x, x, acc, a, h6, h2, 0, s, g, C, C2)
        _stage(L, F, zf, z1, a, x, acc, b2, h3, h2, 1, s, g, C, C2)
        _stage(L, F, zf, z1, b2, x, acc, a, h3, h, 1, s, g, C, C2)
        # the last stage does not read x, so it can write the new state there
        _stage(L, F, zf, z2, a, x, acc, x, h6, 0.0, 2, s, g, C, C2)
        if (n + 1) % stride == 0:
            for j in range(nrow):
                q = np.uint64(rows[j]) * C2
                for b in range(C2):
                    out[o, j, b] = x[q + b]
            for col in range(C):
                if fail[col] < 0:
                    for r in range(D):
                        q = np.uint64(r) * C2 + col
                        if not (np.isfinite(x[q]) and np.isfinite(x[q + C])):
                            fail[col] = n + 1
                            break
            o += 1
