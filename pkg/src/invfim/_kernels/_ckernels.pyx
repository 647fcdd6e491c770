# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Semantics mirror ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()


def pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t s):
    cdef Py_ssize_t nrows = T.shape[0], ncols = T.shape[1]
    cdef Py_ssize_t i, j
    cdef double p = T[r, s]
    cdef double c
    cdef double[::1] row = np.empty(ncols, dtype=np.float64)
    with nogil:
        for j in range(ncols):
            row[j] = T[r, j] / p
        for i in range(nrows):
            if i == r:
                continue
            c = T[i, s]
            if c == 0.0:
                continue
            for j in range(ncols):
                T[i, j] = T[i, j] - c * row[j]
            T[i, s] = -c / p
        for j in range(ncols):
            T[r, j] = row[j]
        T[r, s] = 1.0 / p


def support_counts(rows, queries):
    cdef uint64_t[::1] rv = np.ascontiguousarray(rows, dtype=np.uint64)
    cdef uint64_t[::1] qv = np.ascontiguousarray(queries, dtype=np.uint64)
    out = np.zeros(qv.shape[0], dtype=np.int64)
    cdef int64_t[::1] ov = out
    cdef Py_ssize_t a, q
    cdef uint64_t mask
    cdef int64_t cnt
    with nogil:
        for q in range(qv.shape[0]):
            mask = qv[q]
            cnt = 0
            for a in range(rv.shape[0]):
                if (rv[a] & mask) == mask:
                    cnt += 1
            ov[q] = cnt
    return out


def enumerate_counts(hits, targets, Py_ssize_t n, bint absolute):
    cdef int64_t[:, ::1] h = np.ascontiguousarray(hits, dtype=np.int64)
    cdef int64_t[::1] tg = np.ascontiguousarray(targets, dtype=np.int64)
    cdef Py_ssize_t ntypes = h.shape[0], m = h.shape[1]
    cdef int64_t[::1] sup = np.zeros(m, dtype=np.int64)
    cdef int64_t[::1] counts = np.zeros(ntypes, dtype=np.int64)
    cdef int64_t[::1] rem = np.zeros(ntypes + 1, dtype=np.int64)
    cdef int64_t[::1] witness = np.zeros(ntypes, dtype=np.int64)
    cdef int64_t best = -1, total, d
    cdef Py_ssize_t a, i, last = ntypes - 1
    cdef bint ok

    with nogil:
        # Odometer over compositions of n in lexicographic order; sup holds
        # the supports contributed by types 0..last.
        rem[0] = n
        for a in range(last):
            counts[a] = 0
            rem[a + 1] = n
        while True:
            counts[last] = rem[last]
            for i in range(m):
                sup[i] += counts[last] * h[last, i]
            ok = True
            total = 0
            for i in range(m):
                d = sup[i] - tg[i]
                if d < 0:
                    if not absolute:
                        ok = False
                        break
                    d = -d
                total += d
            if ok and (best < 0 or total < best):
                best = total
                for a in range(ntypes):
                    witness[a] = counts[a]
            for i in range(m):
                sup[i] -= counts[last] * h[last, i]
            counts[last] = 0
            # advance: rightmost position < last that can still grow
            a = last - 1
            while a >= 0 and rem[a + 1] == 0:
                for i in range(m):
                    sup[i] -= counts[a] * h[a, i]
                counts[a] = 0
                a -= 1
            if a < 0:
                break
            counts[a] += 1
            for i in range(m):
                sup[i] += h[a, i]
            rem[a + 1] = rem[a] - counts[a]
            for i in range(a + 1, last):
                rem[i + 1] = rem[a + 1]
    if best < 0:
        return float("inf"), None
    return int(best), tuple(int(v) for v in witness)
