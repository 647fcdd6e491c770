"""Pure-Python/numpy versions of the hot loops.

Must stay bit-compatible with ``_ckernels.pyx``: the benchmark and the test
suite compare the two directly.
"""

import numpy as np


def pivot(T, r, s):
    """Exchange pivot on a condensed tableau, in place.

    Row ``r`` / column ``s`` swap roles: the basic variable of row ``r``
    becomes the nonbasic variable of column ``s``.
    """
    p = T[r, s]
    row = T[r] / p
    col = T[:, s].copy()
    col[r] = 0.0
    nz = np.flatnonzero(col)
    if nz.size:
        T[nz] -= np.outer(col[nz], row)
        T[nz, s] = -col[nz] / p
    T[r] = row
    T[r, s] = 1.0 / p


def support_counts(rows, queries):
    """Per query mask, the number of row masks that contain it."""
    rows = np.asarray(rows, dtype=np.uint64)
    queries = np.asarray(queries, dtype=np.uint64)
    out = np.zeros(queries.size, dtype=np.int64)
    for q_idx, q in enumerate(queries):
        out[q_idx] = np.count_nonzero((rows & q) == q)
    return out


def enumerate_counts(hits, targets, n, absolute):
    """Minimize total deviation over all count vectors summing to ``n``.

    ``hits[a, i]`` is 1 when row type ``a`` contains constraint itemset ``i``.
    Vectors are visited in lexicographic order and only strict improvements
    replace the incumbent, so the witness is the lexicographically smallest
    optimal vector. Returns ``(best, witness)``; ``best`` is ``inf`` when no
    vector is admissible (overshoot model, some support always short).
    """
    hits = np.asarray(hits, dtype=np.int64)
    targets = [int(v) for v in targets]
    ntypes, m = hits.shape
    cols = [[int(hits[a, i]) for i in range(m)] for a in range(ntypes)]
    sup = [0] * m
    counts = [0] * ntypes
    best = [float("inf"), None]

    def score():
        total = 0
        for i in range(m):
            d = sup[i] - targets[i]
            if d < 0:
                if not absolute:
                    return None
                d = -d
            total += d
        return total

    def visit(a, remaining):
        if a == ntypes - 1:
            counts[a] = remaining
            h = cols[a]
            for i in range(m):
                sup[i] += remaining * h[i]
            val = score()
            if val is not None and val < best[0]:
                best[0] = val
                best[1] = tuple(counts)
            for i in range(m):
                sup[i] -= remaining * h[i]
            counts[a] = 0
            return
        h = cols[a]
        for c in range(remaining + 1):
            counts[a] = c
            visit(a + 1, remaining - c)
            for i in range(m):
                sup[i] += h[i]
        for i in range(m):
            sup[i] -= (remaining + 1) * h[i]
        counts[a] = 0

    visit(0, n)
    return best[0], best[1]
