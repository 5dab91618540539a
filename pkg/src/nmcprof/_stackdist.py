"""Compiled LRU stack-distance kernel (Fenwick tree over access times)."""
import numpy as np
from numba import njit


@njit(cache=True)
def stack_distances(ids, n_ids):
    """Distinct-id counts between consecutive uses of each id; -1 when cold.

    ``ids`` must be dense in ``0..n_ids-1``.  A position is marked while it
    holds the most recent use of its id, so the marks strictly between the
    previous use and now count the distinct ids touched in between.
    """
    n = ids.shape[0]
    tree = np.zeros(n + 1, dtype=np.int64)
    last = np.full(n_ids, -1, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    for t in range(n):
        x = ids[t]
        p = last[x]
        if p < 0:
            out[t] = -1
        else:
            # marks in positions p+1 .. t-1 (0-based) = prefix(t) - prefix(p+1)
            s = 0
            i = t
            while i > 0:
                s += tree[i]
                i -= i & -i
            i = p + 1
            while i > 0:
                s -= tree[i]
                i -= i & -i
            out[t] = s
            i = p + 1
            while i <= n:
                tree[i] -= 1
                i += i & -i
        i = t + 1
        while i <= n:
            tree[i] += 1
            i += i & -i
        last[x] = t
    return out
