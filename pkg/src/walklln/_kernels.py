"""numba inner loops.  Everything here works on plain integer arrays."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def alias_pick(u, prob, alias):
    k = prob.shape[0]
    out = np.empty(u.shape[0], np.int64)
    for t in range(u.shape[0]):
        x = u[t] * k
        col = int(x)
        if col >= k:
            col = k - 1
        if x - col < prob[col]:
            out[t] = col
        else:
            out[t] = alias[col]
    return out


@njit(cache=True, nogil=True)
def free_tree_walk(choices, atom_letters, atom_len, n_letters):
    """Walk on the Cayley tree of a free group, numbering vertices on creation.

    Letter codes: ``2*(i-1)`` is generator i, ``2*(i-1)+1`` its inverse, so
    ``code ^ 1`` inverts.  Returns (site id per position, node count, parent,
    last letter); the root (identity) is node 0.
    """
    n = choices.shape[0]
    max_len = max(1, int(atom_len.max()))
    cap = 1 + n * max_len
    child = np.full((cap, n_letters), -1, np.int64)
    parent = np.full(cap, -1, np.int64)
    last = np.full(cap, -1, np.int64)
    ids = np.empty(n + 1, np.int64)
    ids[0] = 0
    n_nodes = 1
    cur = 0
    for t in range(n):
        a = choices[t]
        for q in range(atom_len[a]):
            c = atom_letters[a, q]
            if last[cur] == (c ^ 1):
                cur = parent[cur]
            else:
                nxt = child[cur, c]
                if nxt < 0:
                    nxt = n_nodes
                    child[cur, c] = nxt
                    parent[nxt] = cur
                    last[nxt] = c
                    n_nodes += 1
                cur = nxt
        ids[t + 1] = cur
    return ids, n_nodes, parent[:n_nodes].copy(), last[:n_nodes].copy()


@njit(cache=True, nogil=True)
def free_returns_chunk(choices, atom_letters, atom_len, stack, state, times, t0):
    """Advance a stack-represented free-group walk over one chunk of choices.

    ``state`` = [depth, returns found, max returns].  Return times are written
    to ``times``.  Returns the number of choices consumed (early exit once
    ``max returns`` is reached).
    """
    depth = state[0]
    found = state[1]
    want = state[2]
    for t in range(choices.shape[0]):
        a = choices[t]
        for q in range(atom_len[a]):
            c = atom_letters[a, q]
            if depth > 0 and stack[depth - 1] == (c ^ 1):
                depth -= 1
            else:
                stack[depth] = c
                depth += 1
        if depth == 0:
            times[found] = t0 + t + 1
            found += 1
            if found >= want:
                state[0] = depth
                state[1] = found
                return t + 1
    state[0] = depth
    state[1] = found
    return choices.shape[0]


@njit(cache=True, nogil=True)
def lattice_returns_chunk(choices, atoms, pos, state, times, t0):
    """Lattice counterpart of :func:`free_returns_chunk`; ``pos`` is mutated."""
    found = state[1]
    want = state[2]
    d = atoms.shape[1]
    for t in range(choices.shape[0]):
        a = choices[t]
        zero = True
        for i in range(d):
            pos[i] += atoms[a, i]
            if pos[i] != 0:
                zero = False
        if zero:
            times[found] = t0 + t + 1
            found += 1
            if found >= want:
                state[1] = found
                return t + 1
    state[1] = found
    return choices.shape[0]


@njit(cache=True, nogil=True)
def histogram_snapshots(ids, n_sites, checkpoints, width):
    """Stream site ids into local-time counts; snapshot R^(k) at each checkpoint.

    Row r holds the histogram after the first ``checkpoints[r]`` positions;
    column k is the number of sites with local time exactly k (column 0 unused).
    """
    counts = np.zeros(n_sites, np.int64)
    hist = np.zeros(width, np.int64)
    out = np.zeros((checkpoints.shape[0], width), np.int64)
    r = 0
    for t in range(ids.shape[0]):
        while r < checkpoints.shape[0] and checkpoints[r] == t:
            out[r, :] = hist
            r += 1
        if r >= checkpoints.shape[0]:
            break
        s = ids[t]
        c = counts[s]
        if c > 0:
            hist[c] -= 1
        hist[c + 1] += 1
        counts[s] = c + 1
    while r < checkpoints.shape[0]:
        out[r, :] = hist
        r += 1
    return out
