"""Array kernels for word enumeration and weight evaluation.

Each kernel exists twice: a numba-compiled loop and a vectorised numpy
version.  Numba is used when it imports cleanly and the environment variable
``THERMOSHIFT_DISABLE_NUMBA`` is unset (or ``0``).  Both versions return
identical arrays; ``tests/test_kernels.py`` checks this.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_requested() -> bool:
    return os.environ.get("THERMOSHIFT_DISABLE_NUMBA", "0").strip().lower() in ("", "0", "false", "no")


try:
    if not _numba_requested():
        raise ImportError("disabled by THERMOSHIFT_DISABLE_NUMBA")
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    numba = None
    HAVE_NUMBA = False


# ---------------------------------------------------------------- numpy versions


def extend_words_numpy(words, states, trans):
    """Append every admissible symbol to every word.

    ``words`` is an (M, n) uint8 array, ``states`` the automaton state reached
    after each word and ``trans`` an (S, A) table with -1 for missing edges.
    Output rows are ordered by (parent row, symbol), which keeps lexicographic
    order when the input is sorted.
    """
    m, n = words.shape
    nsym = trans.shape[1]
    nxt = trans[states]  # (M, A)
    parent, sym = np.nonzero(nxt >= 0)
    out = np.empty((parent.size, n + 1), dtype=np.uint8)
    out[:, :n] = words[parent]
    out[:, n] = sym
    return out, nxt[parent, sym].astype(np.int64)


def window_sums_numpy(words, table, width, nsym):
    """Sum ``table[code(window)]`` over all complete windows of each row."""
    m, length = words.shape
    total = np.zeros(m, dtype=np.float64)
    if length < width:
        return total
    powers = nsym ** np.arange(width - 1, -1, -1, dtype=np.int64)
    for j in range(length - width + 1):
        codes = words[:, j : j + width].astype(np.int64) @ powers
        total += table[codes]
    return total


def group_max_numpy(keys, values, nkeys):
    out = np.full(nkeys, -np.inf)
    np.maximum.at(out, keys, values)
    return out


def walk_numpy(words, start, nxt, logw):
    """Run every row of ``words`` through a weighted automaton from ``start``.

    Returns the final state (-1 when some step is undefined) and the summed
    log-weight along the way.
    """
    m, n = words.shape
    state = np.full(m, start, dtype=np.int64)
    acc = np.zeros(m, dtype=np.float64)
    alive = np.ones(m, dtype=bool)
    for j in range(n):
        sym = words[:, j].astype(np.int64)
        safe = np.where(alive, state, 0)
        new = nxt[safe, sym]
        acc += np.where(alive & (new >= 0), logw[safe, sym], 0.0)
        alive &= new >= 0
        state = np.where(alive, new, -1)
    return state, acc


# ---------------------------------------------------------------- numba versions

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def extend_words_numba(words, states, trans):
        m, n = words.shape
        nsym = trans.shape[1]
        count = 0
        for i in range(m):
            for a in range(nsym):
                if trans[states[i], a] >= 0:
                    count += 1
        out = np.empty((count, n + 1), dtype=np.uint8)
        out_states = np.empty(count, dtype=np.int64)
        k = 0
        for i in range(m):
            for a in range(nsym):
                t = trans[states[i], a]
                if t >= 0:
                    for j in range(n):
                        out[k, j] = words[i, j]
                    out[k, n] = a
                    out_states[k] = t
                    k += 1
        return out, out_states

    @numba.njit(cache=True)
    def window_sums_numba(words, table, width, nsym):
        m, length = words.shape
        total = np.zeros(m, dtype=np.float64)
        if length < width:
            return total
        for i in range(m):
            s = 0.0
            for j in range(length - width + 1):
                code = 0
                for k in range(width):
                    code = code * nsym + words[i, j + k]
                s += table[code]
            total[i] = s
        return total

    @numba.njit(cache=True)
    def group_max_numba(keys, values, nkeys):
        out = np.full(nkeys, -np.inf)
        for i in range(keys.size):
            if values[i] > out[keys[i]]:
                out[keys[i]] = values[i]
        return out

    @numba.njit(cache=True)
    def walk_numba(words, start, nxt, logw):
        m, n = words.shape
        state = np.empty(m, dtype=np.int64)
        acc = np.zeros(m, dtype=np.float64)
        for i in range(m):
            s = start
            a = 0.0
            for j in range(n):
                sym = words[i, j]
                t = nxt[s, sym]
                if t < 0:
                    s = -1
                    break
                a += logw[s, sym]
                s = t
            state[i] = s
            acc[i] = a
        return state, acc


def _pick(name):
    if HAVE_NUMBA:
        return globals()[name + "_numba"]
    return globals()[name + "_numpy"]


def extend_words(words, states, trans):
    return _pick("extend_words")(
        np.ascontiguousarray(words, dtype=np.uint8),
        np.ascontiguousarray(states, dtype=np.int64),
        np.ascontiguousarray(trans, dtype=np.int64),
    )


def window_sums(words, table, width, nsym):
    return _pick("window_sums")(
        np.ascontiguousarray(words, dtype=np.uint8),
        np.ascontiguousarray(table, dtype=np.float64),
        int(width),
        int(nsym),
    )


def group_max(keys, values, nkeys):
    return _pick("group_max")(
        np.ascontiguousarray(keys, dtype=np.int64),
        np.ascontiguousarray(values, dtype=np.float64),
        int(nkeys),
    )


def walk(words, start, nxt, logw):
    return _pick("walk")(
        np.ascontiguousarray(words, dtype=np.uint8),
        int(start),
        np.ascontiguousarray(nxt, dtype=np.int64),
        np.ascontiguousarray(logw, dtype=np.float64),
    )


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
