"""Locally constant potentials, Birkhoff sums and word weights.

A potential with window [-l, r) is a table ``f`` on legal words of length
l + r; its value at a point y is ``f(y_{[-l, r)}) - c`` where ``c`` is the
normalisation constant.  Suprema of Birkhoff sums over cylinders reduce to
maxima over finitely many boundary extensions, so every weight computed here
is exact up to floating point rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping

import numpy as np

from . import _kernels
from .errors import (
    ConfigError,
    EmptyLeafCylinder,
    IllegalPoint,
    IllegalWindow,
    IllegalWord,
    NotOnSameLeaf,
)
from .symbolic import Point, ShiftPresentation, Word


class _EmptyWeight:
    """Weight of an empty set of points (the supremum over nothing)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY_WEIGHT"

    def __bool__(self):
        return False


EMPTY_WEIGHT = _EmptyWeight()


def exp_weight(value) -> float:
    """e^weight, with the empty marker mapped to 0."""
    return 0.0 if value is EMPTY_WEIGHT else math.exp(value)


@dataclass(frozen=True, eq=False)
class Potential:
    left: int
    right: int
    nsym: int
    table: Mapping  # window word -> value
    normalization: float = 0.0
    tail_bound: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.left < 0 or self.right < 1:
            raise ConfigError("window must satisfy left >= 0 and right >= 1")
        width = self.left + self.right
        for w in self.table:
            if len(w) != width:
                raise ConfigError(f"table key {w} has length {len(w)}, expected {width}")

    @property
    def width(self) -> int:
        return self.left + self.right

    @cached_property
    def dense(self) -> np.ndarray:
        """Normalised values indexed by the base-|A| code of the window."""
        arr = np.zeros(self.nsym ** self.width)
        for w, v in self.table.items():
            code = 0
            for a in w:
                code = code * self.nsym + a
            arr[code] = v - self.normalization
        return arr

    def value(self, window: Word) -> float:
        try:
            return self.table[tuple(window)] - self.normalization
        except KeyError:
            raise IllegalWindow(f"window {window} has no table entry") from None

    def at(self, x: Point) -> float:
        return self.value(x.window(-self.left, self.right))

    def normalized(self, c: float) -> "Potential":
        return replace(self, normalization=float(c))

    def shifted(self, delta: float) -> "Potential":
        return replace(self, normalization=self.normalization + float(delta))

    @cached_property
    def sup_norm(self) -> float:
        return max((abs(v - self.normalization) for v in self.table.values()), default=0.0)

    @cached_property
    def oscillation(self) -> float:
        vals = list(self.table.values())
        return (max(vals) - min(vals)) if vals else 0.0

    @cached_property
    def is_constant(self) -> bool:
        return self.oscillation == 0.0

    def check(self, spec: ShiftPresentation) -> None:
        """Raise IllegalWindow unless every legal window has a table entry."""
        for w in spec.words(self.width):
            if w not in self.table:
                raise IllegalWindow(f"legal window {spec.fmt(w)} missing from the table")

    def reversed(self) -> "Potential":
        """Potential on the reversed shift; window [-(r-1), l+1)."""
        return _reverse_potential(self)


_REV_POT: dict = {}


def _reverse_potential(phi: Potential) -> Potential:
    hit = _REV_POT.get(id(phi))
    if hit is not None and hit[0] is phi:
        return hit[1]
    rev = Potential(
        phi.right - 1,
        phi.left + 1,
        phi.nsym,
        {w[::-1]: v for w, v in phi.table.items()},
        phi.normalization,
        phi.tail_bound,
        phi.label + "~",
    )
    _REV_POT[id(phi)] = (phi, rev)
    return rev


def constant_potential(spec: ShiftPresentation, value: float = 0.0) -> Potential:
    return Potential(0, 1, spec.nsym, {(a,): float(value) for a in range(spec.nsym)}, label="constant")


def potential_from_function(spec: ShiftPresentation, left: int, right: int, func) -> Potential:
    """Tabulate ``func(window_word)`` on all legal windows."""
    return Potential(left, right, spec.nsym, {w: float(func(w)) for w in spec.words(left + right)})


def potential_from_config(spec: ShiftPresentation, cfg) -> Potential:
    if cfg in (None, "mme", "zero"):
        return constant_potential(spec, 0.0)
    if not isinstance(cfg, dict):
        raise ConfigError("potential config must be 'mme' or an object")
    left = int(cfg.get("windowLeft", 0))
    right = int(cfg.get("windowRight", 1))
    table_raw = cfg.get("table", {})
    default = cfg.get("default")
    table = {}
    for key, val in table_raw.items():
        w = spec.word(key)
        table[w] = float(val)
    for w in spec.words(left + right):
        if w not in table:
            if default is None:
                raise ConfigError(f"potential table misses legal window {spec.fmt(w)}")
            table[w] = float(default)
    legal = set(spec.words(left + right))
    table = {w: v for w, v in table.items() if w in legal}
    return Potential(left, right, spec.nsym, table, 0.0, float(cfg.get("tailBound", 0.0)), cfg.get("label", ""))


# ---------------------------------------------------------------- Birkhoff sums


def birkhoff_sum(phi: Potential, x: Point, n: int, direction: str = "forward") -> float:
    if n < 0:
        raise ValueError("n must be nonnegative")
    if direction == "forward":
        return math.fsum(phi.value(x.window(k - phi.left, k + phi.right)) for k in range(n))
    if direction == "backward":
        return math.fsum(phi.value(x.window(-k - phi.left, -k + phi.right)) for k in range(n))
    raise ValueError("direction must be 'forward' or 'backward'")


# ---------------------------------------------------------------- leaf chain


class LeafChain:
    """Weighted automaton that reads a future symbol by symbol.

    A state is (follower-automaton state, last l+r-1 symbols read).  Reading
    a symbol either completes a potential window, contributing its value, or
    only fills the buffer (at the very beginning, right after the ``l``
    symbols of a base point's past).
    """

    def __init__(self, spec: ShiftPresentation, phi: Potential):
        self.spec = spec
        self.phi = phi
        self.keep = phi.width - 1
        self._ids: dict = {}
        self._keys: list = []
        self._nxt: list = []
        self._logw: list = []
        self._frozen = None

    def state(self, q: int, buf: tuple) -> int:
        if len(buf) > self.keep:
            raise ValueError("buffer longer than the chain memory")
        key = (int(q), tuple(buf))
        sid = self._ids.get(key)
        if sid is None:
            sid = len(self._keys)
            self._ids[key] = sid
            self._keys.append(key)
            self._nxt.append(None)
            self._logw.append(None)
            self._frozen = None
            self._expand_from(sid)
        return sid

    def _expand_from(self, sid: int) -> None:
        trans = self.spec.automaton.trans
        width = self.phi.width
        stack = [sid]
        while stack:
            s = stack.pop()
            if self._nxt[s] is not None:
                continue
            q, buf = self._keys[s]
            row_n, row_w = [], []
            for a in range(self.spec.nsym):
                t = int(trans[q, a])
                if t < 0:
                    row_n.append(-1)
                    row_w.append(0.0)
                    continue
                nb = buf + (a,)
                wv = 0.0
                if len(nb) == width:
                    wv = self.phi.value(nb)
                    nb = nb[1:]
                key = (t, nb)
                nid = self._ids.get(key)
                if nid is None:
                    nid = len(self._keys)
                    self._ids[key] = nid
                    self._keys.append(key)
                    self._nxt.append(None)
                    self._logw.append(None)
                    stack.append(nid)
                row_n.append(nid)
                row_w.append(wv)
            self._nxt[s] = row_n
            self._logw[s] = row_w

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self._frozen is None or self._frozen[0].shape[0] != len(self._keys):
            nxt = np.array(self._nxt, dtype=np.int64).reshape(len(self._keys), self.spec.nsym)
            logw = np.array(self._logw, dtype=np.float64).reshape(len(self._keys), self.spec.nsym)
            self._frozen = (nxt, logw)
            self.__dict__.pop("_tail_cache", None)
        return self._frozen

    @property
    def n_states(self) -> int:
        return len(self._keys)

    def key(self, sid: int):
        return self._keys[sid]

    def read(self, sid: int, word) -> tuple[int, float]:
        """Final state and summed window values after reading ``word``."""
        nxt, logw = self.arrays()
        acc = 0.0
        for a in word:
            t = nxt[sid, a]
            if t < 0:
                return -1, 0.0
            acc += logw[sid, a]
            sid = int(t)
        return sid, acc

    def read_many(self, sid: int, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nxt, logw = self.arrays()
        return _kernels.walk(words, sid, nxt, logw)

    def tail_extrema(self) -> tuple[np.ndarray, np.ndarray]:
        """Max and min over right extensions of length r-1 of the completed window sum."""
        cache = self.__dict__.get("_tail_cache")
        nxt, logw = self.arrays()
        if cache is not None and cache[0].shape[0] == nxt.shape[0]:
            return cache
        hi = np.zeros(nxt.shape[0])
        lo = np.zeros(nxt.shape[0])
        valid = nxt >= 0
        safe = np.where(valid, nxt, 0)
        for _ in range(self.phi.right - 1):
            cand_hi = np.where(valid, logw + hi[safe], -np.inf)
            cand_lo = np.where(valid, logw + lo[safe], np.inf)
            hi, lo = cand_hi.max(axis=1), cand_lo.min(axis=1)
        self.__dict__["_tail_cache"] = (hi, lo)
        return hi, lo

    def future_mass(self, m: int, pressure: float) -> np.ndarray:
        """Array G with G[k, s] = Σ over k-symbol continuations v of e^{S(v…) - kP} · e^{best tail}.

        This is the uniform-depth cover sum seen from state ``s``.
        """
        nxt, logw = self.arrays()
        hi, _ = self.tail_extrema()
        valid = nxt >= 0
        safe = np.where(valid, nxt, 0)
        factors = np.where(valid, np.exp(logw - pressure), 0.0)
        out = np.empty((m + 1, nxt.shape[0]))
        out[0] = np.exp(hi)
        for k in range(m):
            out[k + 1] = (factors * out[k][safe]).sum(axis=1)
        return out


_CHAINS: dict = {}


def leaf_chain(spec: ShiftPresentation, phi: Potential) -> LeafChain:
    """Shared chain per (shift, potential) pair."""
    key = (id(spec), id(phi))
    hit = _CHAINS.get(key)
    if hit is not None and hit[0] is spec and hit[1] is phi:
        return hit[2]
    chain = LeafChain(spec, phi)
    _CHAINS[key] = (spec, phi, chain)
    return chain


def leaf_context(spec: ShiftPresentation, phi: Potential, x: Point) -> int:
    """Chain state just before coordinate 0 on the unstable leaf of x."""
    q = spec.past_state(x)
    if q < 0 or not spec.future_readable(q, x):
        raise IllegalPoint(f"base point {x.describe(spec)} is not in the shift")
    return leaf_chain(spec, phi).state(q, x.window(-phi.left, 0))


# ---------------------------------------------------------------- weights


@dataclass(frozen=True)
class WeightQuery:
    word: tuple
    orientation: str = "forward"
    base: Point | None = None


def _leaf_weight_forward(spec, phi, x, w):
    if not w or w[0] != x[0]:
        return EMPTY_WEIGHT, None
    chain = leaf_chain(spec, phi)
    s0 = leaf_context(spec, phi, x)
    s, acc = chain.read(s0, w)
    if s < 0:
        return EMPTY_WEIGHT, None
    return s, acc


def weight(phi: Potential, spec: ShiftPresentation, q: WeightQuery):
    """Φ(w), Φ_x^+(w) or Φ_x^-(w) depending on the query.

    Returns ``EMPTY_WEIGHT`` when the set over which the supremum runs is
    empty (a leaf that misses the cylinder).
    """
    w = spec.word(q.word)
    if q.orientation not in ("forward", "backward"):
        raise ValueError("orientation must be 'forward' or 'backward'")
    if q.base is None:
        if not spec.is_legal(w):
            raise IllegalWord(f"{spec.fmt(w)} is not in the language")
        if not w:
            return 0.0
        return float(global_weight_table(spec, phi, len(w))[spec.fmt(w)])
    if q.orientation == "backward":
        return weight(phi.reversed(), spec.reversed(), WeightQuery(w[::-1], "forward", q.base.reversed()))
    if not w:
        return 0.0
    s, acc = _leaf_weight_forward(spec, phi, q.base, w)
    if s is EMPTY_WEIGHT:
        return EMPTY_WEIGHT
    hi, _ = leaf_chain(spec, phi).tail_extrema()
    return acc + float(hi[s])


def leaf_oscillation(phi: Potential, spec: ShiftPresentation, x: Point, w) -> float:
    """V_x^+(w): spread of S_{|w|}φ over the leaf cylinder of x and w."""
    w = spec.word(w)
    s, _ = _leaf_weight_forward(spec, phi, x, w)
    if s is EMPTY_WEIGHT:
        raise EmptyLeafCylinder(f"leaf of x misses [{spec.fmt(w)}]^+")
    hi, lo = leaf_chain(spec, phi).tail_extrema()
    return float(hi[s] - lo[s])


def global_weights(spec: ShiftPresentation, phi: Potential, n: int):
    """(L_n as array, Φ on L_n, minimum of S_nφ over [w]^+ on L_n)."""
    words, _ = spec.language_array(n)
    if n == 0:
        return words, np.zeros(len(words)), np.zeros(len(words))
    ext, _ = spec.language_array(phi.left + n + phi.right - 1)
    sums = _kernels.window_sums(ext, phi.dense, phi.width, spec.nsym)
    keys = _word_codes(ext[:, phi.left : phi.left + n], spec.nsym)
    index = np.searchsorted(_word_codes(words, spec.nsym), keys)
    hi = _kernels.group_max(index, sums, len(words))
    lo = -_kernels.group_max(index, -sums, len(words))
    return words, hi, lo


def _word_codes(words: np.ndarray, nsym: int) -> np.ndarray:
    if words.shape[1] == 0:
        return np.zeros(words.shape[0], dtype=np.int64)
    powers = nsym ** np.arange(words.shape[1] - 1, -1, -1, dtype=np.int64)
    return words.astype(np.int64) @ powers


def global_weight_table(spec, phi, n) -> dict:
    words, hi, _ = global_weights(spec, phi, n)
    return {spec.fmt(w): float(v) for w, v in zip(words, hi)}


# ---------------------------------------------------------------- Δ kernels


def delta(phi: Potential, spec: ShiftPresentation, x_prime: Point, x: Point, side: str) -> float:
    """Δ^s(x', x) (side='stable') or Δ^u(x', x) (side='unstable')."""
    reach = max(phi.left, phi.right) + 1
    if side == "stable":
        _, c1 = x.explicit_range()
        _, c1p = x_prime.explicit_range()
        hi = max(c1, c1p) + math.lcm(len(x.right), len(x_prime.right))
        if not x.agrees(x_prime, 0, hi):
            raise NotOnSameLeaf("stable pair must agree on all nonnegative coordinates")
        terms = [phi.at(x_prime.shift(n)) - phi.at(x.shift(n)) for n in range(reach)]
    elif side == "unstable":
        c0, _ = x.explicit_range()
        c0p, _ = x_prime.explicit_range()
        lo = min(c0, c0p) - math.lcm(len(x.left), len(x_prime.left))
        if not x.agrees(x_prime, lo, 1):
            raise NotOnSameLeaf("unstable pair must agree on all nonpositive coordinates")
        terms = [phi.at(x_prime.shift(-n)) - phi.at(x.shift(-n)) for n in range(reach)]
    else:
        raise ValueError("side must be 'stable' or 'unstable'")
    return math.fsum(terms)


def delta_sup(phi: Potential, spec: ShiftPresentation) -> float:
    """sup |Δ^s| and |Δ^u| over all legal pairs, i.e. C in the product-measure bounds."""
    best = 0.0
    l, r = phi.left, phi.right
    # stable: pasts differ in the l symbols before 0, common block z_{[0, l+r-1)}
    if l > 0:
        best = max(best, _delta_pairs(spec, phi, l, l + r - 1, lambda p, c: sum(
            phi.value((p + c)[n : n + l + r]) for n in range(l))))
    if r > 1:
        rev = phi.reversed()
        rspec = spec.reversed()
        best = max(best, _delta_pairs(rspec, rev, rev.left, rev.left + rev.right - 1, lambda p, c: sum(
            rev.value((p + c)[n : n + rev.width]) for n in range(rev.left))))
    return best


def _delta_pairs(spec, phi, plen, clen, value) -> float:
    groups: dict = {}
    for w in spec.words(plen + clen):
        p, c = w[:plen], w[plen:]
        v = value(p, c)
        lo, hi = groups.get(c, (v, v))
        groups[c] = (min(lo, v), max(hi, v))
    return max((hi - lo for lo, hi in groups.values()), default=0.0)


# ---------------------------------------------------------------- regularity


def regularity_constants(phi: Potential, spec: ShiftPresentation, n_max: int | None = None):
    """Bowen constant C and the Walters modulus k ↦ ε(k).

    ``C`` is the largest spread of S_nφ over a cylinder [w]^+; ``ε(k)`` is the
    largest spread when the points also agree on k extra symbols on each
    side.  Both are maxima over n ≤ n_max; for a window [-l, r) the spread
    stops changing once n exceeds l + r plus the automaton size.
    """
    l, r = phi.left, phi.right
    if n_max is None:
        n_max = min(l + r + spec.automaton.n_states + 2, 12)
    kmax = max(l, r - 1)
    eps = {k: 0.0 for k in range(kmax + 1)}
    if phi.is_constant:
        return 0.0, eps
    for n in range(1, n_max + 1):
        ext, _ = spec.language_array(l + n + r - 1)
        if ext.shape[0] == 0:
            continue
        sums = _kernels.window_sums(ext, phi.dense, phi.width, spec.nsym)
        total_len = ext.shape[1]
        for k in range(kmax + 1):
            a, b = max(0, l - k), min(total_len, l + n + k)
            codes = _word_codes(ext[:, a:b], spec.nsym)
            uniq, inv = np.unique(codes, return_inverse=True)
            hi = _kernels.group_max(inv, sums, len(uniq))
            lo = -_kernels.group_max(inv, -sums, len(uniq))
            eps[k] = max(eps[k], float((hi - lo).max()))
    return eps[0], eps
