"""Alphabets, words, shift presentations, eventually periodic points.

Words are tuples of symbol indices.  Every presentation is compiled to the
minimal deterministic automaton of its follower sets: state ``q`` stands for
the set of legal continuations of the words leading to it, state 0 is the
follower set of the empty word, and a missing transition means the extended
word is illegal.  All legality questions, including those about infinite
eventually periodic points, are answered exactly on that automaton.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import (
    ConfigError,
    EmptyLeafCylinder,
    IllegalBracket,
    IllegalPoint,
    IllegalWord,
    MismatchAtZero,
)

Word = tuple


# ---------------------------------------------------------------- alphabet


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple

    def __post_init__(self):
        if len(self.symbols) < 1:
            raise ConfigError("alphabet must contain at least one symbol")
        if len(set(self.symbols)) != len(self.symbols):
            raise ConfigError("alphabet symbols must be unique")

    @property
    def size(self) -> int:
        return len(self.symbols)

    @cached_property
    def _index(self) -> dict:
        return {s: i for i, s in enumerate(self.symbols)}

    def index(self, symbol) -> int:
        try:
            return self._index[str(symbol)]
        except KeyError:
            raise IllegalWord(f"symbol {symbol!r} not in alphabet {self.symbols}") from None

    def parse(self, text) -> Word:
        """Turn a string (single-character symbols) or a sequence into a word."""
        if isinstance(text, tuple) and all(isinstance(s, (int, np.integer)) for s in text):
            if any(not 0 <= s < self.size for s in text):
                raise IllegalWord(f"symbol index out of range in {text}")
            return tuple(int(s) for s in text)
        if isinstance(text, str):
            if all(len(s) == 1 for s in self.symbols):
                return tuple(self.index(c) for c in text)
            text = [t for t in text.replace(",", " ").split() if t]
        return tuple(self.index(s) for s in text)

    def format(self, word: Sequence[int]) -> str:
        if all(len(s) == 1 for s in self.symbols):
            return "".join(self.symbols[a] for a in word)
        return ",".join(self.symbols[a] for a in word)


# ---------------------------------------------------------------- graphs


@dataclass(frozen=True)
class LabeledGraph:
    """Finite directed graph with edges labeled by symbol indices."""

    n_vertices: int
    edges: tuple  # of (source, target, label)
    vertex_names: tuple = ()

    @cached_property
    def right_resolving(self) -> bool:
        seen = set()
        for s, _, a in self.edges:
            if (s, a) in seen:
                return False
            seen.add((s, a))
        return True

    def name(self, v: int) -> str:
        return self.vertex_names[v] if self.vertex_names else str(v)

    def essential(self) -> "LabeledGraph":
        """Remove vertices that cannot lie on a bi-infinite path."""
        alive = set(range(self.n_vertices))
        edges = list(self.edges)
        while True:
            out_deg = {v: 0 for v in alive}
            in_deg = {v: 0 for v in alive}
            for s, t, _ in edges:
                out_deg[s] += 1
                in_deg[t] += 1
            dead = {v for v in alive if out_deg[v] == 0 or in_deg[v] == 0}
            if not dead:
                break
            alive -= dead
            edges = [e for e in edges if e[0] in alive and e[1] in alive]
        keep = sorted(alive)
        remap = {v: i for i, v in enumerate(keep)}
        names = tuple(self.name(v) for v in keep)
        new_edges = tuple(sorted((remap[s], remap[t], a) for s, t, a in edges))
        return LabeledGraph(len(keep), new_edges, names)

    def reversed(self) -> "LabeledGraph":
        return LabeledGraph(
            self.n_vertices, tuple(sorted((t, s, a) for s, t, a in self.edges)), self.vertex_names
        )

    def adjacency(self) -> np.ndarray:
        mat = np.zeros((self.n_vertices, self.n_vertices))
        for s, t, _ in self.edges:
            mat[s, t] += 1.0
        return mat


def strongly_connected_components(n: int, succ: Sequence[Iterable[int]]) -> list[list[int]]:
    """Tarjan's algorithm, iterative; components listed in discovery order."""
    index = [0] * n
    low = [0] * n
    on_stack = [False] * n
    visited = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 1
    for root in range(n):
        if visited[root]:
            continue
        work = [(root, iter(succ[root]))]
        visited[root] = True
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if not visited[w]:
                    visited[w] = True
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(succ[w])))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


# ---------------------------------------------------------------- automaton


@dataclass(frozen=True, eq=False)
class FollowerAutomaton:
    """Minimal deterministic automaton of follower sets (start state 0)."""

    trans: np.ndarray  # (states, symbols), -1 where undefined

    @property
    def n_states(self) -> int:
        return self.trans.shape[0]

    def run(self, state: int, word: Sequence[int]) -> int:
        for a in word:
            if state < 0:
                return -1
            state = int(self.trans[state, a])
        return state

    @cached_property
    def recurrent(self) -> frozenset:
        """States reached by arbitrarily long words."""
        succ = [[int(t) for t in row if t >= 0] for row in self.trans]
        comps = strongly_connected_components(self.n_states, succ)
        cyclic = set()
        for comp in comps:
            if len(comp) > 1 or comp[0] in succ[comp[0]]:
                cyclic.update(comp)
        reach = set(cyclic)
        queue = deque(cyclic)
        while queue:
            v = queue.popleft()
            for w in succ[v]:
                if w not in reach:
                    reach.add(w)
                    queue.append(w)
        return frozenset(reach)

    @cached_property
    def terminal_components(self) -> list[list[int]]:
        succ = [[int(t) for t in row if t >= 0] for row in self.trans]
        comps = strongly_connected_components(self.n_states, succ)
        where = {v: i for i, c in enumerate(comps) for v in c}
        out = []
        for i, comp in enumerate(comps):
            if all(where[w] == i for v in comp for w in succ[v]):
                out.append(comp)
        return sorted(out)


def _determinize_and_minimize(graph: LabeledGraph, nsym: int) -> FollowerAutomaton:
    if graph.n_vertices == 0:
        return FollowerAutomaton(np.full((1, nsym), -1, dtype=np.int64))
    by_label = [[0] * graph.n_vertices for _ in range(nsym)]
    for s, t, a in graph.edges:
        by_label[a][s] |= 1 << t
    start = (1 << graph.n_vertices) - 1
    ids = {start: 0}
    order = [start]
    rows = []
    i = 0
    while i < len(order):
        subset = order[i]
        row = []
        for a in range(nsym):
            nxt = 0
            bits = subset
            v = 0
            while bits:
                if bits & 1:
                    nxt |= by_label[a][v]
                bits >>= 1
                v += 1
            if nxt == 0:
                row.append(-1)
            else:
                if nxt not in ids:
                    ids[nxt] = len(order)
                    order.append(nxt)
                row.append(ids[nxt])
        rows.append(row)
        i += 1
    trans = np.array(rows, dtype=np.int64)
    # Moore refinement; every state accepts, a missing edge is the dead class.
    n = trans.shape[0]
    cls = [0] * n
    while True:
        sigs = {}
        new = []
        for q in range(n):
            sig = (cls[q],) + tuple(cls[t] if t >= 0 else -1 for t in trans[q])
            new.append(sigs.setdefault(sig, len(sigs)))
        if len(sigs) == len(set(cls)):
            cls = new
            break
        cls = new
    # Renumber classes in breadth-first order from the start state.
    order_cls = {cls[0]: 0}
    queue = deque([0])
    rep = {cls[0]: 0}
    while queue:
        q = queue.popleft()
        for t in trans[q]:
            if t >= 0 and cls[t] not in order_cls:
                order_cls[cls[t]] = len(order_cls)
                rep[cls[t]] = int(t)
                queue.append(int(t))
    m = len(order_cls)
    out = np.full((m, nsym), -1, dtype=np.int64)
    for c, new_id in order_cls.items():
        q = rep[c]
        for a in range(nsym):
            t = trans[q, a]
            out[new_id, a] = order_cls[cls[t]] if t >= 0 else -1
    return FollowerAutomaton(out)


# ---------------------------------------------------------------- shift


def _contains(word: Sequence[int], pattern: Sequence[int]) -> bool:
    n, k = len(word), len(pattern)
    return any(tuple(word[i : i + k]) == tuple(pattern) for i in range(n - k + 1))


@dataclass(frozen=True)
class ShiftPresentation:
    """A shift space given by forbidden words or by a labeled graph.

    ``kind`` is ``"full"``, ``"sft"`` or ``"sofic"``.  For sofic shifts the
    shift is the set of label sequences of bi-infinite paths in ``graph``.
    """

    alphabet: Alphabet
    kind: str
    forbidden: tuple = ()
    graph: LabeledGraph | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("full", "sft", "sofic"):
            raise ConfigError(f"unknown shift kind {self.kind!r}")
        if self.kind == "sofic" and self.graph is None:
            raise ConfigError("sofic shift needs a graph")
        if any(len(f) == 0 for f in self.forbidden):
            raise ConfigError("forbidden words must be nonempty")
        if self.kind == "sofic":
            for s, t, a in self.graph.edges:
                if not (0 <= s < self.graph.n_vertices and 0 <= t < self.graph.n_vertices):
                    raise ConfigError(f"edge {(s, t, a)} refers to a missing vertex")
                if not 0 <= a < self.alphabet.size:
                    raise ConfigError(f"edge label {a} outside the alphabet")

    # -- construction helpers
    @property
    def nsym(self) -> int:
        return self.alphabet.size

    @property
    def memory(self) -> int:
        if self.kind == "sofic":
            return 0
        return max((len(f) for f in self.forbidden), default=1)

    def word(self, text) -> Word:
        return self.alphabet.parse(text)

    def fmt(self, word: Sequence[int]) -> str:
        return self.alphabet.format(word)

    def point(self, left, core, right, anchor: int = 0) -> "Point":
        return Point(self.word(left), self.word(core), self.word(right), anchor)

    @cached_property
    def presentation(self) -> LabeledGraph:
        """Essential labeled graph whose bi-infinite paths spell the points."""
        if self.kind == "sofic":
            return self.graph.essential()
        k = self.memory
        blocks = [b for b in _all_words(self.nsym, k - 1) if not self._hits(b)]
        index = {b: i for i, b in enumerate(blocks)}
        edges = []
        for b in blocks:
            for a in range(self.nsym):
                c = b + (a,)
                if self._hits(c):
                    continue
                edges.append((index[b], index[c[1:]], a))
        names = tuple(self.fmt(b) for b in blocks)
        return LabeledGraph(len(blocks), tuple(sorted(edges)), names).essential()

    def _hits(self, word) -> bool:
        return any(_contains(word, f) for f in self.forbidden)

    @cached_property
    def automaton(self) -> FollowerAutomaton:
        return _determinize_and_minimize(self.presentation, self.nsym)

    @property
    def is_empty(self) -> bool:
        return self.presentation.n_vertices == 0

    def reversed(self) -> "ShiftPresentation":
        """The shift read right to left: x ↦ (x_{-i})_i."""
        return _reversed_cache(self)

    # -- language
    def is_legal(self, word: Sequence[int]) -> bool:
        if self.is_empty:
            return False
        return self.automaton.run(0, word) >= 0

    def language_array(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Lexicographically sorted (|L_n|, n) array of L_n and end states."""
        cache = self.__dict__.setdefault("_lang_cache", {})
        if n in cache:
            return cache[n]
        if n == 0:
            if self.is_empty:
                res = (np.zeros((0, 0), dtype=np.uint8), np.zeros(0, dtype=np.int64))
            else:
                res = (np.zeros((1, 0), dtype=np.uint8), np.zeros(1, dtype=np.int64))
        else:
            words, states = self.language_array(n - 1)
            res = _kernels.extend_words(words, states, self.automaton.trans)
        cache[n] = res
        return res

    def words(self, n: int) -> list[Word]:
        arr, _ = self.language_array(n)
        return [tuple(int(a) for a in row) for row in arr]

    def extensions_from(self, state: int, m: int) -> list[Word]:
        words = np.zeros((1, 0), dtype=np.uint8)
        states = np.array([state], dtype=np.int64)
        for _ in range(m):
            words, states = _kernels.extend_words(words, states, self.automaton.trans)
        return [tuple(int(a) for a in row) for row in words]

    # -- points
    def past_state(self, x: "Point") -> int:
        """Automaton state after the left-infinite past x_{(-inf,0)}; -1 if illegal."""
        if self.is_empty:
            return -1
        c0, _ = x.explicit_range()
        cycle = x.window(c0 - len(x.left), c0)
        q = 0
        for _ in range(self.automaton.n_states + 2):
            nq = self.automaton.run(q, cycle)
            if nq < 0:
                return -1
            if nq == q:
                break
            q = nq
        else:  # pragma: no cover - impossible for a minimal automaton
            raise RuntimeError("left cycle did not stabilise")
        return self.automaton.run(q, x.window(c0, 0))

    def future_readable(self, state: int, x: "Point", start: int = 0) -> bool:
        """Whether x_{[start, inf)} can be read from ``state``."""
        if state < 0:
            return False
        _, c1 = x.explicit_range()
        c1 = max(c1, start)
        state = self.automaton.run(state, x.window(start, c1))
        cycle = x.window(c1, c1 + len(x.right))
        seen = set()
        while state >= 0 and state not in seen:
            seen.add(state)
            state = self.automaton.run(state, cycle)
        return state >= 0

    def is_legal_point(self, x: "Point") -> bool:
        return self.future_readable(self.past_state(x), x)

    def check_point(self, x: "Point") -> None:
        if not self.is_legal_point(x):
            raise IllegalPoint(f"point {x.describe(self)} is not in the shift")


def _all_words(nsym: int, n: int):
    if n <= 0:
        return [()]
    out = [()]
    for _ in range(n):
        out = [w + (a,) for w in out for a in range(nsym)]
    return out


_REVERSED: dict = {}


def _reversed_cache(spec: ShiftPresentation) -> ShiftPresentation:
    key = id(spec)
    hit = _REVERSED.get(key)
    if hit is not None and hit[0] is spec:
        return hit[1]
    if spec.kind == "sofic":
        rev = ShiftPresentation(spec.alphabet, "sofic", (), spec.graph.reversed(), spec.name + "~")
    else:
        rev = ShiftPresentation(
            spec.alphabet, spec.kind, tuple(f[::-1] for f in spec.forbidden), None, spec.name + "~"
        )
    _REVERSED[key] = (spec, rev)
    return rev


# ---------------------------------------------------------------- points


@dataclass(frozen=True)
class Point:
    """Eventually periodic bi-infinite sequence.

    Coordinate ``i`` holds ``core[i + anchor]`` when that index lies in the
    core; to the right of the core ``right`` repeats forever, to the left
    ``left`` repeats forever (its last symbol just before the core).
    """

    left: tuple
    core: tuple
    right: tuple
    anchor: int = 0

    def __post_init__(self):
        if not self.left or not self.right:
            raise IllegalPoint("left and right cycles must be nonempty")

    def __getitem__(self, i: int) -> int:
        j = i + self.anchor
        if 0 <= j < len(self.core):
            return self.core[j]
        if j >= len(self.core):
            return self.right[(j - len(self.core)) % len(self.right)]
        return self.left[j % len(self.left)]

    def window(self, i: int, j: int) -> Word:
        """The word x_{[i, j)}."""
        return tuple(self[k] for k in range(i, j))

    def explicit_range(self) -> tuple[int, int]:
        """Coordinates [c0, c1) outside of which the point is purely periodic, with c0 ≤ 0 < c1."""
        a = -self.anchor
        return min(a, 0), max(a + len(self.core), 1)

    def shift(self, n: int = 1) -> "Point":
        """σ^n x, i.e. (σ^n x)_i = x_{i+n}."""
        return Point(self.left, self.core, self.right, self.anchor + n).normalized()

    def normalized(self) -> "Point":
        c0, c1 = self.explicit_range()
        return Point(
            self.window(c0 - len(self.left), c0),
            self.window(c0, c1),
            self.window(c1, c1 + len(self.right)),
            -c0,
        )

    def reversed(self) -> "Point":
        """The point y with y_i = x_{-i}."""
        c0, c1 = self.explicit_range()
        return Point(
            self.window(c1, c1 + len(self.right))[::-1],
            self.window(c0, c1)[::-1],
            self.window(c0 - len(self.left), c0)[::-1],
            c1 - 1,
        )

    def with_past_of(self, other: "Point") -> "Point":
        return bracket(other, self)

    def agrees(self, other: "Point", lo: int, hi: int) -> bool:
        return self.window(lo, hi) == other.window(lo, hi)

    def same_as(self, other: "Point") -> bool:
        a0, a1 = self.explicit_range()
        b0, b1 = other.explicit_range()
        lo = min(a0, b0) - math.lcm(len(self.left), len(other.left))
        hi = max(a1, b1) + math.lcm(len(self.right), len(other.right))
        return self.agrees(other, lo, hi)

    def describe(self, spec: ShiftPresentation | None = None) -> str:
        fmt = spec.fmt if spec is not None else (lambda w: "".join(map(str, w)))
        c0, c1 = self.explicit_range()
        return f"({fmt(self.window(c0 - len(self.left), c0))})^inf {fmt(self.window(c0, 0))}.{fmt(self.window(0, c1))} ({fmt(self.window(c1, c1 + len(self.right)))})^inf"


def bracket(x: Point, y: Point, spec: ShiftPresentation | None = None) -> Point:
    """[x, y]: the past of x (through coordinate 0) spliced to the future of y."""
    if x[0] != y[0]:
        raise MismatchAtZero(f"x_0={x[0]} differs from y_0={y[0]}")
    cx, _ = x.explicit_range()
    _, cy = y.explicit_range()
    z = Point(
        x.window(cx - len(x.left), cx),
        x.window(cx, 1) + y.window(1, cy),
        y.window(cy, cy + len(y.right)),
        -cx,
    )
    if spec is not None and not spec.is_legal_point(z):
        raise IllegalBracket("the spliced sequence leaves the shift")
    return z


# ---------------------------------------------------------------- operations


def enumerate_language(spec: ShiftPresentation, n: int) -> list[Word]:
    """All legal words of length n in lexicographic order."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return spec.words(n)


def is_legal(spec: ShiftPresentation, w) -> bool:
    return spec.is_legal(spec.word(w))


def leaf_extensions(spec: ShiftPresentation, x: Point, w, m: int) -> list[Word]:
    """Words v of length m such that the leaf of x meets [wv]^+."""
    w = spec.word(w)
    state = spec.past_state(x)
    if state < 0:
        raise IllegalPoint("base point is not in the shift")
    if not w or w[0] != x[0]:
        raise EmptyLeafCylinder("word must start with x_0")
    state = spec.automaton.run(state, w)
    if state < 0:
        raise EmptyLeafCylinder(f"leaf of x misses [{spec.fmt(w)}]^+")
    return spec.extensions_from(state, m)


def follower_graph(spec: ShiftPresentation) -> LabeledGraph:
    """Canonical right-resolving presentation.

    For shifts of finite type this is the essential block graph on L_{k-1};
    for sofic shifts it is the terminal part of the minimal follower-set
    automaton.
    """
    if spec.kind != "sofic":
        return spec.presentation
    auto = spec.automaton
    keep = sorted(v for comp in auto.terminal_components for v in comp)
    remap = {v: i for i, v in enumerate(keep)}
    edges = []
    for v in keep:
        for a in range(spec.nsym):
            t = int(auto.trans[v, a])
            if t >= 0 and t in remap:
                edges.append((remap[v], remap[t], a))
    return LabeledGraph(len(keep), tuple(sorted(edges)), tuple(f"F{v}" for v in keep))


def random_point(spec: ShiftPresentation, rng: np.random.Generator, core_len: int = 4) -> Point:
    """Random legal eventually periodic point built from a walk on the presentation."""
    g = spec.presentation
    if g.n_vertices == 0:
        raise IllegalPoint("empty shift has no points")
    out_edges = [[] for _ in range(g.n_vertices)]
    for s, t, a in g.edges:
        out_edges[s].append((t, a))

    def walk_to_cycle(v):
        path_v, labels = [v], []
        while True:
            t, a = out_edges[v][rng.integers(len(out_edges[v]))]
            labels.append(a)
            if t in path_v:
                k = path_v.index(t)
                return t, tuple(labels[:k]), tuple(labels[k:])
            path_v.append(t)
            v = t

    v0 = int(rng.integers(g.n_vertices))
    u, _, left = walk_to_cycle(v0)
    labels = []
    v = u
    for _ in range(core_len):
        t, a = out_edges[v][rng.integers(len(out_edges[v]))]
        labels.append(a)
        v = t
    w, pre, right = walk_to_cycle(v)
    core = tuple(labels) + pre
    anchor = int(rng.integers(len(core) + 1)) if core else 0
    return Point(left, core, right, anchor)


def point_with_window(spec: ShiftPresentation, word, start: int, rng: np.random.Generator | None = None) -> Point:
    """Legal eventually periodic point whose coordinates [start, start + |word|) spell ``word``.

    Choices are the first available ones unless ``rng`` is given.
    """
    word = spec.word(word)
    g = spec.presentation
    out_edges = [[] for _ in range(g.n_vertices)]
    in_edges = [[] for _ in range(g.n_vertices)]
    for s, t, a in g.edges:
        out_edges[s].append((t, a))
        in_edges[t].append((s, a))

    def pick(options):
        return options[int(rng.integers(len(options)))] if rng is not None else options[0]

    starts = list(range(g.n_vertices))
    if rng is not None:
        rng.shuffle(starts)
    path = None
    for v0 in starts:
        frontier = [(v0, [v0])]
        for a in word:
            frontier = [(t, p + [t]) for v, p in frontier for t, b in out_edges[v] if b == a][:64]
            if not frontier:
                break
        if frontier:
            path = pick(frontier)[1]
            break
    if path is None:
        raise IllegalWord(f"{spec.fmt(word)} is not in the language")

    def to_cycle(v, edges):
        seen, labels = [v], []
        while True:
            t, a = pick(edges[v])
            labels.append(a)
            if t in seen:
                k = seen.index(t)
                return tuple(labels[:k]), tuple(labels[k:])
            seen.append(t)
            v = t

    pre, left = to_cycle(path[0], in_edges)
    post, right = to_cycle(path[-1], out_edges)
    core = pre[::-1] + word + post
    return Point(left[::-1], core, right, len(pre) - start).normalized()


# ---------------------------------------------------------------- presets & config


def full_shift(n: int = 2) -> ShiftPresentation:
    return ShiftPresentation(Alphabet(tuple(str(i) for i in range(n))), "full", (), None, f"full{n}")


def golden_mean() -> ShiftPresentation:
    return ShiftPresentation(Alphabet(("0", "1")), "sft", ((1, 1),), None, "golden-mean")


def even_shift() -> ShiftPresentation:
    # vertex 0 may emit 1 freely; 0s come in pairs 0 -> 1 -> 0
    graph = LabeledGraph(2, ((0, 0, 1), (0, 1, 0), (1, 0, 0)), ("A", "B"))
    return ShiftPresentation(Alphabet(("0", "1")), "sofic", (), graph, "even-shift")


PRESETS = {"full2": full_shift, "golden-mean": golden_mean, "even-shift": even_shift}


def preset(name: str) -> ShiftPresentation:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory() if name != "full2" else factory(2)


def shift_from_config(cfg) -> ShiftPresentation:
    """Build a presentation from a preset name or a JSON-style mapping."""
    if isinstance(cfg, str):
        return preset(cfg)
    if not isinstance(cfg, dict):
        raise ConfigError("shift config must be a preset name or an object")
    if "preset" in cfg:
        return preset(cfg["preset"])
    kind = cfg.get("kind", "sft")
    symbols = cfg.get("alphabet")
    if kind == "sofic":
        edges_raw = cfg.get("edges")
        if not edges_raw:
            raise ConfigError("sofic shift needs a nonempty 'edges' list")
        if symbols is None:
            symbols = sorted({str(e[2]) for e in edges_raw})
        alphabet = Alphabet(tuple(str(s) for s in symbols))
        names = []
        for e in edges_raw:
            if len(e) != 3:
                raise ConfigError(f"edge {e!r} must be [source, target, label]")
            for v in e[:2]:
                if str(v) not in names:
                    names.append(str(v))
        vid = {v: i for i, v in enumerate(names)}
        edges = tuple(
            sorted((vid[str(s)], vid[str(t)], alphabet.index(str(a))) for s, t, a in edges_raw)
        )
        return ShiftPresentation(alphabet, "sofic", (), LabeledGraph(len(names), edges, tuple(names)), cfg.get("name", "sofic"))
    if symbols is None:
        raise ConfigError("shift config needs an 'alphabet'")
    alphabet = Alphabet(tuple(str(s) for s in symbols))
    if kind == "full":
        return ShiftPresentation(alphabet, "full", (), None, cfg.get("name", "full"))
    if kind != "sft":
        raise ConfigError(f"unknown shift kind {kind!r}")
    forbidden = tuple(alphabet.parse(f) for f in cfg.get("forbidden", []))
    if any(len(f) == 0 for f in forbidden):
        raise ConfigError("forbidden words must be nonempty")
    return ShiftPresentation(alphabet, "sft", forbidden, None, cfg.get("name", "sft"))


def avoiding(spec: ShiftPresentation, patterns, name: str = "") -> ShiftPresentation:
    """Presentation of the subshift of points containing none of ``patterns``.

    Built as the product of the presentation graph with a pattern-matching
    automaton whose states are the proper prefixes of the patterns.
    """
    patterns = [tuple(p) for p in patterns]
    if any(len(p) == 0 for p in patterns):
        raise ConfigError("patterns must be nonempty")
    prefixes = sorted({p[:i] for p in patterns for i in range(len(p))}, key=lambda t: (len(t), t))
    pid = {p: i for i, p in enumerate(prefixes)}
    pset = set(patterns)

    def step(prefix, a):
        s = prefix + (a,)
        if any(s[len(s) - len(p):] == p for p in pset if len(p) <= len(s)):
            return None
        for k in range(len(s), -1, -1):
            if s[len(s) - k:] in pid:
                return pid[s[len(s) - k:]]
        return 0  # pragma: no cover - the empty prefix always matches

    g = spec.presentation
    n_states = len(prefixes)
    edges = []
    for s, t, a in g.edges:
        for i, pre in enumerate(prefixes):
            j = step(pre, a)
            if j is not None:
                edges.append((s * n_states + i, t * n_states + j, a))
    names = tuple(f"{g.name(v)}|{spec.fmt(pre)}" for v in range(g.n_vertices) for pre in prefixes)
    graph = LabeledGraph(g.n_vertices * n_states, tuple(sorted(edges)), names).essential()
    return ShiftPresentation(spec.alphabet, "sofic", (), graph, name or f"{spec.name}-avoid")
