"""Transfer-operator ground truth for locally constant potentials.

The shift is recoded to a weighted graph whose states remember the last
l + r - 1 symbols on top of a right-resolving presentation.  Its Perron
eigendata gives the pressure and the equilibrium (Markov or hidden Markov)
measure exactly, independently of the cover-based constructions elsewhere in
the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentMeasure, NotIrreducible, OracleUnavailable
from .intervals import Interval
from .potentials import Potential
from .symbolic import ShiftPresentation, follower_graph, strongly_connected_components


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    n_states: int
    edges: tuple  # (source, target, label, weight)
    nsym: int
    state_names: tuple = ()

    def matrix(self) -> np.ndarray:
        mat = np.zeros((self.n_states, self.n_states))
        for s, t, _, w in self.edges:
            mat[s, t] += w
        return mat

    def symbol_matrices(self) -> list[np.ndarray]:
        mats = [np.zeros((self.n_states, self.n_states)) for _ in range(self.nsym)]
        for s, t, a, w in self.edges:
            mats[a][s, t] += w
        return mats


@dataclass(frozen=True, eq=False)
class PerronData:
    rho: float
    left: np.ndarray
    right: np.ndarray
    residual: float

    @property
    def log_rho(self) -> float:
        return math.log(self.rho)


def recode(spec: ShiftPresentation, phi: Potential) -> WeightedGraph:
    """Weighted graph whose label paths carry e^{S_nφ} (normalised φ)."""
    if spec.kind not in ("full", "sft", "sofic"):
        raise OracleUnavailable(f"no finite presentation for kind {spec.kind}")
    if spec.is_empty:
        raise OracleUnavailable("empty shift")
    base = follower_graph(spec)
    keep = phi.width - 1
    out_edges = [[] for _ in range(base.n_vertices)]
    for s, t, a in base.edges:
        out_edges[s].append((t, a))
    frontier = {(v, ()) for v in range(base.n_vertices)}
    for _ in range(keep):
        frontier = {(t, buf + (a,)) for v, buf in frontier for t, a in out_edges[v]}
    ids = {}
    order = sorted(frontier)
    for st in order:
        ids[st] = len(ids)
    edges = []
    i = 0
    while i < len(order):
        v, buf = order[i]
        for t, a in out_edges[v]:
            window = buf + (a,)
            nxt = (t, window[1:])
            if nxt not in ids:
                ids[nxt] = len(order)
                order.append(nxt)
            edges.append((ids[(v, buf)], ids[nxt], a, math.exp(phi.value(window))))
        i += 1
    # prune states without predecessors (buffers that no infinite past produces)
    alive = set(range(len(order)))
    while True:
        has_in = {t for s, t, _, _ in edges if s in alive and t in alive}
        dead = alive - has_in
        if not dead:
            break
        alive -= dead
    keep_ids = sorted(alive)
    remap = {s: j for j, s in enumerate(keep_ids)}
    new_edges = tuple(
        (remap[s], remap[t], a, w) for s, t, a, w in edges if s in alive and t in alive
    )
    names = tuple(f"{base.name(order[s][0])}:{spec.fmt(order[s][1])}" for s in keep_ids)
    return WeightedGraph(len(keep_ids), new_edges, spec.nsym, names)


def _power(mat: np.ndarray, tol: float, max_iter: int = 200000):
    n = mat.shape[0]
    shifted = mat + np.eye(n) * max(1.0, float(mat.max()))
    vec = np.ones(n) / n
    rho = 0.0
    resid = math.inf
    for _ in range(max_iter):
        nv = shifted @ vec
        nv /= nv.sum()
        img = mat @ nv
        rho = float(img.sum() / nv.sum())
        resid = float(np.abs(img - rho * nv).max() / nv.max())
        vec = nv
        if resid < tol * max(rho, 1.0):
            break
    return rho, vec, resid


def perron(graph: WeightedGraph, tol: float = 1e-12) -> PerronData:
    """Perron root and positive eigenvectors, normalised by sum(r) = 1 and l·r = 1."""
    mat = graph.matrix() if isinstance(graph, WeightedGraph) else np.asarray(graph, dtype=float)
    n = mat.shape[0]
    succ = [list(np.nonzero(mat[i] > 0)[0]) for i in range(n)]
    comps = strongly_connected_components(n, succ)
    if len(comps) != 1:
        raise NotIrreducible(comps)
    rho, right, res_r = _power(mat, tol)
    rho_l, left, res_l = _power(mat.T, tol)
    left = left / float(left @ right)
    return PerronData(rho, left, right, max(res_r, res_l))


_ORACLE_CACHE: dict = {}


def oracle_pressure_data(spec: ShiftPresentation, phi: Potential):
    key = (id(spec), id(phi))
    hit = _ORACLE_CACHE.get(key)
    if hit is not None and hit[0] is spec and hit[1] is phi:
        return hit[2], hit[3]
    graph = recode(spec, phi)
    data = perron(graph)
    _ORACLE_CACHE[key] = (spec, phi, graph, data)
    return graph, data


def oracle_pressure(spec: ShiftPresentation, phi: Potential) -> float:
    """log ρ of the recoded graph, i.e. P(X, φ̄) for the stored normalisation."""
    _, data = oracle_pressure_data(spec, phi)
    return data.log_rho


def oracle_measure(graph: WeightedGraph, data: PerronData, depth: int) -> dict:
    """μ([w]^+) for every word of length ≤ depth with positive measure."""
    mats = graph.symbol_matrices()
    out = {(): 1.0}
    # row vectors carry the left eigenvector; the right one is applied last
    level = {(): data.left.copy()}
    for n in range(1, depth + 1):
        new = {}
        for w, vec in level.items():
            for a in range(graph.nsym):
                nv = vec @ mats[a] / data.rho
                if nv.max() <= 0.0:
                    continue
                new[w + (a,)] = nv
        for w, vec in new.items():
            out[w] = float(vec @ data.right)
        level = new
    return out


def measure_of(graph: WeightedGraph, data: PerronData, word) -> float:
    """μ([w]^+) for a single word (forward algorithm)."""
    mats = graph.symbol_matrices()
    vec = data.left.copy()
    for a in word:
        vec = vec @ mats[a] / data.rho
    return float(vec @ data.right)


def entropy_and_integral(measure: dict, phi: Potential, depth: int, tol: float = 1e-9):
    """Conditional-entropy estimate of h(μ) and the exact window integral of φ.

    Returns ``(h, integral)`` where ``h`` is the hull of the last two
    conditional entropies H_n - H_{n-1}; they decrease to h(μ).
    """
    for w, v in measure.items():
        if len(w) < depth:
            kids = sum(measure.get(w + (a,), 0.0) for a in range(phi.nsym))
            if abs(kids - v) > tol * max(1.0, v):
                raise InconsistentMeasure(f"children of {w} sum to {kids}, parent has {v}")

    def block_entropy(n):
        vals = [v for w, v in measure.items() if len(w) == n and v > 0]
        return -math.fsum(v * math.log(v) for v in vals)

    ent = [block_entropy(n) for n in range(depth + 1)]
    diffs = [ent[n] - ent[n - 1] for n in range(1, depth + 1)]
    h = Interval.hull(diffs[-2:]) if len(diffs) >= 2 else Interval.point(diffs[-1])
    integral = math.fsum(v * phi.value(w) for w, v in measure.items() if len(w) == phi.width)
    return h, integral


def oracle_pressure_any(spec: ShiftPresentation, phi: Potential) -> float:
    """Pressure for possibly reducible presentations: the largest component radius.

    Returns -inf for an empty shift.
    """
    if spec.is_empty:
        return -math.inf
    graph = recode(spec, phi)
    if graph.n_states == 0:
        return -math.inf
    mat = graph.matrix()
    succ = [list(np.nonzero(mat[i] > 0)[0]) for i in range(mat.shape[0])]
    best = 0.0
    for comp in strongly_connected_components(mat.shape[0], succ):
        sub = mat[np.ix_(comp, comp)]
        if len(comp) == 1 and sub[0, 0] == 0.0:
            continue
        best = max(best, float(np.max(np.abs(np.linalg.eigvals(sub)))))
    return math.log(best) if best > 0 else -math.inf
