"""Partition sums, pressure bounds, Q-coefficients and factorial collections."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyCollection, NotFactorial, OracleUnavailable
from .intervals import Interval
from .potentials import (
    Potential,
    global_weights,
    leaf_chain,
    leaf_context,
    regularity_constants,
)
from .symbolic import Point, ShiftPresentation, Word, avoiding


# ---------------------------------------------------------------- collections


@dataclass(frozen=True, eq=False)
class WordCollection:
    """A set D of legal words, given by a predicate and/or avoided patterns.

    When ``avoid`` is set the collection is the set of legal words containing
    none of the patterns, and a presentation of X_D is available.
    """

    spec: ShiftPresentation
    predicate: Callable | None = None
    avoid: tuple = ()
    name: str = "D"

    def contains(self, w) -> bool:
        w = tuple(w)
        if not self.spec.is_legal(w):
            return False
        for p in self.avoid:
            k = len(p)
            if any(w[i : i + k] == p for i in range(len(w) - k + 1)):
                return False
        return self.predicate(w) if self.predicate is not None else True

    def mask(self, words: np.ndarray) -> np.ndarray:
        keep = np.ones(words.shape[0], dtype=bool)
        for p in self.avoid:
            k = len(p)
            pat = np.array(p, dtype=np.uint8)
            for i in range(words.shape[1] - k + 1):
                keep &= ~np.all(words[:, i : i + k] == pat, axis=1)
        if self.predicate is not None:
            keep &= np.array([bool(self.predicate(tuple(int(a) for a in w))) for w in words], dtype=bool) if len(words) else keep
        return keep

    def array(self, n: int) -> np.ndarray:
        words, _ = self.spec.language_array(n)
        return words[self.mask(words)]

    def words(self, n: int) -> list[Word]:
        return [tuple(int(a) for a in w) for w in self.array(n)]

    def presentation(self) -> ShiftPresentation | None:
        if self.avoid and self.predicate is None:
            return avoiding(self.spec, self.avoid, name=f"{self.spec.name}-{self.name}")
        return None


def language_collection(spec: ShiftPresentation) -> WordCollection:
    return WordCollection(spec, None, (), "L")


# ---------------------------------------------------------------- partition sums


def _logsumexp(values: np.ndarray) -> float:
    if values.size == 0:
        return -math.inf
    top = float(values.max())
    return top + math.log(math.fsum(np.exp(values - top).tolist()))


@dataclass(frozen=True)
class LeafRestriction:
    point: Point
    orientation: str = "forward"


def log_partition_sum(spec, phi, n, restriction=None) -> float:
    """log Λ_n for the full language, a word collection, or a leaf."""
    if isinstance(restriction, LeafRestriction):
        return _log_leaf_sum(spec, phi, n, restriction)
    words, hi, _ = global_weights(spec, phi, n)
    if restriction is not None and restriction != "all":
        hi = hi[restriction.mask(words)]
    return _logsumexp(hi)


def partition_sum(spec, phi, n, restriction=None) -> float:
    return math.exp(log_partition_sum(spec, phi, n, restriction))


def _log_leaf_sum(spec, phi, n, restriction: LeafRestriction) -> float:
    if restriction.orientation == "backward":
        return _log_leaf_sum(
            spec.reversed(), phi.reversed(), n, LeafRestriction(restriction.point.reversed(), "forward")
        )
    if n == 0:
        return 0.0
    x = restriction.point
    chain = leaf_chain(spec, phi)
    s0 = leaf_context(spec, phi, x)
    s1, acc = chain.read(s0, (x[0],))
    mass = chain.future_mass(n - 1, 0.0)[n - 1, s1]
    return acc + math.log(mass)


@dataclass(frozen=True)
class PartitionSumSeries:
    values: dict  # n -> Λ_n
    log_values: dict
    restriction: str = "all"

    def rows(self, pressure: float = 0.0):
        for n in sorted(self.values):
            lv = self.log_values[n]
            yield n, self.values[n], lv / n, math.exp(lv - n * pressure)


def partition_series(spec, phi, n_values, restriction=None) -> PartitionSumSeries:
    logs = {n: log_partition_sum(spec, phi, n, restriction) for n in n_values}
    label = "all" if restriction is None else getattr(restriction, "name", type(restriction).__name__)
    return PartitionSumSeries({n: math.exp(v) for n, v in logs.items()}, logs, label)


# ---------------------------------------------------------------- pressure


@dataclass(frozen=True)
class PressureEstimate:
    lower: float
    upper: float
    method: str
    n_used: int
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise ValueError(f"pressure lower bound {self.lower} exceeds upper bound {self.upper}")

    @property
    def center(self) -> float:
        if math.isinf(self.lower):
            return self.upper
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self) -> float:
        if math.isinf(self.lower):
            return math.inf
        return 0.5 * (self.upper - self.lower)

    @property
    def interval(self) -> Interval:
        return Interval(self.lower, self.upper)

    def shifted(self, c: float) -> "PressureEstimate":
        return PressureEstimate(self.lower - c, self.upper - c, self.method, self.n_used, dict(self.details))

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "method": self.method, "nUsed": self.n_used}


def specification_gap(spec: ShiftPresentation, t_max: int | None = None) -> int | None:
    """Smallest t such that for all v, w ∈ L some u ∈ L_t has vuw ∈ L."""
    auto = spec.automaton
    trans = auto.trans
    n = auto.n_states
    if t_max is None:
        t_max = 2 * n * n + 2
    reach = [frozenset([q]) for q in range(n)]
    for t in range(t_max + 1):
        if all(_covers_language(trans, reach[q]) for q in range(n)):
            return t
        reach = [frozenset(int(trans[p, a]) for p in S for a in range(trans.shape[1]) if trans[p, a] >= 0) for S in reach]
    return None


def _covers_language(trans, targets: frozenset) -> bool:
    """Whether every legal word is readable from some state in ``targets``."""
    start = (0, targets)
    seen = {start}
    stack = [start]
    while stack:
        s, S = stack.pop()
        for a in range(trans.shape[1]):
            ns = int(trans[s, a])
            if ns < 0:
                continue
            nS = frozenset(int(trans[p, a]) for p in S if trans[p, a] >= 0)
            if not nS:
                return False
            if (ns, nS) not in seen:
                seen.add((ns, nS))
                stack.append((ns, nS))
    return True


def collatz_wielandt_bounds(spec, phi, n: int) -> tuple[float, float]:
    """Bounds min/max of (B g)/g for the leaf-chain transfer matrix and g = B^n tail.

    The chain's spectral radius is e^P, so these bracket P.
    """
    chain = leaf_chain(spec, phi)
    chain.state(0, ())
    mass = chain.future_mass(n + 1, 0.0)
    ratio = np.log(mass[n + 1]) - np.log(mass[n])
    return float(ratio.min()), float(ratio.max())


def pressure_estimate(spec: ShiftPresentation, phi: Potential, n_max: int = 16, method: str = "fekete") -> PressureEstimate:
    if n_max < 2 and method != "oracle":
        raise ValueError("n_max must be at least 2")
    if method == "oracle":
        from .oracle import oracle_pressure_data

        _, data = oracle_pressure_data(spec, phi)
        tol = max(1e-12, 10.0 * data.residual / data.rho)
        return PressureEstimate(data.log_rho - tol, data.log_rho + tol, "oracle", 0, {"rho": data.rho, "residual": data.residual})
    if method not in ("fekete", "gluing"):
        raise ValueError(f"unknown pressure method {method!r}")
    logs = {n: log_partition_sum(spec, phi, n) for n in range(1, n_max + 1)}
    upper = min(v / n for n, v in logs.items())
    details = {"logLambda": logs}
    lower = -math.inf
    t = specification_gap(spec)
    if t is not None:
        bowen, _ = regularity_constants(phi, spec)
        slack = bowen + t * phi.sup_norm
        lower = max((v - slack) / (n + t) for n, v in logs.items())
        details.update({"gluingGap": t, "bowenC": bowen, "gluingLower": lower})
    if method == "fekete":
        cw_lo, cw_hi = collatz_wielandt_bounds(spec, phi, n_max)
        details.update({"ratioLower": cw_lo, "ratioUpper": cw_hi})
        lower = max(lower, cw_lo)
    lower = min(lower, upper)
    return PressureEstimate(lower, upper, method, n_max, details)


def normalize_potential(spec: ShiftPresentation, phi: Potential, mode="oracle", n_max: int = 16):
    """Return (φ - c, pressure estimate of φ - c).

    ``mode`` is "oracle", "fekete", "none" or a number used directly as c.
    """
    if mode == "none":
        est = _safe_oracle_or_fekete(spec, phi, n_max)
        return phi, est
    if isinstance(mode, (int, float)):
        bar = phi.normalized(phi.normalization + float(mode))
        return bar, _safe_oracle_or_fekete(spec, bar, n_max)
    if mode == "oracle":
        try:
            est = pressure_estimate(spec, phi, n_max, "oracle")
        except OracleUnavailable:
            est = pressure_estimate(spec, phi, n_max, "fekete")
    elif mode == "fekete":
        est = pressure_estimate(spec, phi, n_max, "fekete")
        bar = phi.normalized(phi.normalization + est.upper)
        return bar, est.shifted(est.upper)
    else:
        raise ValueError(f"unknown normalisation mode {mode!r}")
    c = est.center
    bar = phi.normalized(phi.normalization + c)
    if est.method == "oracle":
        return bar, pressure_estimate(spec, bar, n_max, "oracle")
    return bar, est.shifted(c)


def _safe_oracle_or_fekete(spec, phi, n_max):
    try:
        return pressure_estimate(spec, phi, n_max, "oracle")
    except OracleUnavailable:
        return pressure_estimate(spec, phi, n_max, "fekete")


# ---------------------------------------------------------------- Q coefficients


def limsup_estimate(values: Sequence[float]) -> Interval:
    """Enclosure guess for limsup: [max of the last two, max of the last third]."""
    tail = list(values[-max(3, len(values) // 3) :])
    recent = list(values[-2:])
    return Interval(min(max(recent), max(tail)), max(tail))


def liminf_estimate(values: Sequence[float]) -> Interval:
    tail = list(values[-max(3, len(values) // 3) :])
    recent = list(values[-2:])
    return Interval(min(tail), max(min(recent), min(tail)))


@dataclass(frozen=True)
class LeafQ:
    bar: Interval  # Q̄^±_x
    low: Interval  # Q̲^±_x
    series: tuple


@dataclass(frozen=True)
class QCoefficients:
    q_bar: Interval
    q_low: Interval
    series: tuple
    plus: tuple  # LeafQ per base point
    minus: tuple
    n_range: tuple
    pressure: float
    pressure_width: float
    base_points: tuple = ()

    def index_of(self, x: Point) -> int:
        for i, y in enumerate(self.base_points):
            if y.same_as(x):
                return i
        raise KeyError("base point not among the Q-coefficient base points")

    def to_dict(self) -> dict:
        return {
            "qBar": self.q_bar.to_list(),
            "qLow": self.q_low.to_list(),
            "nRange": list(self.n_range),
            "pressureUsed": self.pressure,
            "qBarPlus": [q.bar.to_list() for q in self.plus],
            "qLowPlus": [q.low.to_list() for q in self.plus],
            "qBarMinus": [q.bar.to_list() for q in self.minus],
            "qLowMinus": [q.low.to_list() for q in self.minus],
        }


def _widen(iv: Interval, n: int, width: float) -> Interval:
    f = math.exp(n * width) if width > 0 else 1.0
    return Interval(iv.lo / f, iv.hi * f)


def leaf_q_series(spec, phi, sid: int, first_symbol: int, n_values, pressure: float) -> list[float]:
    """Λ_n^+ e^{-nP} for the leaf whose chain context is ``sid`` and whose x_0 is ``first_symbol``."""
    chain = leaf_chain(spec, phi)
    s1, acc = chain.read(sid, (first_symbol,))
    if s1 < 0:
        return [0.0 for _ in n_values]
    top = max(n_values)
    mass = chain.future_mass(top - 1, pressure)
    base = math.exp(acc - pressure)
    return [base * float(mass[n - 1, s1]) for n in n_values]


def leaf_q(spec, phi, sid, first_symbol, n_values, pressure, width=0.0) -> LeafQ:
    vals = leaf_q_series(spec, phi, sid, first_symbol, n_values, pressure)
    top = max(n_values)
    return LeafQ(_widen(limsup_estimate(vals), top, width), _widen(liminf_estimate(vals), top, width), tuple(vals))


def point_leaf_q(spec, phi, x: Point, n_values, pressure, width=0.0, orientation="forward") -> LeafQ:
    if orientation == "backward":
        return point_leaf_q(spec.reversed(), phi.reversed(), x.reversed(), n_values, pressure, width)
    sid = leaf_context(spec, phi, x)
    return leaf_q(spec, phi, sid, x[0], n_values, pressure, width)


def q_coefficients(spec, phi, base_points, n_range=range(4, 21), pressure: PressureEstimate | None = None) -> QCoefficients:
    """Empirical Q̄, Q̄^±_x and Q̲^±_x over ``n_range`` (φ assumed normalised)."""
    n_values = tuple(n_range)
    if pressure is None:
        pressure = _safe_oracle_or_fekete(spec, phi, max(n_values))
    p, width = pressure.center, pressure.half_width
    if not math.isfinite(width):
        width = 0.0
    series = tuple(math.exp(log_partition_sum(spec, phi, n) - n * p) for n in n_values)
    top = max(n_values)
    q_bar = _widen(limsup_estimate(series), top, width)
    q_low = _widen(liminf_estimate(series), top, width)
    plus = tuple(point_leaf_q(spec, phi, x, n_values, p, width, "forward") for x in base_points)
    minus = tuple(point_leaf_q(spec, phi, x, n_values, p, width, "backward") for x in base_points)
    return QCoefficients(q_bar, q_low, series, plus, minus, n_values, p, width, tuple(base_points))


def sup_leaf_q(spec, phi, n_values, pressure: float, width: float = 0.0) -> float:
    """Upper estimate of sup_x Q̲^+_x over all leaf contexts (finitely many)."""
    chain = leaf_chain(spec, phi)
    depth = phi.left + spec.automaton.n_states
    words, states = spec.language_array(depth)
    best = 0.0
    seen = set()
    for w, q in zip(words, states):
        hist = tuple(int(a) for a in w[len(w) - phi.left :]) if phi.left else ()
        key = (int(q), hist)
        if key in seen:
            continue
        seen.add(key)
        sid = chain.state(int(q), hist)
        for a in range(spec.nsym):
            if spec.automaton.trans[q, a] >= 0:
                best = max(best, leaf_q(spec, phi, sid, a, n_values, pressure, width).low.hi)
    return best


# ---------------------------------------------------------------- factorial collections


def check_factorial(D: WordCollection, max_len: int = 8) -> None:
    for n in range(1, max_len + 1):
        for w in D.words(n):
            for i in range(n):
                for j in range(i + 1, n + 1):
                    if (i, j) != (0, n) and not D.contains(w[i:j]):
                        raise NotFactorial(f"subword {D.spec.fmt(w[i:j])} of {D.spec.fmt(w)} is not in {D.name}")


def extendable_core(spec, phi, D: WordCollection, j: int, n: int, check: bool = True) -> list[Word]:
    """D_n^{(j)}: words of D_n that extend by D_j-words on both sides inside D."""
    if check:
        check_factorial(D, min(n + 2 * j, 8))
    long = D.array(n + 2 * j)
    mids = {tuple(int(a) for a in w[j : j + n]) for w in long}
    return sorted(mids)


def factorial_pressure(spec, phi, D: WordCollection, n_max: int = 16) -> PressureEstimate:
    if not D.words(1):
        raise EmptyCollection(f"collection {D.name} has no words of length 1")
    logs = {}
    for n in range(1, n_max + 1):
        words, hi, _ = global_weights(spec, phi, n)
        vals = hi[D.mask(words)]
        if vals.size == 0:
            raise EmptyCollection(f"collection {D.name} has no words of length {n}")
        logs[n] = _logsumexp(vals)
    upper = min(v / n for n, v in logs.items())
    details = {"logLambda": logs}
    pres = D.presentation()
    if pres is not None:
        if pres.is_empty:
            raise EmptyCollection(f"X_{D.name} is empty")
        from .oracle import oracle_pressure_data

        _, data = oracle_pressure_data(pres, phi)
        details["oracle"] = data.log_rho
        lower = min(data.log_rho, upper)
        return PressureEstimate(lower, upper, "oracle", n_max, details)
    return PressureEstimate(-math.inf, upper, "fekete", n_max, details)


# ---------------------------------------------------------------- sums over avoiding words


def sup_weights(spec: ShiftPresentation, phi: Potential, words: np.ndarray) -> np.ndarray:
    """Φ(w) = sup of S_nφ over [w]^+ for each row of ``words``, by trying all boundary extensions."""
    from . import _kernels

    n_words, n = words.shape
    best = np.full(n_words, -np.inf)
    if n_words == 0:
        return best
    trans = spec.automaton.trans
    zero_w = np.zeros(trans.shape, dtype=np.float64)
    lefts = spec.words(phi.left)
    rights = spec.words(phi.right - 1)
    for p in lefts:
        for s in rights:
            ext = np.empty((n_words, len(p) + n + len(s)), dtype=np.uint8)
            ext[:, : len(p)] = p
            ext[:, len(p) : len(p) + n] = words
            ext[:, len(p) + n :] = s
            end, _ = _kernels.walk(ext, 0, trans, zero_w)
            sums = _kernels.window_sums(ext, phi.dense, phi.width, spec.nsym)
            best = np.where(end >= 0, np.maximum(best, sums), best)
    return best


def avoiding_log_sums(spec: ShiftPresentation, phi: Potential, patterns, n_max: int, max_words: int = 500000) -> dict:
    """log Λ_n(B) for n = 0..n_max, B the legal words containing none of ``patterns``.

    Enumeration stops early (fewer keys) once a level exceeds ``max_words``.
    """
    from . import _kernels

    patterns = [tuple(p) for p in patterns]
    trans = spec.automaton.trans
    words = np.zeros((1, 0), dtype=np.uint8)
    states = np.zeros(1, dtype=np.int64)
    out = {0: 0.0}
    for n in range(1, n_max + 1):
        words, states = _kernels.extend_words(words, states, trans)
        keep = np.ones(words.shape[0], dtype=bool)
        for p in patterns:
            k = len(p)
            if k <= n:
                keep &= ~np.all(words[:, n - k :] == np.array(p, dtype=np.uint8), axis=1)
        words, states = words[keep], states[keep]
        if words.shape[0] > max_words:
            break
        out[n] = _logsumexp(sup_weights(spec, phi, words)) if words.shape[0] else -math.inf
    return out


def fitted_ratio(values: Sequence[float]) -> float:
    """e^{slope} of a least-squares line through log values (zeros mean exact decay)."""
    vals = [float(v) for v in values]
    if any(v <= 0.0 for v in vals):
        return 0.0
    if len(vals) < 2:
        return math.nan
    slope = float(np.polyfit(np.arange(len(vals), dtype=float), np.log(vals), 1)[0])
    return math.exp(slope)
