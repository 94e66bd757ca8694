"""Rectangles, holonomies, the product measure λ_R and the measure μ it induces."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GibbsViolation,
    IndependenceViolation,
    InvarianceViolation,
    NotInRectangle,
    NotOnLeaf,
    PreconditionFailed,
    TailUnbounded,
    UndetectableReturn,
    ZeroLeafMeasure,
)
from .intervals import ZERO, Interval, interval_sum
from .leaf import CylinderMeasure, leaf_measure
from .potentials import Potential, delta, delta_sup, global_weight_table
from .pressure import PressureEstimate, _safe_oracle_or_fekete, q_coefficients
from .symbolic import Point, ShiftPresentation, Word, bracket, point_with_window


def merge_prefix(a: Word, b: Word) -> Word | None:
    """The longer of two words that agree on their common prefix, else None."""
    k = min(len(a), len(b))
    if a[:k] != b[:k]:
        return None
    return a if len(a) >= len(b) else b


def merge_suffix(a: Word, b: Word) -> Word | None:
    k = min(len(a), len(b))
    if k and a[len(a) - k :] != b[len(b) - k :]:
        return None
    return a if len(a) >= len(b) else b


# ---------------------------------------------------------------- rectangles


@dataclass(frozen=True)
class Rectangle:
    """The set [past]^- ∩ [future]^+; past ends and future starts at coordinate 0.

    ``origin`` records how an induced rectangle was obtained as
    (base, word, direction, shift); it is reduced to an open rectangle.
    """

    past: Word
    future: Word
    kind: str = "open"
    origin: tuple | None = None

    def __post_init__(self):
        if not self.past or not self.future or self.past[-1] != self.future[0]:
            raise PreconditionFailed("past and future words must share the symbol at coordinate 0")

    @classmethod
    def open(cls, spec: ShiftPresentation, past, future) -> "Rectangle":
        return cls(spec.word(past), spec.word(future))

    @classmethod
    def cylinder(cls, spec: ShiftPresentation, future) -> "Rectangle":
        v = spec.word(future)
        return cls(v[:1], v)

    @property
    def symbol0(self) -> int:
        return self.future[0]

    @property
    def word(self) -> Word:
        """Coordinates [-|past|+1, |future|) spelled out."""
        return self.past[:-1] + self.future

    def contains(self, x: Point) -> bool:
        return x.window(1 - len(self.past), 1) == self.past and x.window(0, len(self.future)) == self.future

    def induced(self, word, shift: int, direction: str = "forward") -> "Rectangle":
        """σ^shift(R ∩ [word]^+) (forward) or σ^-shift(R ∩ [word]^-) (backward)."""
        word = tuple(word)
        if direction == "forward":
            fut = merge_prefix(self.future, word)
            if fut is None or shift >= len(fut):
                raise PreconditionFailed("induced set is empty or not word-determined")
            return Rectangle(self.past[:-1] + fut[: shift + 1], fut[shift:], "cylinder-induced", (self, word, direction, shift))
        if direction == "backward":
            pst = merge_suffix(self.past, word)
            if pst is None or shift >= len(pst):
                raise PreconditionFailed("induced set is empty or not word-determined")
            cut = len(pst) - shift
            return Rectangle(pst[:cut], pst[cut - 1 :] + self.future[1:], "cylinder-induced", (self, word, direction, shift))
        raise ValueError("direction must be 'forward' or 'backward'")

    def describe(self, spec: ShiftPresentation) -> str:
        return f"[{spec.fmt(self.past)}]^- ∩ [{spec.fmt(self.future)}]^+"


def is_rectangle(spec: ShiftPresentation, rect: Rectangle) -> bool:
    """Nonempty and closed under brackets.

    Every left-infinite past ending in the rectangle's past must reach the
    same follower set after reading the future word.
    """
    auto = spec.automaton
    ends = set()
    for r in auto.recurrent:
        q = auto.run(r, rect.past[:-1])
        if q < 0:
            continue
        t = auto.run(q, rect.future)
        if t >= 0:
            ends.add(t)
    return len(ends) == 1


def require_rectangle(spec: ShiftPresentation, rect: Rectangle) -> None:
    if not is_rectangle(spec, rect):
        raise PreconditionFailed(f"{rect.describe(spec)} is empty or not closed under brackets")


def rectangle_point(spec: ShiftPresentation, rect: Rectangle, rng=None) -> Point:
    x = point_with_window(spec, rect.word, 1 - len(rect.past), rng)
    if not rect.contains(x):  # pragma: no cover - construction guarantees it
        raise NotInRectangle("constructed point misses the rectangle")
    return x


def enumerate_rectangles(spec: ShiftPresentation, max_past: int, max_future: int) -> list[Rectangle]:
    out = []
    for i in range(1, max_past + 1):
        for j in range(1, max_future + 1):
            for w in spec.words(i + j - 1):
                rect = Rectangle(w[:i], w[i - 1 :])
                if is_rectangle(spec, rect):
                    out.append(rect)
    return out


# ---------------------------------------------------------------- holonomies


@dataclass(frozen=True)
class LeafCylinderSet:
    """Union of forward cylinders intersected with the unstable leaf of ``base``."""

    base: Point
    words: tuple


def _require_in(rect: Rectangle, *points: Point) -> None:
    for p in points:
        if not rect.contains(p):
            raise NotInRectangle(f"point {p.describe()} is not in the rectangle")


def holonomy_image(spec, rect: Rectangle, z: Point, y: Point, cylinders: LeafCylinderSet) -> LeafCylinderSet:
    """Image under the stable holonomy from the leaf of z to the leaf of y.

    The map keeps the future and swaps the past, so the describing words do
    not change.
    """
    _require_in(rect, z, y)
    if cylinders.base[0] != z[0] or not bracket(z, cylinders.base).same_as(cylinders.base):
        raise NotInRectangle("cylinder set is not on the leaf of z")
    words = []
    for w in cylinders.words:
        w = spec.word(w)
        if merge_prefix(rect.future, w) is None:
            raise NotInRectangle(f"[{spec.fmt(w)}]^+ does not meet the rectangle")
        words.append(w)
    return LeafCylinderSet(y, tuple(words))


def rn_derivative(phi: Potential, spec: ShiftPresentation, rect: Rectangle, z: Point, y: Point, x: Point) -> float:
    """Density of the pushed-forward leaf measure of z against that of y, at x."""
    _require_in(rect, z, y)
    if not rect.contains(x) or not bracket(y, x).same_as(x):
        raise NotOnLeaf("x must lie on the unstable leaf of y inside the rectangle")
    return math.exp(delta(phi, spec, bracket(z, x), x, "stable"))


# ---------------------------------------------------------------- λ_R


class _ProductEngine:
    """λ_R on sets [P]^- ∩ [F]^+ from leaf measures at a base point q."""

    def __init__(self, spec, phi, rect: Rectangle, q: Point, unstable: CylinderMeasure, stable: CylinderMeasure):
        self.spec, self.phi, self.rect, self.q = spec, phi, rect, q
        self.unstable, self.stable = unstable, stable
        l, r = phi.left, phi.right
        self.past_len = max(l + 1, l + r - 1, 1)
        self.future_len = max(l + r - 1, r, 1)
        self.q_past = q.window(1 - self.past_len, 1)
        self.q_future = q.window(0, self.future_len)
        self._cache: dict = {}
        vals = [phi.value(w) for w in phi.table]
        self._centre = 0.5 * (max(vals) + min(vals)) if vals else 0.0

    def _window(self, past, future, pos):
        l, r = self.phi.left, self.phi.right
        return tuple(past[len(past) - 1 + i] if i <= 0 else future[i] for i in range(pos - l, pos + r))

    def log_density(self, past: Word, future: Word) -> float:
        """Δ^u([y,z], y) + Δ^s([y,z], z) for y ∈ [past]^-, z ∈ [future]^+ on the leaves of q."""
        val = self.phi.value
        terms = []
        for n in range(self.phi.left):
            terms.append(val(self._window(past, future, n)) - val(self._window(self.q_past, future, n)))
        for n in range(max(self.phi.right - 1, 0)):
            terms.append(val(self._window(past, future, -n)) - val(self._window(past, self.q_future, -n)))
        # both leaf measures already weight coordinate 0, so the two kernels count it once too often
        terms.append(self._centre - val(self._window(past, future, 0)))
        return math.fsum(terms)

    def _pasts(self, past):
        if len(past) >= self.past_len:
            return [past]
        return [w for w in self.spec.words(self.past_len) if w[len(w) - len(past) :] == past]

    def _futures(self, future):
        if len(future) >= self.future_len:
            return [future]
        return [w for w in self.spec.words(self.future_len) if w[: len(future)] == future]

    def value(self, past, future) -> tuple[float, Interval]:
        past = merge_suffix(self.rect.past, tuple(past))
        future = merge_prefix(self.rect.future, tuple(future))
        if past is None or future is None or past[-1] != future[0]:
            return 0.0, ZERO
        key = (past, future)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        ests, ivs = [], []
        for p in self._pasts(past):
            ms = self.stable.value(p)
            if ms.hi == 0.0:
                continue
            es = self.stable.estimate(p)
            for f in self._futures(future):
                mu = self.unstable.value(f)
                if mu.hi == 0.0:
                    continue
                if not self.spec.is_legal(p[:-1] + f):
                    continue
                d = math.exp(self.log_density(p, f))
                ests.append(es * self.unstable.estimate(f) * d)
                ivs.append(ms * mu * d)
        out = (math.fsum(ests), interval_sum(ivs))
        self._cache[key] = out
        return out


@dataclass(frozen=True, eq=False)
class LambdaMeasure:
    """λ = Σ_i λ_{R_i} on forward cylinders, with intervals and point estimates."""

    spec: ShiftPresentation
    phi: Potential
    rectangles: tuple
    base_points: tuple
    depth: int
    values: dict
    estimates: dict
    pressure_used: PressureEstimate
    engines: tuple = field(repr=False)

    def _eval(self, w) -> tuple[float, Interval]:
        w = self.spec.word(w)
        ests, ivs = [], []
        for eng in self.engines:
            e, iv = eng.value(eng.rect.past, w)
            ests.append(e)
            ivs.append(iv)
        return math.fsum(ests), interval_sum(ivs)

    def value(self, w) -> Interval:
        w = self.spec.word(w)
        hit = self.values.get(w)
        return hit if hit is not None else self._eval(w)[1]

    def estimate(self, w) -> float:
        w = self.spec.word(w)
        hit = self.estimates.get(w)
        return hit if hit is not None else self._eval(w)[0]

    def rect_value(self, index: int, past, future) -> tuple[float, Interval]:
        return self.engines[index].value(tuple(past), tuple(future))

    @property
    def mass(self) -> Interval:
        return interval_sum(self.rect_value(i, r.past, r.future)[1] for i, r in enumerate(self.rectangles))

    @property
    def mass_estimate(self) -> float:
        return math.fsum(self.rect_value(i, r.past, r.future)[0] for i, r in enumerate(self.rectangles))

    def words(self) -> list[Word]:
        return sorted(self.values, key=lambda w: (len(w), w))

    def to_json(self) -> str:
        return json.dumps(
            {
                "rectangles": [r.describe(self.spec) for r in self.rectangles],
                "mass": self.mass.to_list(),
                "values": {self.spec.fmt(w): self.values[w].to_list() for w in self.words()},
            }
        )

    def to_csv(self) -> str:
        return _table_csv(self.spec, self.words(), self.values, self.estimates)


def _table_csv(spec, words, values, estimates, last="estimate") -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["word", "lo", "hi", last])
    for w in words:
        out.writerow([spec.fmt(w), repr(values[w].lo), repr(values[w].hi), repr(estimates[w])])
    return buf.getvalue()


def _check_disjoint(spec, rects) -> None:
    for i, a in enumerate(rects):
        for b in rects[i + 1 :]:
            if merge_suffix(a.past, b.past) is not None and merge_prefix(a.future, b.future) is not None:
                raise PreconditionFailed(f"rectangles {a.describe(spec)} and {b.describe(spec)} overlap")


def lambda_build(
    spec: ShiftPresentation,
    phi: Potential,
    rectangles,
    base_points=None,
    leaf_depth: int = 8,
    refinement: int = 10,
    pressure: PressureEstimate | None = None,
    q_hat: float | None = None,
    depth: int | None = None,
) -> LambdaMeasure:
    """Product measure on a disjoint family of rectangles.

    ``refinement`` sets how far past ``leaf_depth`` words can be evaluated
    (the cover depth is leaf_depth + refinement).
    """
    rects = tuple(rectangles) if not isinstance(rectangles, Rectangle) else (rectangles,)
    for r in rects:
        require_rectangle(spec, r)
    _check_disjoint(spec, rects)
    if base_points is None:
        base_points = [rectangle_point(spec, r) for r in rects]
    elif isinstance(base_points, Point):
        base_points = [base_points]
    base_points = tuple(base_points)
    if len(base_points) != len(rects):
        raise PreconditionFailed("one base point per rectangle is required")
    for r, q in zip(rects, base_points):
        spec.check_point(q)
        if not r.contains(q):
            raise NotInRectangle(f"base point {q.describe(spec)} is not in {r.describe(spec)}")
    if pressure is None:
        pressure = _safe_oracle_or_fekete(spec, phi, 16)
    if q_hat is None:
        q_hat = q_coefficients(spec, phi, [], range(4, 17), pressure).q_bar.hi
    engines = []
    for r, q in zip(rects, base_points):
        mu = leaf_measure(spec, phi, q, "forward", leaf_depth, refinement, pressure, q_hat)
        ms = leaf_measure(spec, phi, q, "backward", leaf_depth, refinement, pressure, q_hat)
        if mu.total.hi <= 0 or ms.total.hi <= 0:
            raise ZeroLeafMeasure(f"leaf measure of {q.describe(spec)} vanishes")
        engines.append(_ProductEngine(spec, phi, r, q, mu, ms))
    depth = leaf_depth if depth is None else depth
    lam = LambdaMeasure(spec, phi, rects, base_points, depth, {}, {}, pressure, tuple(engines))
    firsts = {r.symbol0 for r in rects}
    for n in range(1, depth + 1):
        for w in spec.words(n):
            if w[0] not in firsts:
                continue
            e, iv = lam._eval(w)
            if iv.hi > 0:
                lam.values[w] = iv
                lam.estimates[w] = e
    return lam


@dataclass(frozen=True)
class IndependenceReport:
    words_checked: int
    max_discrepancy: float
    all_overlap: bool

    def to_dict(self):
        return {"wordsChecked": self.words_checked, "maxDiscrepancy": self.max_discrepancy, "pass": self.all_overlap}


def check_q_independence(first: LambdaMeasure, second: LambdaMeasure, raise_on_fail: bool = True) -> IndependenceReport:
    if first.rectangles != second.rectangles:
        raise PreconditionFailed("measures are built on different rectangles")
    worst, ok = 0.0, True
    words = sorted(set(first.values) | set(second.values))
    for w in words:
        a, b = first.value(w), second.value(w)
        tol = 1e-12 * max(a.hi, b.hi, 1e-300)
        if not a.overlaps(b, tol):
            ok = False
        ea, eb = first.estimate(w), second.estimate(w)
        if max(ea, eb) > 0:
            worst = max(worst, abs(ea - eb) / max(ea, eb))
    report = IndependenceReport(len(words), worst, ok)
    if not ok and raise_on_fail:
        raise IndependenceViolation(f"λ values disagree (max discrepancy {worst:.3g})")
    return report


# ---------------------------------------------------------------- returns and μ


@dataclass(frozen=True)
class ReturnStructure:
    """Word families for {τ > n} (``survivors``) and {τ = n} (``returns``).

    All words have length n + L where L is the longest cylinder word.
    """

    cylinders: tuple
    span: int
    survivors: dict
    returns: dict
    n_max: int

    def survivor_mass(self, lam: LambdaMeasure, n: int) -> tuple[float, Interval]:
        vals = [_lambda_on(lam, w) for w in self.survivors.get(n, ())]
        return math.fsum(v[0] for v in vals), interval_sum(v[1] for v in vals)


def _lambda_on(lam: LambdaMeasure, w) -> tuple[float, Interval]:
    return lam._eval(w) if w not in lam.values else (lam.estimates[w], lam.values[w])


def return_structure(spec: ShiftPresentation, rectangles, n_max: int, max_words: int = 200000) -> ReturnStructure:
    rects = tuple(rectangles) if not isinstance(rectangles, Rectangle) else (rectangles,)
    if any(len(r.past) != 1 for r in rects):
        raise UndetectableReturn("returns are word-detectable only for unions of forward cylinders")
    cyl = tuple(r.future for r in rects)
    span = max(len(v) for v in cyl)
    trans = spec.automaton.trans
    level = []
    for w in spec.words(span):
        if any(w[: len(v)] == v for v in cyl):
            level.append((w, spec.automaton.run(0, w)))
    survivors = {0: [w for w, _ in level]}
    returns: dict = {}
    for n in range(1, n_max + 1):
        nxt, hit = [], []
        for w, s in level:
            for a in range(spec.nsym):
                t = int(trans[s, a])
                if t < 0:
                    continue
                nw = w + (a,)
                if any(nw[n : n + len(v)] == v for v in cyl):
                    hit.append(nw)
                else:
                    nxt.append((nw, t))
        if len(nxt) > max_words:
            raise PreconditionFailed(f"more than {max_words} survivor words at n={n}")
        survivors[n] = [w for w, _ in nxt]
        returns[n] = hit
        level = nxt
    return ReturnStructure(cyl, span, survivors, returns, n_max)


@dataclass(frozen=True, eq=False)
class MuMeasure:
    lam: LambdaMeasure
    n_max: int
    tail_bound: float
    values: dict
    estimates: dict
    mass: Interval
    mass_estimate: float
    partial_masses: tuple

    def normalized(self) -> dict:
        """Estimates of μ/μ(X); exactly additive."""
        return {w: e / self.mass_estimate for w, e in self.estimates.items()}

    def normalized_interval(self, w) -> Interval:
        iv = self.values[w]
        return Interval(iv.lo / self.mass.hi, iv.hi / self.mass.lo)

    def words(self) -> list[Word]:
        return sorted(self.values, key=lambda w: (len(w), w))

    def to_json(self) -> str:
        spec = self.lam.spec
        norm = self.normalized()
        return json.dumps(
            {
                "mass": self.mass.to_list(),
                "tailBound": self.tail_bound,
                "nMax": self.n_max,
                "values": {spec.fmt(w): self.values[w].to_list() for w in self.words()},
                "normalized": {spec.fmt(w): norm[w] for w in self.words()},
            }
        )

    def to_csv(self) -> str:
        return _table_csv(self.lam.spec, self.words(), self.values, self.normalized(), "normalized")


def _merge_at(y: Word, w: Word, n: int) -> Word | None:
    tail = y[n:]
    k = min(len(tail), len(w))
    if tail[:k] != w[:k]:
        return None
    return y + w[k:]


def geometric_tail(values, window: int = 10, safety: float = 2.0) -> tuple[float, float]:
    """(certified tail bound, plain estimate) for Σ_{n>N} a_n from the last terms.

    A least-squares fit of log a_n over the last ``window`` terms gives the
    rate; the amplitude is raised until the fitted envelope dominates every
    term in the window, which also handles period-two sequences.
    """
    vals = [float(v) for v in values]
    if not vals or vals[-1] == 0.0:
        return 0.0, 0.0
    recent = vals[-window:]
    if len(recent) < 3 or min(recent) <= 0.0:
        raise TailUnbounded("not enough positive terms for a tail fit")
    n = np.arange(len(recent), dtype=float)
    slope = float(np.polyfit(n, np.log(recent), 1)[0])
    rho = math.exp(slope)
    if rho >= 1.0:
        raise TailUnbounded(f"terms do not decay geometrically (fitted ratio {rho:.4g})")
    last = len(recent) - 1
    amp = max(a * rho ** (last - j) for j, a in enumerate(recent))
    plain = amp * rho / (1.0 - rho)
    return safety * plain, plain


def mu_build(lam: LambdaMeasure, structure: ReturnStructure, n_max: int | None = None, depth: int = 4) -> MuMeasure:
    """μ = Σ_n σ^n_*(λ restricted to {τ > n}) on cylinders of length ≤ depth."""
    spec = lam.spec
    n_max = structure.n_max if n_max is None else min(n_max, structure.n_max)
    partial = [structure.survivor_mass(lam, n) for n in range(n_max + 1)]
    tail_iv, _ = geometric_tail([p[1].hi for p in partial])
    values, estimates = {}, {}
    for k in range(1, depth + 1):
        for w in spec.words(k):
            ests, ivs = [], []
            for n in range(n_max + 1):
                for y in structure.survivors[n]:
                    m = _merge_at(y, w, n)
                    if m is None:
                        continue
                    e, iv = _lambda_on(lam, m)
                    ests.append(e)
                    ivs.append(iv)
            est = math.fsum(ests)
            iv = interval_sum(ivs)
            values[w] = Interval(iv.lo, iv.hi + tail_iv)
            estimates[w] = est
    mass_iv = interval_sum(p[1] for p in partial)
    mass = Interval(mass_iv.lo, mass_iv.hi + tail_iv)
    mass_est = math.fsum(p[0] for p in partial)
    return MuMeasure(lam, n_max, tail_iv, values, estimates, mass, mass_est, tuple(p[0] for p in partial))


def check_mu_restriction(mu: MuMeasure) -> float:
    """Largest relative gap between μ and λ on stored cylinders inside the rectangles."""
    worst = 0.0
    for w in mu.estimates:
        inside = any(len(w) >= len(r.future) and w[: len(r.future)] == r.future for r in mu.lam.rectangles)
        if not inside:
            continue
        a, b = mu.estimates[w], mu.lam.estimate(w)
        if max(a, b) > 0:
            worst = max(worst, abs(a - b) / max(a, b))
    return worst


@dataclass(frozen=True)
class InvarianceReport:
    cells: int
    max_defect: float
    all_overlap: bool

    def to_dict(self):
        return {"cells": self.cells, "maxDefect": self.max_defect, "pass": self.all_overlap}


def check_T_invariance(lam: LambdaMeasure, structure: ReturnStructure, depth: int = 8, raise_on_fail: bool = True) -> InvarianceReport:
    """Compare λ({τ = n} ∩ [W]^+) with λ of its image under the return map."""
    spec = lam.spec
    worst, ok, cells = 0.0, True, 0
    for n, words in sorted(structure.returns.items()):
        if n + structure.span > depth:
            break
        for base in words:
            s = spec.automaton.run(0, base)
            exts = [()] + [e for k in range(1, depth - len(base) + 1) for e in spec.extensions_from(s, k)]
            for e in exts:
                W = base + e
                target = next(i for i, r in enumerate(lam.rectangles) if W[n : n + len(r.future)] == r.future)
                before = _lambda_on(lam, W)
                after = lam.rect_value(target, W[: n + 1], W[n:])
                cells += 1
                tol = 1e-12 * max(before[1].hi, after[1].hi, 1e-300)
                if not before[1].overlaps(after[1], tol):
                    ok = False
                if max(before[0], after[0]) > 0:
                    worst = max(worst, abs(before[0] - after[0]) / max(before[0], after[0]))
    report = InvarianceReport(cells, worst, ok)
    if not ok and raise_on_fail:
        raise InvarianceViolation(f"return map changes λ (max defect {worst:.3g})")
    return report


@dataclass(frozen=True)
class LambdaGibbsReport:
    constant: float
    words_checked: int
    worst_ratio: float
    passed: bool

    def to_dict(self):
        return {"K": self.constant, "wordsChecked": self.words_checked, "worstRatio": self.worst_ratio, "pass": self.passed}


def lambda_gibbs_constant(lam: LambdaMeasure) -> float:
    """#A · Q̲² · e^{2C}, with Q̲ bounded above by the Q̄ estimate used for the leaves."""
    q_hat = max(eng.unstable.q_hat for eng in lam.engines)
    return lam.spec.nsym * q_hat**2 * math.exp(2 * delta_sup(lam.phi, lam.spec))


def check_lambda_gibbs(lam: LambdaMeasure, constant: float | None = None, raise_on_fail: bool = True) -> LambdaGibbsReport:
    """λ([w]^+) ≤ K e^{Φ(w) - |w|P} on every stored word."""
    spec = lam.spec
    K = lambda_gibbs_constant(lam) if constant is None else constant
    p, dp = lam.pressure_used.center, lam.pressure_used.half_width
    dp = dp if math.isfinite(dp) else 0.0
    worst, ok = 0.0, True
    tables: dict = {}
    for w, iv in lam.values.items():
        n = len(w)
        if n not in tables:
            tables[n] = global_weight_table(spec, lam.phi, n)
        bound = K * math.exp(tables[n][spec.fmt(w)] - n * p + n * dp)
        ratio = iv.lo / bound
        worst = max(worst, ratio)
        if ratio > 1.0 + 1e-12:
            ok = False
    if lam.mass.lo > K * (1 + 1e-12):
        ok = False
    report = LambdaGibbsReport(K, len(lam.values), worst, ok)
    if not ok and raise_on_fail:
        raise GibbsViolation(f"λ exceeds K e^(Φ - nP) by a factor {worst:.4g}")
    return report


# ---------------------------------------------------------------- oracle comparison


def total_variation(measure: dict, reference: dict, n: int) -> float:
    keys = {w for w in measure if len(w) == n} | {w for w in reference if len(w) == n}
    return 0.5 * math.fsum(abs(measure.get(w, 0.0) - reference.get(w, 0.0)) for w in keys)


def comparison_csv(spec: ShiftPresentation, measure: dict, reference: dict, n: int) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["word", "mu", "oracle", "abs_diff"])
    for w in sorted({w for w in measure if len(w) == n} | {w for w in reference if len(w) == n}):
        a, b = measure.get(w, 0.0), reference.get(w, 0.0)
        out.writerow([spec.fmt(w), repr(a), repr(b), repr(abs(a - b))])
    return buf.getvalue()
