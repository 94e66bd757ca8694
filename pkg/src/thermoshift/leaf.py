"""Leaf measures on unstable and stable local leaves, as cylinder-interval maps."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundViolation, EmptyLeafCylinder, GibbsViolation, PreconditionFailed
from .intervals import ZERO, Interval, interval_sum
from .potentials import Potential, leaf_chain, leaf_context
from .pressure import PressureEstimate, QCoefficients, _safe_oracle_or_fekete, leaf_q, q_coefficients
from .symbolic import Point, ShiftPresentation, Word

_MIN_REFINEMENT = 3
_RATIO_CAP = 0.9


def _orient(spec, phi, x, orientation):
    if orientation in ("forward", "u"):
        return spec, phi, x, "forward"
    if orientation in ("backward", "s"):
        return spec.reversed(), phi.reversed(), x.reversed(), "backward"
    raise ValueError("orientation must be 'forward' or 'backward'")


def _convergence_slack(log_mass: np.ndarray, k: int) -> np.ndarray:
    """Geometric-tail bound on |log G_∞ - log G_k| from recent increments, per chain state."""
    inc = np.diff(log_mass[: k + 1], axis=0)
    last = np.abs(inc[-1])
    ratios = []
    for j in (len(inc) - 1, len(inc) - 2):
        num, den = np.abs(inc[j]), np.abs(inc[j - 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, _RATIO_CAP, 0.0))
        ratios.append(r)
    tau = np.minimum(np.maximum(*ratios), _RATIO_CAP)
    return last * tau / (1.0 - tau)


class _LeafEngine:
    """Value intervals for words on one oriented leaf, at a fixed total cover depth.

    A word of length n is covered by cylinders of length ``cover_depth``; the
    point estimate is the uniform-cover sum, which makes estimates exactly
    additive.  The enclosure is intersected over all shallower refinements.
    """

    def __init__(self, spec, phi, x, cover_depth, pressure: PressureEstimate, q_hat: float):
        self.spec, self.phi, self.x = spec, phi, x
        self.chain = leaf_chain(spec, phi)
        self.context = leaf_context(spec, phi, x)
        self.cover_depth = cover_depth
        self.p = pressure.center
        self.dp = pressure.half_width if math.isfinite(pressure.half_width) else 0.0
        self.log_q = math.log(q_hat)
        self.chain.arrays()
        with np.errstate(divide="ignore", invalid="ignore"):
            log_mass = np.log(self.chain.future_mass(cover_depth, self.p))
        self.log_mass = log_mass
        ks = np.arange(cover_depth + 1)[:, None]
        eps = np.zeros_like(log_mass)
        for k in range(_MIN_REFINEMENT, cover_depth + 1):
            with np.errstate(invalid="ignore"):
                eps[k] = np.nan_to_num(_convergence_slack(log_mass, k), nan=0.0, posinf=0.0)
        lo = log_mass - eps - ks * self.dp
        hi = log_mass + eps + ks * self.dp
        self.best_lo = np.empty_like(lo)
        self.best_hi = np.empty_like(hi)
        for k in range(cover_depth + 1):
            first = min(_MIN_REFINEMENT, k)
            self.best_lo[k] = lo[first : k + 1].max(axis=0)
            self.best_hi[k] = hi[first : k + 1].min(axis=0)
        self.last_lo, self.last_hi = lo, hi

    def enclosure(self, length: int, acc: float, sid: int) -> tuple[float, Interval]:
        k = self.cover_depth - length
        if k < 0:
            raise ValueError(f"word of length {length} exceeds the cover depth {self.cover_depth}")
        base = acc - length * self.p
        a, b = self.best_lo[k, sid], self.best_hi[k, sid]
        if a > b:
            a, b = self.last_lo[k, sid], self.last_hi[k, sid]
        lo = math.exp(base - length * self.dp - self.log_q + a)
        hi = math.exp(base + length * self.dp + b)
        return math.exp(base + self.log_mass[k, sid]), Interval(min(lo, hi), hi)

    def walk(self, word) -> tuple[int, float]:
        if not word or word[0] != self.x[0]:
            return -1, 0.0
        return self.chain.read(self.context, word)

    def words(self, depth: int):
        """Leaf words of each length 1..depth with chain state and window sum."""
        nxt, logw = self.chain.arrays()
        a = self.x[0]
        s = nxt[self.context, a]
        if s < 0:
            return []
        levels = [(np.array([[a]], dtype=np.uint8), np.array([s]), np.array([logw[self.context, a]]))]
        for _ in range(1, depth):
            words, states, accs = levels[-1]
            cand = nxt[states]
            rows, syms = np.nonzero(cand >= 0)
            levels.append(
                (
                    np.concatenate([words[rows], syms[:, None].astype(np.uint8)], axis=1),
                    cand[rows, syms],
                    accs[rows] + logw[states[rows], syms],
                )
            )
        return levels


@dataclass(frozen=True, eq=False)
class CylinderMeasure:
    """Value intervals m([w]) for leaf cylinders with |w| ≤ depth.

    Forward measures are keyed by w with [w]^+ = {y_{[0,n)} = w}; backward
    ones by w with [w]^- = {y_{(-n, 0]} = w}, read left to right.
    """

    spec: ShiftPresentation
    phi: Potential
    orientation: str
    base_point: Point
    depth: int
    refinement: int
    values: dict
    estimates: dict
    pressure_used: PressureEstimate
    q_hat: float
    certified: bool = True
    _engine: object = field(default=None, repr=False, compare=False)

    def _key(self, w):
        w = self.spec.word(w)
        return w[::-1] if self.orientation == "backward" else w

    def _forward_word(self, w):
        return self._key(w)

    def meets(self, w) -> bool:
        fw = self._forward_word(w)
        return self._engine.walk(fw)[0] >= 0

    def value(self, w, strict: bool = False) -> Interval:
        """Enclosure of the measure of the leaf cylinder of ``w`` (0 when the leaf misses it)."""
        w = self.spec.word(w)
        if not w:
            return self.total
        hit = self.values.get(w)
        if hit is not None:
            return hit
        return self._direct(w, strict)[1]

    def estimate(self, w) -> float:
        w = self.spec.word(w)
        if w in self.estimates:
            return self.estimates[w]
        return self._direct(w, False)[0]

    @property
    def cover_depth(self) -> int:
        return self.depth + self.refinement

    def _direct(self, w, strict):
        fw = self._forward_word(w)
        sid, acc = self._engine.walk(fw)
        if sid < 0:
            if strict:
                raise EmptyLeafCylinder(f"leaf misses the cylinder of {self.spec.fmt(w)}")
            return 0.0, ZERO
        return self._engine.enclosure(len(fw), acc, int(sid))

    @property
    def total(self) -> Interval:
        return self.values.get((self.base_point[0],), ZERO)

    def words(self, n: int | None = None) -> list[Word]:
        return sorted(w for w in self.values if n is None or len(w) == n)

    def to_json(self) -> str:
        return json.dumps(
            {
                "orientation": "u" if self.orientation == "forward" else "s",
                "base": self.base_point.describe(self.spec),
                "values": {self.spec.fmt(w): self.values[w].to_list() for w in sorted(self.values, key=lambda v: (len(v), v))},
            },
            sort_keys=False,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["word", "lo", "hi"])
        for w in sorted(self.values, key=lambda v: (len(v), v)):
            out.writerow([self.spec.fmt(w), repr(self.values[w].lo), repr(self.values[w].hi)])
        return buf.getvalue()


def leaf_measure(
    spec: ShiftPresentation,
    phi: Potential,
    x: Point,
    orientation: str = "forward",
    depth: int = 8,
    refinement: int = 10,
    pressure: PressureEstimate | None = None,
    q_hat: float | None = None,
    width_cap: float = 1e-3,
) -> CylinderMeasure:
    """Build the unstable (forward) or stable (backward) leaf measure of x.

    ``phi`` should already be normalised; ``pressure`` is its pressure
    estimate (near 0).  ``q_hat`` is an upper estimate of Q̄.  Words longer
    than ``depth`` are evaluated directly, up to length depth + refinement.
    """
    if depth < 1 or refinement < 1:
        raise ValueError("depth and refinement must be at least 1")
    spec.check_point(x)
    ospec, ophi, ox, orient = _orient(spec, phi, x, orientation)
    if pressure is None:
        pressure = _safe_oracle_or_fekete(spec, phi, 16)
    if q_hat is None:
        q_hat = q_coefficients(spec, phi, [], range(4, 17), pressure).q_bar.hi
    engine = _LeafEngine(ospec, ophi, ox, depth + refinement, pressure, max(q_hat, 1.0))
    levels = engine.words(depth)
    values: dict = {}
    estimates: dict = {}
    if levels:
        words, states, accs = levels[-1]
        children = {}
        for w, s, a in zip(words, states, accs):
            key = tuple(int(c) for c in w)
            est, iv = engine.enclosure(depth, float(a), int(s))
            children[key] = (est, iv)
        for n in range(depth, 0, -1):
            parents: dict = {}
            for key, (est, iv) in children.items():
                out = key[::-1] if orient == "backward" else key
                values[out] = iv
                estimates[out] = est
                if n > 1:
                    parents.setdefault(key[:-1], []).append((est, iv))
            children = {k: (math.fsum(e for e, _ in v), interval_sum(i for _, i in v)) for k, v in parents.items()}
    certified = math.isfinite(pressure.half_width) and (depth + refinement) * pressure.half_width <= width_cap
    return CylinderMeasure(spec, phi, orient, x, depth, refinement, values, estimates, pressure, q_hat, certified, engine)


# ---------------------------------------------------------------- checks


@dataclass(frozen=True)
class MassReport:
    mass: Interval
    lower_bound: float
    upper_bound: float
    lower_margin: float
    upper_margin: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "mass": self.mass.to_list(),
            "lowerBound": self.lower_bound,
            "upperBound": self.upper_bound,
            "lowerMargin": self.lower_margin,
            "upperMargin": self.upper_margin,
            "pass": self.passed,
        }


def check_mass_bounds(measure: CylinderMeasure, q: QCoefficients, raise_on_fail: bool = True) -> MassReport:
    """Sandwich Q̄^±_x / Q̄ ≤ total mass ≤ Q̲^±_x, compared as enclosures."""
    i = q.index_of(measure.base_point)
    side = q.plus[i] if measure.orientation == "forward" else q.minus[i]
    mass = measure.total
    lower = side.bar.lo / q.q_bar.hi
    upper = side.low.hi
    tol = 1e-12 * max(1.0, upper)
    lo_margin = mass.hi - lower
    hi_margin = upper - mass.lo
    ok = lo_margin >= -tol and hi_margin >= -tol
    report = MassReport(mass, lower, upper, lo_margin, hi_margin, ok)
    if not ok and raise_on_fail:
        which = "lower" if lo_margin < -tol else "upper"
        raise BoundViolation(which, f"mass {mass} outside [{lower:.6g}, {upper:.6g}]")
    return report


@dataclass(frozen=True)
class ScalingReport:
    lhs: Interval
    rhs: Interval
    lhs_estimate: float
    rhs_estimate: float
    defect: float
    slack: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs.to_list(),
            "rhs": self.rhs.to_list(),
            "defect": self.defect,
            "slack": self.slack,
            "pass": self.passed,
        }


def check_scaling(
    spec: ShiftPresentation,
    phi: Potential,
    x: Point,
    zone,
    orientation: str = "forward",
    refinement: int = 10,
    pressure: PressureEstimate | None = None,
    q_hat: float | None = None,
) -> ScalingReport:
    """Compare m_{σx}(σZ) with ∫_Z e^{P-φ} dm_x for a union Z of leaf cylinders.

    For the backward orientation σ is replaced by σ^{-1} and words are read
    in the backward convention.
    """
    ospec, ophi, ox, orient = _orient(spec, phi, x, orientation)
    words = [spec.word(w) for w in zone]
    if orient == "backward":
        words = [w[::-1] for w in words]
    if pressure is None:
        pressure = _safe_oracle_or_fekete(spec, phi, 16)
    for w in words:
        if len(w) < 2 or w[0] != ox[0] or w[1] != ox[1]:
            raise PreconditionFailed(f"shifted cylinder {ospec.fmt(w)} leaves the shifted leaf")
    # φ is constant on a leaf cylinder once the word covers its right window.
    need = max(ophi.right, 2)
    refined = set()
    for w in words:
        if len(w) >= need:
            refined.add(w)
        else:
            for v in ospec.extensions_from(ospec.automaton.run(ospec.past_state(ox), w), need - len(w)):
                refined.add(w + v)
    # Cover σZ one level shallower so both sides use the same continuation depth.
    reach = refinement + max((len(w) for w in refined), default=1)
    mx = leaf_measure(ospec, ophi, ox, "forward", 1, reach, pressure, q_hat)
    msx = leaf_measure(ospec, ophi, ox.shift(1), "forward", 1, reach - 1, pressure, q_hat)
    lhs_iv, rhs_iv, lhs_est, rhs_est = [], [], [], []
    past = ox.window(-ophi.left, 0)
    for w in sorted(refined):
        if not mx.meets(w):
            continue
        factor = math.exp(pressure.center - ophi.value(past + w[: ophi.right]))
        rhs_iv.append(mx.value(w) * factor)
        rhs_est.append(mx.estimate(w) * factor)
        lhs_iv.append(msx.value(w[1:]))
        lhs_est.append(msx.estimate(w[1:]))
    lhs, rhs = interval_sum(lhs_iv), interval_sum(rhs_iv)
    le, re_ = math.fsum(lhs_est), math.fsum(rhs_est)
    defect = abs(le - re_) / max(abs(le), abs(re_), 1e-300) if (le or re_) else 0.0
    slack = max(lhs.width / max(lhs.hi, 1e-300), rhs.width / max(rhs.hi, 1e-300), 1e-12)
    ok = defect <= slack and lhs.overlaps(rhs, 1e-12 * max(lhs.hi, 1.0))
    return ScalingReport(lhs, rhs, le, re_, defect, slack, ok)


@dataclass(frozen=True)
class GibbsReport:
    ratio: Interval
    bounds: Interval
    oscillation: float
    contained: bool
    passed: bool

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio.to_list(),
            "bounds": self.bounds.to_list(),
            "oscillation": self.oscillation,
            "contained": self.contained,
            "pass": self.passed,
        }


def gibbs_ratio(
    spec: ShiftPresentation,
    phi: Potential,
    x: Point,
    w,
    q: QCoefficients,
    orientation: str = "forward",
    refinement: int = 12,
    measure: CylinderMeasure | None = None,
    raise_on_fail: bool = True,
) -> GibbsReport:
    """Ratio m_x([w]) / e^{Φ_x(w) - nP} against its two-sided Q-bound."""
    w = spec.word(w)
    ospec, ophi, ox, orient = _orient(spec, phi, x, orientation)
    fw = w[::-1] if orient == "backward" else w
    pressure = PressureEstimate(q.pressure - q.pressure_width, q.pressure + q.pressure_width, "given", 0)
    if measure is None:
        measure = leaf_measure(spec, phi, x, orientation, 1, refinement + len(w), pressure, q.q_bar.hi)
    chain = leaf_chain(ospec, ophi)
    sid, acc = measure._engine.walk(fw)
    if sid < 0:
        raise EmptyLeafCylinder(f"leaf misses the cylinder of {spec.fmt(w)}")
    hi, lo = chain.tail_extrema()
    n = len(fw)
    weight = acc + float(hi[sid]) - n * q.pressure
    widen = math.exp(n * q.pressure_width)
    ratio = (measure.value(w) * math.exp(-weight)).scale(1 / widen, widen)
    osc = float(hi[sid] - lo[sid])
    # Leaf context of σ^n(y) for y on the leaf inside the cylinder.
    q_after = ospec.automaton.run(ospec.past_state(ox), fw)
    past = (ox.window(-ophi.left, 0) + fw)[-ophi.left :] if ophi.left else ()
    ctx = chain.state(q_after, past)
    lo_sum, hi_sum = [], []
    for a in range(ospec.nsym):
        if ospec.automaton.trans[q_after, a] < 0:
            continue
        lq = leaf_q(ospec, ophi, ctx, a, q.n_range, q.pressure, q.pressure_width)
        lo_sum.append(lq.bar.lo)
        hi_sum.append(lq.low.hi)
    lower = math.fsum(lo_sum) / (math.exp(osc) * q.q_bar.hi)
    upper = math.fsum(hi_sum)
    bounds = Interval(min(lower, upper), upper)
    tol = 1e-9 * max(1.0, upper)
    contained = ratio.lo >= bounds.lo - tol - ratio.width and ratio.hi <= bounds.hi + tol + ratio.width
    ok = ratio.overlaps(bounds, tol)
    report = GibbsReport(ratio, bounds, osc, contained, ok)
    if not ok and raise_on_fail:
        raise GibbsViolation(f"ratio {ratio} misses bounds {bounds} for {spec.fmt(w)}")
    return report
