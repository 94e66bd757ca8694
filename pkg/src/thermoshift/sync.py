"""Synchronizing words and the end-to-end construction of the equilibrium state from [v]^+."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import IllegalWord, NotFound, StepFailed, ThermoshiftError
from .intervals import Interval
from .leaf import leaf_measure
from .oracle import entropy_and_integral, oracle_measure, oracle_pressure_any, oracle_pressure_data
from .potentials import Potential, global_weight_table, global_weights, regularity_constants
from .pressure import (
    PressureEstimate,
    _logsumexp,
    avoiding_log_sums,
    fitted_ratio,
    limsup_estimate,
    normalize_potential,
    q_coefficients,
)
from .product import (
    Rectangle,
    check_lambda_gibbs,
    geometric_tail,
    lambda_build,
    mu_build,
    rectangle_point,
    return_structure,
    total_variation,
)
from .symbolic import ShiftPresentation, Word, avoiding, follower_graph


# ---------------------------------------------------------------- words


def is_synchronizing(spec: ShiftPresentation, v) -> bool:
    """uv, vw ∈ L ⇒ uvw ∈ L, decided on the minimal follower-set automaton."""
    v = spec.word(v)
    auto = spec.automaton
    target = auto.run(0, v)
    if target < 0:
        return False
    return all(auto.run(q, v) in (-1, target) for q in range(auto.n_states))


def verify_synchronizing(spec: ShiftPresentation, v, max_len: int = 6) -> bool:
    """Brute-force check of the defining implication for |u|, |w| ≤ max_len."""
    v = spec.word(v)
    words = [w for n in range(max_len + 1) for w in spec.words(n)]
    lefts = [u for u in words if spec.is_legal(u + v)]
    rights = [w for w in words if spec.is_legal(v + w)]
    return all(spec.is_legal(u + v + w) for u in lefts for w in rights)


def find_synchronizing_words(spec: ShiftPresentation, max_len: int) -> list[Word]:
    return [w for n in range(1, max_len + 1) for w in spec.words(n) if is_synchronizing(spec, w)]


def avoid_shift(spec: ShiftPresentation, v) -> ShiftPresentation:
    """Presentation of Y_v, the points that never show v (``is_empty`` flags the degenerate case)."""
    v = spec.word(v)
    if not spec.is_legal(v) or not v:
        raise IllegalWord(f"{spec.fmt(v)} is not a nonempty word of the language")
    return avoiding(spec, [v], name=f"{spec.name}-avoid-{spec.fmt(v)}")


def pressure_gap(spec: ShiftPresentation, phi: Potential, v, n_max: int = 16) -> tuple[Interval, float, float]:
    """(P(X) - P(Y_v) as an interval, P(X), P(Y_v)) from the oracle on both presentations."""
    _, data = oracle_pressure_data(spec, phi)
    px = data.log_rho
    py = oracle_pressure_any(avoid_shift(spec, v), phi)
    tol = max(1e-10, 10 * data.residual)
    if math.isinf(py):
        return Interval(math.inf, math.inf), px, py
    gap = px - py
    return Interval(gap - tol, gap + tol), px, py


def gluing_word(spec: ShiftPresentation, v, bound: int | None = None) -> Word:
    """Shortest, then lexicographically first, u with vuv ∈ L."""
    v = spec.word(v)
    auto = spec.automaton
    s = auto.run(0, v)
    if s < 0:
        raise IllegalWord(f"{spec.fmt(v)} is not in the language")
    if bound is None:
        bound = 2 * follower_graph(spec).n_vertices ** 2
    for t in range(bound + 1):
        for u in spec.extensions_from(s, t):
            if auto.run(s, u + v) >= 0:
                return u
    raise NotFound(f"no gluing word of length ≤ {bound} for {spec.fmt(v)}")


def _occurrences(w: Word, v: Word) -> list[int]:
    return [i for i in range(len(w) - len(v) + 1) if w[i : i + len(v)] == v]


def decompose_bgb(spec: ShiftPresentation, v, w) -> tuple[Word, Word, Word]:
    """Split w into (prefix before the first v, span from first to last v, suffix after it)."""
    v, w = spec.word(v), spec.word(w)
    if not spec.is_legal(w):
        raise IllegalWord(f"{spec.fmt(w)} is not in the language")
    hits = _occurrences(w, v)
    if not hits:
        return w, (), ()
    i, j = hits[0], hits[-1] + len(v)
    return w[:i], w[i:j], w[j:]


def in_g(w: Word, v: Word) -> bool:
    return len(w) >= len(v) and w[: len(v)] == v and w[len(w) - len(v) :] == v


# ---------------------------------------------------------------- pipeline


@dataclass
class SyncParams:
    n_max: int = 30
    g_max: int = 18
    leaf_depth: int = 10
    refinement: int = 10
    mu_depth: int = 4
    entropy_depth: int = 12
    gibbs_depth: int = 12
    spec_check_len: int = 8
    tv_tolerance: float = 1e-3
    variational_tolerance: float = 5e-3
    q_range: tuple = tuple(range(4, 17))

    @classmethod
    def from_dict(cls, d: dict) -> "SyncParams":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        if "q_range" in known:
            known["q_range"] = tuple(known["q_range"])
        return cls(**known)


@dataclass(frozen=True)
class StepVerdict:
    step: str
    passed: bool
    detail: dict

    def to_dict(self) -> dict:
        return {"step": self.step, "pass": self.passed, "detail": self.detail}


@dataclass
class SyncReport:
    sync_word: str
    gluing_word: str | None = None
    spec_gap: int | None = None
    pressure_x: PressureEstimate | None = None
    pressure_yv: float | None = None
    gap: Interval | None = None
    q_b: list = field(default_factory=list)
    q_g: list = field(default_factory=list)
    tau_integral: Interval | None = None
    gibbs_k: Interval | None = None
    verdicts: list = field(default_factory=list)
    mu_normalized: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.verdicts) and all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        def iv(x):
            return None if x is None else [_finite(x.lo), _finite(x.hi)]

        return {
            "syncWord": self.sync_word,
            "gluingWord": self.gluing_word,
            "specGap": self.spec_gap,
            "pressureX": None if self.pressure_x is None else self.pressure_x.to_dict(),
            "pressureYv": _finite(self.pressure_yv),
            "gap": iv(self.gap),
            "qB": self.q_b,
            "qG": self.q_g,
            "tauIntegral": iv(self.tau_integral),
            "gibbsK": iv(self.gibbs_k),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "muNormalized": self.mu_normalized,
            "oracle": self.oracle,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def summary(self) -> str:
        lines = [f"synchronizing word: {self.sync_word}"]
        if self.gluing_word is not None:
            lines.append(f"gluing word: {self.gluing_word or '(empty)'} (gap t = {self.spec_gap})")
        if self.gap is not None:
            lines.append(f"pressure gap: [{self.gap.lo:.6g}, {self.gap.hi:.6g}]")
        if self.tau_integral is not None:
            lines.append(f"return-time integral: [{self.tau_integral.lo:.6g}, {self.tau_integral.hi:.6g}]")
        if self.gibbs_k is not None:
            lines.append(f"Gibbs ratio band: [{self.gibbs_k.lo:.6g}, {self.gibbs_k.hi:.6g}]")
        for v in self.verdicts:
            lines.append(f"  {v.step:<10} {'pass' if v.passed else 'FAIL'}")
        return "\n".join(lines)


def _finite(x):
    if x is None:
        return None
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _q_series_g(spec, phi, v, g_max) -> list[float]:
    out = []
    for n in range(g_max + 1):
        if n < len(v):
            out.append(0.0)
            continue
        words, hi, _ = global_weights(spec, phi, n)
        mask = np.all(words[:, : len(v)] == np.array(v, dtype=np.uint8), axis=1) & np.all(
            words[:, n - len(v) :] == np.array(v, dtype=np.uint8), axis=1
        )
        out.append(math.exp(_logsumexp(hi[mask])) if mask.any() else 0.0)
    return out


def _g_window_positivity(q_b: list, q_g: list) -> dict:
    """Max of Q_j(G) over windows of length N against 1/(2SN)."""
    r = [math.fsum(q_b[i] * q_b[l - i] for i in range(l + 1)) for l in range(len(q_b))]
    s = max(r)
    k = max(q_g)
    tail_known = [math.fsum(r[n:]) for n in range(len(r))]
    try:
        tail_extra, _ = geometric_tail(r)
    except ThermoshiftError:
        tail_extra = math.inf
    window = next((n for n in range(1, len(r)) if tail_known[n] + tail_extra < 1.0 / (2.0 * k)), None)
    if window is None or window >= len(q_g) - 1:
        return {"pass": False, "reason": "no window length certified within the computed range", "S": s, "K": k}
    need = 1.0 / (2.0 * s * window)
    worst = min(max(q_g[n - window + 1 : n + 1]) for n in range(window + 1, len(q_g)))
    return {"pass": worst >= need, "S": s, "K": k, "N": window, "required": need, "worstWindowMax": worst}


def sync_pipeline(spec: ShiftPresentation, phi: Potential, v, params: SyncParams | None = None, halt: bool = True) -> SyncReport:
    """Run the certificates in order and build μ from the product measure on [v]^+.

    With ``halt`` a failed step raises StepFailed carrying the partial report
    in its ``report`` attribute.
    """
    params = params or SyncParams()
    t0 = time.perf_counter()
    v = spec.word(v)
    report = SyncReport(sync_word=spec.fmt(v))

    def verdict(step, ok, reason="certificate failed", **detail):
        if not ok:
            detail["reason"] = reason
        report.verdicts.append(StepVerdict(step, bool(ok), detail))
        if not ok and halt:
            report.runtime = time.perf_counter() - t0
            err = StepFailed(step, reason)
            err.report = report
            raise err
        return ok

    # validation
    legal = bool(v) and spec.is_legal(v)
    sync = legal and is_synchronizing(spec, v)
    verdict("validation", legal and sync, legal=legal, synchronizing=sync,
            reason="word is not legal" if not legal else "word is not synchronizing")
    if not (legal and sync):
        return report

    bar, pressure = normalize_potential(spec, phi, "oracle")
    report.pressure_x = pressure.shifted(-(bar.normalization - phi.normalization))
    gap, px, py = pressure_gap(spec, bar, v)
    report.gap = gap
    report.pressure_yv = py + (bar.normalization - phi.normalization) if math.isfinite(py) else py
    if not verdict("gap", gap.lo > 0, gap=[_finite(gap.lo), _finite(gap.hi)], reason="no pressure gap"):
        return report

    u = gluing_word(spec, v)
    report.gluing_word, report.spec_gap = spec.fmt(u), len(u)
    g_words = [w for n in range(len(v), params.spec_check_len + 1) for w in spec.words(n) if in_g(w, v)]
    bad = [(a, b) for a in g_words for b in g_words if not spec.is_legal(a + u + b)]
    verdict("step1", not bad, gluingWord=spec.fmt(u), pairsChecked=len(g_words) ** 2, violations=len(bad),
            reason="G is not closed under gluing")

    # step 2: summability of Q_n(B), finiteness of Q̄ and window positivity of Q_n(G)
    log_b = avoiding_log_sums(spec, bar, [v], params.n_max)
    q_b = [math.exp(log_b[n]) if n in log_b else math.nan for n in range(params.n_max + 1)]
    report.q_b = q_b
    q_g = _q_series_g(spec, bar, v, params.g_max)
    report.q_g = q_g
    known = [x for x in q_b if not math.isnan(x)]
    third = known[-max(3, len(known) // 3) :]
    ratio = fitted_ratio(third)
    summable = ratio <= math.exp(-gap.lo / 2) if math.isfinite(gap.lo) else ratio <= 1.0
    qc = q_coefficients(spec, bar, [], params.q_range, pressure)
    positivity = _g_window_positivity(known, q_g)
    verdict("step2", summable and math.isfinite(qc.q_bar.hi) and positivity["pass"],
            fittedRatio=ratio, ratioCap=math.exp(-gap.lo / 2) if math.isfinite(gap.lo) else 1.0,
            qBar=qc.q_bar.to_list(), windowPositivity=positivity,
            reason="Q_n(B) not summable, Q̄ unbounded, or Q_n(G) windows too small")

    # step 3: positivity of leaf measures on [v]^+
    rect = Rectangle.cylinder(spec, v)
    q = rectangle_point(spec, rect)
    bowen, _ = regularity_constants(bar, spec)
    qg_bar = limsup_estimate(q_g).lo
    span_mu = params.n_max + len(v) + max(params.mu_depth, params.gibbs_depth, params.entropy_depth) + bar.width
    refinement = max(params.refinement, span_mu - params.leaf_depth)
    m_u = leaf_measure(spec, bar, q, "forward", params.leaf_depth, refinement, pressure, qc.q_bar.hi)
    m_s = leaf_measure(spec, bar, q, "backward", params.leaf_depth, refinement, pressure, qc.q_bar.hi)
    phi_u = global_weight_table(spec, bar, len(u))[spec.fmt(u)] if u else 0.0
    need_u = math.exp(-bowen) * qg_bar / qc.q_bar.hi
    need_s = math.exp(phi_u - 2 * bowen - len(u) * pressure.center) * qg_bar / qc.q_bar.hi
    ok3 = m_u.total.lo > 0 and m_s.total.lo > 0 and m_u.total.hi >= need_u * (1 - 1e-9) and m_s.total.hi >= need_s * (1 - 1e-9)
    verdict("step3", ok3, unstableMass=m_u.total.to_list(), stableMass=m_s.total.to_list(),
            unstableLower=need_u, stableLower=need_s, reason="leaf measure below its lower bound")

    # step 4: λ on [v]^+ and the return-time integral
    lam = lambda_build(spec, bar, rect, q, params.leaf_depth, refinement, pressure, qc.q_bar.hi)
    structure = return_structure(spec, rect, params.n_max)
    partial = [structure.survivor_mass(lam, n) for n in range(params.n_max + 1)]
    try:
        tail, _ = geometric_tail([p[1].hi for p in partial])
    except ThermoshiftError:
        tail = math.inf
    lo = math.fsum(p[1].lo for p in partial)
    hi = math.fsum(p[1].hi for p in partial) + tail
    report.tau_integral = Interval(lo, hi)
    gibbs_lam = check_lambda_gibbs(lam, raise_on_fail=False)
    phi_v = global_weight_table(spec, bar, len(v))[spec.fmt(v)]
    bound_terms = [
        gibbs_lam.constant * math.exp(phi_v - len(v) * pressure.center) * qb
        for qb in q_b if not math.isnan(qb)
    ]
    step_bound = all(p[1].lo <= b * (1 + 1e-9) for p, b in zip(partial, bound_terms))
    verdict("step4", math.isfinite(hi) and gibbs_lam.passed and step_bound,
            tauIntegral=[lo, _finite(hi)], tailBound=_finite(tail), lambdaGibbs=gibbs_lam.to_dict(),
            survivorBound=step_bound, reason="return time not integrable")

    # step 5: μ, oracle agreement, variational principle, μ-Gibbs on G-words
    depth = max(params.mu_depth, params.gibbs_depth, params.entropy_depth)
    mu = mu_build(lam, structure, params.n_max, depth)
    norm = mu.normalized()
    graph, data = oracle_pressure_data(spec, bar)
    om = oracle_measure(graph, data, params.mu_depth)
    tv = total_variation(norm, om, params.mu_depth)
    measure = dict(norm)
    measure[()] = 1.0
    h, integral = entropy_and_integral(measure, bar, params.entropy_depth, tol=1e-8)
    variational = abs(h.center + integral - pressure.center)
    ratios = []
    for n in range(len(v), params.gibbs_depth + 1):
        table = global_weight_table(spec, bar, n)
        for w in spec.words(n):
            if in_g(w, v) and norm.get(w, 0.0) > 0:
                ratios.append(norm[w] * math.exp(n * pressure.center - table[spec.fmt(w)]))
    band = Interval(min(ratios), max(ratios)) if ratios else None
    report.gibbs_k = band
    k_emp = max(band.hi, 1.0 / band.lo) if band else math.inf
    report.mu_normalized = {spec.fmt(w): norm[w] for w in sorted(norm) if len(w) <= params.mu_depth}
    report.oracle = {spec.fmt(w): om[w] for w in sorted(om) if len(w) == params.mu_depth}
    verdict("step5", tv <= params.tv_tolerance and variational <= params.variational_tolerance and math.isfinite(k_emp),
            totalVariation=tv, entropy=h.to_list(), integral=integral, variationalDefect=variational,
            empiricalK=_finite(k_emp), muMass=mu.mass.to_list(), reason="μ does not match the equilibrium state")
    report.runtime = time.perf_counter() - t0
    return report
