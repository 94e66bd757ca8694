import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PRESET_NAMES, leaf_point, make_shift, markov, mme
from reference_values import GOLDEN_Q_BAR, GOLDEN_Q_PLUS
from thermoshift.errors import BoundViolation, EmptyLeafCylinder, PreconditionFailed
from thermoshift.intervals import interval_sum
from thermoshift.leaf import check_mass_bounds, check_scaling, gibbs_ratio, leaf_measure
from thermoshift.pressure import normalize_potential, q_coefficients
from thermoshift.symbolic import random_point


@pytest.fixture(scope="module")
def full2_mme():
    spec = make_shift("full2")
    return (spec,) + mme(spec)


@pytest.fixture(scope="module")
def golden_mme():
    spec = make_shift("golden-mean")
    return (spec,) + mme(spec)


def test_full2_closed_form(full2_mme):
    spec, bar, est = full2_mme
    x = spec.point("1", "0", "01")
    m = leaf_measure(spec, bar, x, "forward", 8, 10, est)
    for w in m.words():
        assert w[0] == x[0]
        assert m.value(w).lo == pytest.approx(2.0 ** -len(w), rel=1e-9)
        assert m.estimate(w) == pytest.approx(2.0 ** -len(w), rel=1e-12)
    assert m.total.contains(0.5, 1e-9)


def test_missed_cylinder_is_zero(full2_mme):
    spec, bar, est = full2_mme
    x = spec.point("1", "0", "01")
    m = leaf_measure(spec, bar, x, "forward", 3, 5, est)
    assert m.value("1").hi == 0.0 and not m.meets("1")
    with pytest.raises(EmptyLeafCylinder):
        m.value("10", strict=True)


def test_backward_keys(golden_mme):
    spec, bar, est = golden_mme
    x = spec.point("0", "10", "0", 1)  # x_{-1} x_0 = 10
    m = leaf_measure(spec, bar, x, "backward", 3, 8, est)
    assert m.meets("10") and not m.meets("01")
    assert all(w[-1] == x[0] for w in m.words())


def test_mass_bounds_full2(full2_mme):
    spec, bar, est = full2_mme
    x = spec.point("0", "0", "1")
    q = q_coefficients(spec, bar, [x], range(4, 13), est)
    for orientation in ("forward", "backward"):
        rep = check_mass_bounds(leaf_measure(spec, bar, x, orientation, 8, 10, est), q)
        assert rep.passed
        assert rep.lower_bound == pytest.approx(0.5) and rep.upper_bound == pytest.approx(0.5)


def test_mass_bounds_golden(golden_mme):
    spec, bar, est = golden_mme
    x = spec.point("0", "0", "0")
    q = q_coefficients(spec, bar, [x], range(4, 21), est)
    rep = check_mass_bounds(leaf_measure(spec, bar, x, "forward", 8, 10, est), q)
    assert rep.passed
    assert rep.lower_bound == pytest.approx(GOLDEN_Q_PLUS[0] / GOLDEN_Q_BAR, rel=1e-3)
    assert rep.upper_bound == pytest.approx(GOLDEN_Q_PLUS[0], rel=1e-3)


def test_mass_bounds_violation_raises(golden_mme):
    spec, bar, est = golden_mme
    x = spec.point("0", "0", "0")
    q = q_coefficients(spec, bar, [x], range(4, 21), est)
    m = leaf_measure(spec, bar, x, "forward", 4, 6, est)
    fake = dict(m.values)
    fake[(0,)] = m.total.scale(3.0)
    from dataclasses import replace

    with pytest.raises(BoundViolation) as info:
        check_mass_bounds(replace(m, values=fake), q)
    assert info.value.side == "upper"


def test_scaling_full2(full2_mme):
    spec, bar, est = full2_mme
    x = spec.point("1", "01", "0")
    rep = check_scaling(spec, bar, x, ["010", "011"], "forward", 10, est)
    assert rep.passed and rep.defect <= 1e-12
    assert rep.lhs_estimate == pytest.approx(0.5)


def test_scaling_golden(golden_mme):
    spec, bar, est = golden_mme
    x = spec.point("0", "01", "0")
    rep = check_scaling(spec, bar, x, ["01"], "forward", 10, est)
    assert rep.passed and rep.defect <= rep.slack


def test_scaling_precondition(golden_mme):
    spec, bar, est = golden_mme
    with pytest.raises(PreconditionFailed):
        check_scaling(spec, bar, spec.point("0", "00", "0"), ["01"], "forward", 6, est)


def test_gibbs_full2(full2_mme):
    spec, bar, est = full2_mme
    x = spec.point("0", "0", "1")
    q = q_coefficients(spec, bar, [x], range(4, 13), est)
    rep = gibbs_ratio(spec, bar, x, "0110", q)
    assert rep.ratio.contains(1.0, 1e-9)
    assert rep.bounds.lo == pytest.approx(1.0) and rep.bounds.hi == pytest.approx(1.0)


def test_gibbs_golden_word(golden_mme):
    spec, bar, est = golden_mme
    x = spec.point("0", "0", "0")
    q = q_coefficients(spec, bar, [x], range(4, 21), est)
    assert gibbs_ratio(spec, bar, x, "010", q).passed


def test_gibbs_empty(golden_mme):
    spec, bar, est = golden_mme
    x = spec.point("0", "0", "0")
    q = q_coefficients(spec, bar, [x], range(4, 13), est)
    with pytest.raises(EmptyLeafCylinder):
        gibbs_ratio(spec, bar, x, "1", q)


def test_exports(golden_mme):
    spec, bar, est = golden_mme
    m = leaf_measure(spec, bar, spec.point("0", "0", "0"), "forward", 3, 6, est)
    doc = json.loads(m.to_json())
    assert doc["orientation"] == "u" and "010" in doc["values"]
    lines = m.to_csv().splitlines()
    assert lines[0] == "word,lo,hi" and len(lines) == len(m.values) + 1


def test_certification_flag(golden_mme):
    spec, bar, _ = golden_mme
    from thermoshift.pressure import pressure_estimate

    loose = pressure_estimate(spec, bar, 6)
    m = leaf_measure(spec, bar, spec.point("0", "0", "0"), "forward", 3, 6, loose)
    assert not m.certified


def test_bad_depth(golden_mme):
    spec, bar, est = golden_mme
    with pytest.raises(ValueError):
        leaf_measure(spec, bar, spec.point("0", "0", "0"), "forward", 0, 5, est)


# ---------------------------------------------------------------- properties


def _cases():
    out = [(make_shift(n),) + mme(make_shift(n)) for n in PRESET_NAMES]
    spec, phi = markov()
    out.append((spec,) + normalize_potential(spec, phi))
    return out


CASES = _cases()
case_index = st.integers(0, len(CASES) - 1)
orientations = st.sampled_from(["forward", "backward"])


@given(case_index, st.integers(0, 2**31), orientations)
def test_additivity(i, seed, orientation):
    spec, bar, est = CASES[i]
    x = random_point(spec, np.random.default_rng(seed))
    m = leaf_measure(spec, bar, x, orientation, 5, 8, est)
    for w, iv in m.values.items():
        if len(w) == 5:
            continue
        kids = [w + (a,) if orientation == "forward" else (a,) + w for a in range(spec.nsym)]
        kids = [k for k in kids if k in m.values]
        total = interval_sum(m.values[k] for k in kids)
        assert iv.lo <= total.lo * (1 + 1e-12) and total.hi <= iv.hi * (1 + 1e-12)
        assert math.fsum(m.estimates[k] for k in kids) == pytest.approx(m.estimates[w], rel=1e-12)


@given(case_index, st.integers(0, 2**31))
def test_same_past_same_measure(i, seed):
    spec, bar, est = CASES[i]
    rng = np.random.default_rng(seed)
    x = random_point(spec, rng)
    futures = [f for f in spec.extensions_from(spec.past_state(x), 4) if f[0] == x[0]]
    y = leaf_point(spec, x, futures[int(rng.integers(len(futures)))])
    a = leaf_measure(spec, bar, x, "forward", 4, 6, est)
    b = leaf_measure(spec, bar, y, "forward", 4, 6, est)
    assert a.values == b.values


@given(case_index, st.integers(0, 2**31), orientations)
def test_refinement_narrows(i, seed, orientation):
    spec, bar, est = CASES[i]
    x = random_point(spec, np.random.default_rng(seed))
    widths = []
    for refinement in (4, 7, 10):
        m = leaf_measure(spec, bar, x, orientation, 3, refinement, est)
        widths.append(max(v.width / v.hi for v in m.values.values()))
    assert widths[0] >= widths[1] * (1 - 1e-9) and widths[1] >= widths[2] * (1 - 1e-9)


@given(case_index, st.integers(0, 2**31), orientations, st.integers(2, 4))
def test_scaling_random(i, seed, orientation, length):
    spec, bar, est = CASES[i]
    rng = np.random.default_rng(seed)
    x = random_point(spec, rng)
    if orientation == "forward":
        head = x.window(0, 2)
        ext = spec.extensions_from(spec.automaton.run(spec.past_state(x), head), length - 2)
        zone = [head + e for e in ext]
    else:
        rx, rspec = x.reversed(), spec.reversed()
        head = rx.window(0, 2)
        ext = rspec.extensions_from(rspec.automaton.run(rspec.past_state(rx), head), length - 2)
        zone = [(head + e)[::-1] for e in ext]
    zone = [z for z in zone if rng.random() < 0.7] or zone[:1]
    rep = check_scaling(spec, bar, x, zone, orientation, 10, est)
    assert rep.passed


@given(case_index, st.integers(0, 2**31), orientations)
def test_gibbs_random(i, seed, orientation):
    spec, bar, est = CASES[i]
    rng = np.random.default_rng(seed)
    x = random_point(spec, rng)
    q = q_coefficients(spec, bar, [x], range(4, 17), est)
    m = leaf_measure(spec, bar, x, orientation, 5, 12, est)
    for w in m.words():
        assert gibbs_ratio(spec, bar, x, w, q, orientation, 12, m, raise_on_fail=False).passed
