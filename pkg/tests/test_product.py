import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import holonomy_defect, make_shift, markov, mme
from reference_values import EVEN_MME_4, MARKOV_TABLE
from thermoshift.errors import (
    GibbsViolation,
    IndependenceViolation,
    NotInRectangle,
    PreconditionFailed,
    TailUnbounded,
    UndetectableReturn,
)
from thermoshift.oracle import entropy_and_integral, oracle_measure, oracle_pressure_data
from thermoshift.potentials import constant_potential
from thermoshift.pressure import normalize_potential
from thermoshift.product import (
    LeafCylinderSet,
    Rectangle,
    check_T_invariance,
    check_lambda_gibbs,
    check_mu_restriction,
    check_q_independence,
    comparison_csv,
    enumerate_rectangles,
    geometric_tail,
    holonomy_image,
    is_rectangle,
    lambda_build,
    lambda_gibbs_constant,
    mu_build,
    rectangle_point,
    return_structure,
    rn_derivative,
    total_variation,
)


@pytest.fixture(scope="module")
def full2_mme():
    spec = make_shift("full2")
    return (spec,) + mme(spec)


@pytest.fixture(scope="module")
def golden_mme():
    spec = make_shift("golden-mean")
    return (spec,) + mme(spec)


@pytest.fixture(scope="module")
def even_mme():
    spec = make_shift("even-shift")
    return (spec,) + mme(spec)


def test_rectangle_basics(golden, even):
    r = Rectangle.open(golden, "10", "01")
    assert r.symbol0 == 0 and r.word == (1, 0, 1)
    assert r.contains(golden.point("0", "101", "0", 1))
    assert is_rectangle(golden, r)
    assert is_rectangle(even, Rectangle.cylinder(even, "1"))
    assert not is_rectangle(even, Rectangle.cylinder(even, "0"))
    with pytest.raises(PreconditionFailed):
        Rectangle.open(golden, "1", "0")


def test_induced_rectangles(golden):
    r = Rectangle.open(golden, "0", "0")
    fwd = r.induced((0, 1), 1, "forward")
    assert fwd.past == (0, 1) and fwd.future == (1,)
    back = r.induced((1, 0), 1, "backward")
    assert back.past == (1,) and back.future == (1, 0)
    with pytest.raises(PreconditionFailed):
        r.induced((1,), 0, "forward")


def test_holonomy_image_examples(golden):
    r = Rectangle.open(golden, "0", "0")
    z = golden.point("0", "00", "0", 1)
    y = golden.point("0", "100", "0", 2)
    image = holonomy_image(golden, r, z, y, LeafCylinderSet(z, ((0, 1),)))
    assert image.base is y and image.words == ((0, 1),)
    same = holonomy_image(golden, r, z, z, LeafCylinderSet(z, ((0, 1),)))
    assert same.words == ((0, 1),)
    back = holonomy_image(golden, r, y, z, image)
    assert back.words == ((0, 1),)
    with pytest.raises(NotInRectangle):
        holonomy_image(golden, Rectangle.open(golden, "1", "1"), z, y, LeafCylinderSet(z, ((0,),)))


def test_rn_derivative_cases(golden):
    r = Rectangle.open(golden, "0", "0")
    z = golden.point("0", "10", "0", 1)
    y = golden.point("0", "00", "0", 1)
    x = golden.point("0", "001", "0", 1)
    assert rn_derivative(constant_potential(golden, 0.4), golden, r, z, y, x) == 1.0
    _, forward_window = markov()
    assert rn_derivative(forward_window, golden, r, z, y, x) == 1.0
    _, past_window = markov(left=1, right=1)
    expected = math.exp(MARKOV_TABLE["10"] - MARKOV_TABLE["00"])
    assert rn_derivative(past_window, golden, r, z, y, x) == pytest.approx(expected)


def test_lambda_full2_closed_form(full2_mme):
    spec, bar, est = full2_mme
    lam = lambda_build(spec, bar, Rectangle.cylinder(spec, "0"), None, 8, 10, est)
    assert lam.mass.contains(0.25, 1e-9)
    for w in lam.words():
        assert w[0] == 0
        assert lam.estimate(w) == pytest.approx(2.0 ** (-len(w) - 1), rel=1e-12)
    assert lam.value("1").hi == 0.0


def test_q_independence_full2(full2_mme):
    spec, bar, est = full2_mme
    rect = Rectangle.cylinder(spec, "0")
    a = lambda_build(spec, bar, rect, spec.point("1", "0", "0"), 6, 8, est)
    b = lambda_build(spec, bar, rect, spec.point("0", "01", "1"), 6, 8, est)
    rep = check_q_independence(a, b)
    assert rep.all_overlap and rep.max_discrepancy <= 1e-12


def test_q_independence_golden(golden_mme):
    spec, bar, est = golden_mme
    rect = Rectangle.open(spec, "0", "0")
    a = lambda_build(spec, bar, rect, spec.point("0", "0", "0"), 10, 10, est)
    b = lambda_build(spec, bar, rect, spec.point("10", "1010", "10", 1), 10, 10, est)
    rep = check_q_independence(a, b)
    assert rep.all_overlap


def test_q_independence_detects_mismatch(golden_mme):
    spec, bar, est = golden_mme
    rect = Rectangle.open(spec, "0", "0")
    a = lambda_build(spec, bar, rect, None, 4, 6, est)
    b = lambda_build(spec, bar, rect, None, 4, 6, est)
    b = dataclasses.replace(b, values={w: iv.scale(2.0) for w, iv in b.values.items()},
                            estimates={w: 2.0 * e for w, e in b.estimates.items()})
    with pytest.raises(IndependenceViolation):
        check_q_independence(a, b)


def test_lambda_rejects_point_outside(golden_mme):
    spec, bar, est = golden_mme
    with pytest.raises(NotInRectangle):
        lambda_build(spec, bar, Rectangle.cylinder(spec, "0"), spec.point("0", "1", "0"), 3, 4, est)


def test_return_structure_examples(full2, golden, even):
    rs = return_structure(even, Rectangle.cylinder(even, "1"), 6)
    for n in range(7):
        assert rs.survivors[n] == [(1,) + (0,) * n]
    rs = return_structure(full2, [Rectangle.cylinder(full2, "0"), Rectangle.cylinder(full2, "1")], 4)
    assert rs.survivors[1] == [] and len(rs.returns[1]) == 4
    rs = return_structure(golden, Rectangle.cylinder(golden, "0"), 4)
    assert rs.returns[1] == [(0, 0)] and rs.returns[2] == [(0, 1, 0)] and rs.survivors[2] == []
    with pytest.raises(UndetectableReturn):
        return_structure(golden, Rectangle.open(golden, "00", "0"), 3)


def test_mu_full2(full2_mme):
    spec, bar, est = full2_mme
    rects = [Rectangle.cylinder(spec, "0"), Rectangle.cylinder(spec, "1")]
    lam = lambda_build(spec, bar, rects, None, 6, 10, est)
    mu = mu_build(lam, return_structure(spec, rects, 6), depth=6)
    assert mu.mass.contains(0.5, 1e-9) and mu.tail_bound == 0.0
    for w, p in mu.normalized().items():
        assert p == pytest.approx(2.0 ** -len(w), rel=1e-12)
    assert check_mu_restriction(mu) <= 1e-12
    rep = check_T_invariance(lam, return_structure(spec, rects, 6), 6)
    assert rep.all_overlap and rep.max_defect <= 1e-12


def test_mu_even_matches_reference(even_mme):
    spec, bar, est = even_mme
    rect = Rectangle.cylinder(spec, "1")
    structure = return_structure(spec, rect, 30)
    lam = lambda_build(spec, bar, rect, None, 8, 30, est)
    mu = mu_build(lam, structure, depth=4)
    norm = mu.normalized()
    assert total_variation(norm, {spec.word(w): p for w, p in EVEN_MME_4.items()}, 4) <= 1e-3
    ones = sum(p for k, p in EVEN_MME_4.items() if k[0] == "1")
    pairs = sum(p for k, p in EVEN_MME_4.items() if k[:2] == "11")
    assert norm[(1, 1)] / norm[(1,)] == pytest.approx(pairs / ones, abs=1e-3)


@pytest.mark.parametrize("window", [(0, 2), (1, 1)])
def test_mu_markov_matches_oracle(window):
    spec, bar, est = HOLONOMY[window]
    rect = Rectangle.cylinder(spec, "0")
    structure = return_structure(spec, rect, 24)
    lam = lambda_build(spec, bar, rect, None, 6, 34, est)
    assert check_T_invariance(lam, return_structure(spec, rect, 6), 4).max_defect <= 1e-12
    mu = mu_build(lam, structure, depth=4)
    graph, data = oracle_pressure_data(spec, bar)
    assert total_variation(mu.normalized(), oracle_measure(graph, data, 4), 4) <= 1e-9


def test_T_invariance_golden(golden_mme):
    spec, bar, est = golden_mme
    rect = Rectangle.cylinder(spec, "0")
    structure = return_structure(spec, rect, 10)
    lam = lambda_build(spec, bar, rect, None, 10, 12, est)
    rep = check_T_invariance(lam, structure, 10)
    assert rep.all_overlap and rep.cells > 0


def test_lambda_gibbs_full2(full2_mme):
    spec, bar, est = full2_mme
    lam = lambda_build(spec, bar, Rectangle.cylinder(spec, "0"), None, 6, 8, est)
    assert lambda_gibbs_constant(lam) == pytest.approx(2.0)
    assert check_lambda_gibbs(lam).passed
    with pytest.raises(GibbsViolation):
        check_lambda_gibbs(lam, constant=0.1)


def test_lambda_gibbs_even(even_mme):
    spec, bar, est = even_mme
    lam = lambda_build(spec, bar, Rectangle.cylinder(spec, "1"), None, 10, 10, est)
    assert check_lambda_gibbs(lam).passed


def test_geometric_tail():
    assert geometric_tail([0.5 ** n for n in range(20)])[1] == pytest.approx(0.5 ** 20 / 0.5, rel=1e-9)
    bound, plain = geometric_tail([0.25 ** (n // 2) for n in range(20)])
    assert bound == 2 * plain and plain >= 0.25 ** 10
    assert geometric_tail([1.0, 0.0]) == (0.0, 0.0)
    with pytest.raises(TailUnbounded):
        geometric_tail([1.0] * 12)


def test_exports(full2_mme):
    spec, bar, est = full2_mme
    lam = lambda_build(spec, bar, Rectangle.cylinder(spec, "0"), None, 3, 6, est)
    assert json.loads(lam.to_json())["values"]["00"][0] == pytest.approx(0.125, rel=1e-9)
    assert lam.to_csv().splitlines()[0] == "word,lo,hi,estimate"
    text = comparison_csv(spec, {(0,): 0.5, (1,): 0.5}, {(0,): 0.5, (1,): 0.5}, 1)
    assert text.splitlines()[1] == "0,0.5,0.5,0.0"


# ---------------------------------------------------------------- properties


def _holonomy_case(window):
    spec, phi = markov(left=window[0], right=window[1])
    bar, est = normalize_potential(spec, phi)
    return spec, bar, est


HOLONOMY = {w: _holonomy_case(w) for w in [(0, 2), (1, 1)]}
GOLDEN_RECTS = enumerate_rectangles(make_shift("golden-mean"), 2, 2)


@given(st.sampled_from(sorted(HOLONOMY)), st.integers(0, len(GOLDEN_RECTS) - 1), st.integers(0, 2**31))
def test_holonomy_identity(window, k, seed):
    spec, bar, est = HOLONOMY[window]
    rect = GOLDEN_RECTS[k]
    rng = np.random.default_rng(seed)
    z, y = rectangle_point(spec, rect, rng), rectangle_point(spec, rect, rng)
    worst, checked = holonomy_defect(spec, bar, est, rect, z, y)
    assert checked > 0 and worst <= 1e-10


@given(st.integers(0, len(GOLDEN_RECTS) - 1), st.integers(0, 2**31))
def test_rectangles_closed_under_bracket(k, seed):
    spec = make_shift("golden-mean")
    rect = GOLDEN_RECTS[k]
    rng = np.random.default_rng(seed)
    a, b = rectangle_point(spec, rect, rng), rectangle_point(spec, rect, rng)
    from thermoshift.symbolic import bracket

    z = bracket(a, b, spec)
    assert rect.contains(z)


@given(st.integers(0, 2**31))
def test_full_support_and_q_independence_markov(seed):
    spec, bar, est = HOLONOMY[(1, 1)]
    rect = Rectangle.open(spec, "0", "0")
    rng = np.random.default_rng(seed)
    a = lambda_build(spec, bar, rect, rectangle_point(spec, rect, rng), 6, 10, est)
    b = lambda_build(spec, bar, rect, rectangle_point(spec, rect, rng), 6, 10, est)
    assert check_q_independence(a, b).all_overlap
    assert all(iv.lo > 0 for iv in a.values.values())


def test_variational_principle_golden(golden_mme):
    spec, bar, est = golden_mme
    rect = Rectangle.cylinder(spec, "0")
    structure = return_structure(spec, rect, 10)
    lam = lambda_build(spec, bar, rect, None, 8, 24, est)
    mu = mu_build(lam, structure, depth=10)
    measure = dict(mu.normalized())
    measure[()] = 1.0
    h, integral = entropy_and_integral(measure, bar, 10, tol=1e-6)
    assert abs(h.center + integral - est.center) <= 5e-3
    graph, data = oracle_pressure_data(spec, bar)
    assert total_variation(mu.normalized(), oracle_measure(graph, data, 4), 4) <= 1e-6
