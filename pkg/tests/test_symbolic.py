import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PRESET_NAMES, make_shift
from thermoshift.errors import ConfigError, EmptyLeafCylinder, IllegalBracket, IllegalPoint, MismatchAtZero
from thermoshift.symbolic import (
    Point,
    avoiding,
    bracket,
    enumerate_language,
    follower_graph,
    is_legal,
    leaf_extensions,
    point_with_window,
    random_point,
    shift_from_config,
)

shift_names = st.sampled_from(PRESET_NAMES)


def words_as_text(spec, words):
    return {spec.fmt(w) for w in words}


def test_full_shift_words(full2):
    assert len(enumerate_language(full2, 3)) == 8


def test_golden_mean_words(golden):
    assert words_as_text(golden, enumerate_language(golden, 3)) == {"000", "001", "010", "100", "101"}


def test_even_shift_two_words(even):
    assert words_as_text(even, enumerate_language(even, 2)) == {"00", "01", "10", "11"}


def test_empty_word_language(golden):
    assert enumerate_language(golden, 0) == [()]


def test_negative_length_rejected(golden):
    with pytest.raises(ValueError):
        enumerate_language(golden, -1)


@pytest.mark.parametrize("spec_name,word,legal", [
    ("golden-mean", "0110", False),
    ("golden-mean", "0101", True),
    ("even-shift", "0110", True),
    ("even-shift", "0101", False),
])
def test_is_legal(spec_name, word, legal):
    assert is_legal(make_shift(spec_name), word) is legal


def test_bracket_full_shift(full2):
    x = full2.point("0", "0", "1", 0)
    y = full2.point("1", "0", "0", 0)
    z = bracket(x, y, full2)
    assert z.same_as(full2.point("0", "0", "0"))


def test_bracket_identity(golden):
    x = golden.point("0", "010", "01", 1)
    assert bracket(x, x, golden).same_as(x)


def test_bracket_mismatch(full2):
    with pytest.raises(MismatchAtZero):
        bracket(full2.point("0", "0", "0"), full2.point("1", "1", "1"))


def test_bracket_illegal():
    spec = shift_from_config({"alphabet": ["0", "1"], "forbidden": ["101"]})
    x = spec.point("0", "10", "0", 1)  # x_{-1} x_0 = 10
    y = spec.point("0", "01", "0", 0)  # y_0 y_1 = 01
    with pytest.raises(IllegalBracket):
        bracket(x, y, spec)


def test_one_step_brackets_always_legal(golden):
    x = golden.point("0", "10", "0", 1)
    y = golden.point("0", "01", "0", 0)
    assert golden.is_legal_point(bracket(x, y, golden))


def test_bracket_golden_legal(golden):
    x = golden.point("0", "010", "0", 2)  # past ...0 1 0, x_0 = 0
    y = golden.point("0", "00101", "0", 0)
    z = bracket(x, y, golden)
    assert golden.is_legal_point(z)
    assert z.window(-2, 1) == (0, 1, 0) and z.window(0, 5) == (0, 0, 1, 0, 1)


def test_leaf_extensions_golden(golden):
    x = golden.point("0", "0", "0")
    assert words_as_text(golden, leaf_extensions(golden, x, "01", 2)) == {"00", "01"}
    assert words_as_text(golden, leaf_extensions(golden, x, "0", 1)) == {"0", "1"}


def test_leaf_extensions_full(full2):
    assert words_as_text(full2, leaf_extensions(full2, full2.point("1", "1", "0"), "1", 1)) == {"0", "1"}


def test_leaf_extensions_empty(golden):
    with pytest.raises(EmptyLeafCylinder):
        leaf_extensions(golden, golden.point("0", "0", "0"), "1", 1)


def test_follower_graph_golden(golden):
    g = follower_graph(golden)
    assert g.n_vertices == 2 and len(g.edges) == 3
    labels = sorted(a for _, _, a in g.edges)
    assert labels == [0, 0, 1]


def test_follower_graph_full(full2):
    g = follower_graph(full2)
    assert g.n_vertices == 1 and len(g.edges) == 2


def test_follower_graph_even_right_resolving(even):
    g = follower_graph(even)
    assert g.n_vertices == 2
    seen = set()
    for s, _, a in g.edges:
        assert (s, a) not in seen
        seen.add((s, a))


def test_config_parsing():
    spec = shift_from_config({"alphabet": ["a", "b"], "kind": "sft", "forbidden": ["bb"]})
    assert spec.fmt(spec.word("ab")) == "ab"
    assert len(spec.words(4)) == 8
    sofic = shift_from_config({"kind": "sofic", "edges": [["E", "E", "1"], ["E", "O", "0"], ["O", "E", "0"]]})
    assert not sofic.is_legal(sofic.word("101"))


@pytest.mark.parametrize("cfg", ["nope", 3, {"kind": "sft"}, {"kind": "weird", "alphabet": ["0"]},
                                 {"kind": "sofic", "edges": []}])
def test_bad_config(cfg):
    with pytest.raises(ConfigError):
        shift_from_config(cfg)


def test_point_requires_cycles():
    with pytest.raises(IllegalPoint):
        Point((), (0,), (0,))


def test_illegal_point_detected(golden):
    assert not golden.is_legal_point(golden.point("1", "", "0"))
    assert not golden.is_legal_point(golden.point("0", "11", "0"))


def test_avoiding_full_shift_gives_golden_mean(full2, golden):
    sub = avoiding(full2, [full2.word("11")])
    for n in range(1, 9):
        assert sub.words(n) == golden.words(n)


# ---------------------------------------------------------------- properties


@given(shift_names, st.integers(1, 7))
def test_factorial(name, n):
    spec = make_shift(name)
    shorter = set(spec.words(n - 1))
    for w in spec.words(n):
        assert w[1:] in shorter and w[:-1] in shorter


@given(shift_names, st.integers(0, 7))
def test_extendable(name, n):
    spec = make_shift(name)
    longer = set(spec.words(n + 1))
    for w in spec.words(n):
        assert any(w + (a,) in longer for a in range(spec.nsym))
        assert any((a,) + w in longer for a in range(spec.nsym))


@given(shift_names, st.integers(0, 6), st.integers(0, 6))
def test_counts_submultiplicative(name, m, n):
    spec = make_shift(name)
    assert len(spec.words(m + n)) <= len(spec.words(m)) * len(spec.words(n))


@st.composite
def point_pairs(draw):
    spec = make_shift(draw(shift_names))
    rng = np.random.default_rng(draw(st.integers(0, 2**31)))
    x = random_point(spec, rng)
    y = point_with_window(spec, (x[0],), 0, rng)
    return spec, x, y


@given(point_pairs())
def test_bracket_idempotent(data):
    spec, x, y = data
    try:
        z = bracket(x, y, spec)
    except IllegalBracket:
        return
    assert bracket(x, z).same_as(z)
    assert bracket(z, y).same_as(z)


@given(point_pairs(), st.integers(0, 4))
def test_bracket_commutes_with_shift(data, n):
    spec, x, _ = data
    rng = np.random.default_rng(n)
    y = point_with_window(spec, x.window(0, n + 1), 0, rng)
    z = bracket(x, y)
    assert bracket(x.shift(n), y.shift(n)).same_as(z.shift(n))


@given(point_pairs())
def test_reverse_is_involution(data):
    _, x, _ = data
    assert x.reversed().reversed().same_as(x)
    assert all(x.reversed()[i] == x[-i] for i in range(-6, 7))


@given(point_pairs())
def test_sampled_points_are_legal(data):
    spec, x, y = data
    assert spec.is_legal_point(x) and spec.is_legal_point(y)
