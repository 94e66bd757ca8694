import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from reference_values import MARKOV_TABLE  # noqa: E402

from thermoshift.potentials import constant_potential, potential_from_config  # noqa: E402
from thermoshift.pressure import normalize_potential  # noqa: E402
from thermoshift.symbolic import even_shift, full_shift, golden_mean  # noqa: E402

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

PRESET_NAMES = ("full2", "golden-mean", "even-shift")


def make_shift(name):
    return {"full2": lambda: full_shift(2), "golden-mean": golden_mean, "even-shift": even_shift}[name]()


def mme(spec):
    """Normalised zero potential, with its pressure estimate."""
    return normalize_potential(spec, constant_potential(spec, 0.0), "oracle")


def markov(spec=None, left=0, right=2):
    spec = spec or golden_mean()
    cfg = {"windowLeft": left, "windowRight": right, "table": MARKOV_TABLE}
    return spec, potential_from_config(spec, cfg)


@pytest.fixture(params=PRESET_NAMES)
def preset_shift(request):
    return make_shift(request.param)


@pytest.fixture
def full2():
    return full_shift(2)


@pytest.fixture
def golden():
    return golden_mean()


@pytest.fixture
def even():
    return even_shift()


def leaf_point(spec, x, word):
    """Point with the past of x whose coordinates [0, |word|) spell ``word``.

    The future is continued by always taking the smallest allowed symbol.
    """
    from thermoshift.symbolic import Point

    trans = spec.automaton.trans
    s = spec.automaton.run(spec.past_state(x), word)
    if s < 0:
        return None
    seen, labels = [s], []
    while True:
        a = next(a for a in range(spec.nsym) if trans[s, a] >= 0)
        labels.append(a)
        s = int(trans[s, a])
        if s in seen:
            k = seen.index(s)
            break
        seen.append(s)
    c0, _ = x.explicit_range()
    left = x.window(c0 - len(x.left), c0)
    core = x.window(c0, 0) + tuple(word) + tuple(labels[:k])
    y = Point(left, core, tuple(labels[k:]), -c0).normalized()
    assert spec.is_legal_point(y)
    return y


def holonomy_defect(spec, bar, pressure, rect, z, y, refinement=10):
    """Largest relative gap between m^u_z(π^{-1}[w]) and ∫_[w] RN dm^u_y over deep words.

    Words extend the rectangle's future past the potential window so the
    density is constant on each cylinder.
    """
    from thermoshift.leaf import leaf_measure
    from thermoshift.product import rn_derivative
    from thermoshift.symbolic import bracket, point_with_window

    mz = leaf_measure(spec, bar, z, "forward", 1, refinement, pressure)
    my = leaf_measure(spec, bar, y, "forward", 1, refinement, pressure)
    length = max(len(rect.future), bar.left + bar.right - 1, 1) + 1
    worst, checked = 0.0, 0
    for w in spec.words(length):
        if w[: len(rect.future)] != rect.future or not my.meets(w):
            continue
        x = bracket(y, point_with_window(spec, rect.past[:-1] + w, 1 - len(rect.past)))
        a, b = mz.estimate(w), rn_derivative(bar, spec, rect, z, y, x) * my.estimate(w)
        worst = max(worst, abs(a - b) / max(a, b))
        checked += 1
    return worst, checked


ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
