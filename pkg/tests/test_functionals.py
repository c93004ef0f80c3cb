import math
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from walklln.functionals import (ConditionError, check_condition_l1, check_condition_l2, eulerian_poly,
                                 geometric_half, h_shift, indicator_level, indicator_range, parse_functional,
                                 power, tail_limit, theoretical_limit, truncate, user_table)

sys.path.insert(0, str(Path(__file__).parent))
from oracles import limit_series_bruteforce  # noqa: E402

G = 2 / 3


def test_evaluation_examples():
    assert [h_shift(3).evaluate(j) for j in range(6)] == [0, 0, 0, 1, 2, 3]
    assert [indicator_level(2).evaluate(j) for j in range(4)] == [0, 0, 1, 0]
    assert indicator_range().evaluate(0) == 0 and indicator_range().evaluate(7) == 1
    assert user_table([5, 7]).evaluate(2) == 7 and user_table([5, 7]).evaluate(3) == 0
    assert truncate(power(2), 3).evaluate(3) == 9 and truncate(power(2), 3).evaluate(4) == 0
    assert math.isclose(geometric_half(G).evaluate(2), 3.0)
    with pytest.raises(ValueError):
        geometric_half().evaluate(1)
    with pytest.raises(ValueError):
        power(1).evaluate(-1)


@pytest.mark.parametrize("text", ["range", "level:2", "power:2", "power:1.5", "hshift:3", "geomhalf",
                                  "table:1,0.5,2"])
def test_parse_roundtrip(text):
    assert parse_functional(text).ident == text


@pytest.mark.parametrize("text", ["levels:2", "level:0", "hshift:x", "power", "table:", "geomhalf:2", ""])
def test_parse_rejects(text):
    with pytest.raises(ValueError):
        parse_functional(text)


def test_known_limits():
    assert theoretical_limit(indicator_range(), G) == pytest.approx(G, abs=1e-15)
    assert theoretical_limit(power(1), G) == 1.0
    assert theoretical_limit(power(2), G) == pytest.approx(2.0, rel=1e-14)
    for k, target in zip(range(1, 6), [0.4444, 0.1481, 0.0494, 0.0165, 0.0055]):
        lim = theoretical_limit(indicator_level(k), G)
        assert lim == pytest.approx(G * G * (1 - G) ** (k - 1), rel=1e-14)
        assert abs(lim - target) < 5e-5
    for j in range(1, 6):
        assert theoretical_limit(h_shift(j), G) == pytest.approx((1 - G) ** (j - 1), rel=1e-14)


@pytest.mark.parametrize("f", [indicator_range(), power(1), power(2), power(3), power(0.5), power(2.5),
                               h_shift(2), h_shift(4), user_table([1, -2, 3])])
@pytest.mark.parametrize("gamma", [0.3, G, 0.9])
def test_closed_forms_match_brute_force(f, gamma):
    brute = limit_series_bruteforce(f.evaluate, gamma)
    assert theoretical_limit(f, gamma) == pytest.approx(brute, rel=1e-11)
    assert theoretical_limit(f, gamma, method="series") == pytest.approx(brute, rel=1e-11)


def test_eulerian_polynomials():
    assert eulerian_poly(1) == [1]
    assert eulerian_poly(2) == [1, 1]
    assert eulerian_poly(3) == [1, 4, 1]
    assert eulerian_poly(4) == [1, 11, 11, 1]
    assert sum(eulerian_poly(6)) == math.factorial(6)


def test_tail_limit_splits_the_limit():
    f = power(2)
    for p in (1, 3, 10):
        head = theoretical_limit(truncate(f, p), G)
        assert head + tail_limit(f, G, p) == pytest.approx(theoretical_limit(f, G), rel=1e-13)


def test_geomhalf_conditions():
    f = geometric_half(G)
    l1, l2 = check_condition_l1(f, G), check_condition_l2(f, G)
    assert l1.holds
    assert l2.status == "fails" and "harmonic" in l2.certificate
    # the limit itself is finite: gamma^2 sum 3^(j/2) 3^-(j-1) = (4/9) * 3 / (sqrt(3) - 1)
    assert theoretical_limit(f, G) == pytest.approx(4 / 9 * 3 / (math.sqrt(3) - 1), rel=1e-13)
    assert check_condition_l1(geometric_half(), G).status == "undecidable"


def test_condition_failure_raises():
    f = geometric_half(0.2)  # f(j) = 0.8^(-j/2); with gamma = 0.9 the ratio is 0.1/0.8^.5 < 1
    assert check_condition_l1(f, 0.9).holds
    assert check_condition_l1(f, 0.01).status == "fails"
    with pytest.raises(ConditionError):
        theoretical_limit(f, 0.01)
    with pytest.raises(ValueError):
        check_condition_l1(power(1), 1.5)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 0.95), st.sampled_from([power(1), power(3), h_shift(2), indicator_level(3),
                                                 user_table([1, 2]), geometric_half(0.5)]))
def test_l2_implies_l1(gamma, f):
    if check_condition_l2(f, gamma).holds:
        assert check_condition_l1(f, gamma).holds


def test_degenerate_gamma_one():
    assert theoretical_limit(power(2), 1.0) == 1.0
    assert tail_limit(power(2), 1.0, 3) == 0.0
