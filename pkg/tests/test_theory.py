import math
import sys
from pathlib import Path

import numpy as np
import pytest

from walklln.groups import FreeGroup, Lattice
from walklln.theory import (EscapeProbability, TheoryError, counterexample_lower_bound, escape_curve,
                            first_return_times, gamma_estimate_escape, gamma_estimate_range, gamma_exact,
                            lemma3_check, return_times)
from walklln.walk import RngSpec, from_weights, standard_srw

sys.path.insert(0, str(Path(__file__).parent))
from oracles import free_conditional_return_mean, free_escape_oracle  # noqa: E402

F2, F3, Z3 = FreeGroup(2), FreeGroup(3), Lattice(3)


@pytest.mark.parametrize("rank", [2, 3, 4])
def test_gamma_exact_matches_distance_chain(rank):
    g = FreeGroup(rank)
    est = gamma_exact(g, standard_srw(g))
    assert est.exact and est.gamma == pytest.approx(free_escape_oracle(rank), abs=1e-12)


def test_gamma_exact_only_for_free_srw():
    assert gamma_exact(Z3, standard_srw(Z3)) is None
    assert gamma_exact(F2, from_weights(F2, {"a": 1, "A": 1, "b": 2, "B": 2})) is None


def test_escape_probability_invariants():
    with pytest.raises(TheoryError):
        EscapeProbability(0.0, "exact")
    with pytest.raises(TheoryError):
        EscapeProbability(0.5, "escape", 100, 10, 0.0)
    assert EscapeProbability(1.0, "range", 10, 5, 0.0).gamma == 1.0


def test_escape_estimate_brackets_gamma():
    est = gamma_estimate_escape(F2, standard_srw(F2), 2000, 4000, RngSpec(1))
    assert est.source == "escape" and est.ci_halfwidth > 0
    # the estimate is biased upwards, but on F_2 the return-time tail is exponential
    assert abs(est.gamma - 2 / 3) <= est.ci_halfwidth * 1.5


def test_escape_curve_monotone():
    fr = first_return_times(standard_srw(Z3), 5000, 500, RngSpec(2))
    curve = escape_curve(fr, [1, 2, 10, 100, 1000, 5000])
    assert all(b <= a for a, b in zip(curve, curve[1:]))
    assert curve[0] == 1.0  # a return needs at least two steps
    assert curve[1] == pytest.approx(5 / 6, abs=0.05)


def test_range_estimator_on_free_group():
    est = gamma_estimate_range(F2, standard_srw(F2), 20_000, 40, RngSpec(3))
    assert est.source == "range" and abs(est.gamma - 2 / 3) < 0.01


def test_conditional_return_mean_on_free_group():
    rt = return_times(F2, standard_srw(F2), 2000, 3, RngSpec(4), replicas=20_000)
    a = rt.conditional_mean(1)
    assert free_conditional_return_mean(2) == pytest.approx(3.0, abs=1e-9)
    assert abs(a.mean - 3.0) <= 3 * a.stderr
    assert rt.return_fraction(1) == pytest.approx(1 / 3, abs=0.015)
    assert rt.a_stabilized()[0]
    assert np.all(np.diff(rt.times, axis=1)[~rt.censored[:, 1:]] > 0)


def test_heavy_tail_not_stabilized_on_z3():
    rt = return_times(Z3, standard_srw(Z3), 4000, 1, RngSpec(5), replicas=4000)
    ok, why = rt.a_stabilized()
    assert not ok and why


def test_lemma3_bound_small_scale():
    dist = standard_srw(F2)
    rep = lemma3_check(F2, dist, 300, 5, 2000, gamma_exact(F2, dist), RngSpec(6), a=3.0)
    assert rep.holds
    row1 = rep.rows[0]
    assert row1.rhs_mean == pytest.approx((2 / 3) ** 2 * 300) and row1.rhs_stderr == 0
    with pytest.raises(TheoryError):
        lemma3_check(F2, dist, 300, 5, 2000, None, RngSpec(6))


def test_counterexample_floor():
    assert counterexample_lower_bound(2 / 3, 3.0) == pytest.approx((4 / 9) / (4 * 3 * (1 / 3)))


def test_theory_rejects_bad_arguments():
    with pytest.raises(TheoryError):
        return_times(F2, standard_srw(Z3), 10, 1, RngSpec(0))
    with pytest.raises(TheoryError):
        gamma_estimate_escape(F2, standard_srw(F2), 0, 10, RngSpec(0))
