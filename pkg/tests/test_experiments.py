import numpy as np
import pytest

from walklln.experiments import (ExperimentConfig, resolve_gamma, run_identity_suite, run_l2, run_lln,
                                 run_multirange, run_shift_invariance)
from walklln.functionals import ConditionError, geometric_half, h_shift, indicator_range, power
from walklln.groups import FreeGroup, Lattice
from walklln.walk import standard_srw

F2, Z3 = FreeGroup(2), Lattice(3)


def cfg(group=F2, functionals=(indicator_range(),), checkpoints=(1000, 10_000), replicas=40, **kw):
    return ExperimentConfig(group, standard_srw(group), tuple(functionals), tuple(checkpoints), replicas, **kw)


def test_config_validation():
    with pytest.raises(ValueError):
        cfg(replicas=1)
    with pytest.raises(ValueError):
        cfg(checkpoints=(100, 100))
    with pytest.raises(ValueError):
        ExperimentConfig(F2, standard_srw(Z3), (power(1),), (10,), 2)


def test_lln_small_scale():
    rep = run_lln(cfg(functionals=(indicator_range(), h_shift(2)), tolerance=0.02))
    assert rep.gamma.exact and rep.passed
    row = rep.find("G/n[range]", 10_000)
    assert row.theory_target == pytest.approx(2 / 3)
    assert row.stats.count == 40
    # the a.s. proxy is non-increasing in n for every replica, so its mean is too
    a, b = rep.find("maxdev_after_n[range]", 1000), rep.find("maxdev_after_n[range]", 10_000)
    assert b.stats.mean <= a.stats.mean


def test_results_do_not_depend_on_threads():
    one = run_multirange(cfg(threads=1))
    many = run_multirange(cfg(threads=4))
    assert [(r.statistic, r.checkpoint_n, r.stats) for r in one.rows] == \
           [(r.statistic, r.checkpoint_n, r.stats) for r in many.rows]


def test_multirange_targets_and_h1_exact():
    rep = run_multirange(cfg(tolerance=0.02))
    assert rep.find("R1/n").theory_target == pytest.approx(4 / 9)
    h1 = rep.find("G/n[hshift:1]", 10_000)
    assert h1.stats.mean == 1.0 and h1.stats.variance == 0.0
    assert rep.passed


def test_l2_trend_and_gate():
    rep = run_l2(cfg(functionals=(power(1), power(2)), checkpoints=(1000, 4000, 16_000)))
    assert rep.details["trend[power:1]"]["verdict"] == "identically zero"
    assert rep.details["trend[power:2]"]["slope"] < -0.5
    with pytest.raises(ConditionError, match="counterexample"):
        run_l2(cfg(functionals=(geometric_half(),)))


def test_gamma_fallback_for_lattice():
    c = cfg(group=Z3, checkpoints=(2000,), replicas=10)
    g, note = resolve_gamma(c)
    assert g.source == "range" and "fell back" in note
    g2, _ = resolve_gamma(ExperimentConfig(Z3, standard_srw(Z3), (power(1),), (10,), 2, gamma="escape:500",
                                           escape_replicas=500))
    assert g2.source == "escape" and g2.horizon == 500


def test_shift_invariance():
    rep = run_shift_invariance(cfg(replicas=400), k=200, offsets=(0, 50, 500), j=2)
    assert rep.passed and len(rep.rows) == 3


def test_identity_suite_both_groups():
    for g in (F2, Z3):
        rep = run_identity_suite(cfg(group=g, checkpoints=(500,), replicas=30), j_max=6)
        assert rep.passed and rep.details["failing"] == []


def test_functional_values_exact_for_integer_functionals():
    from walklln.experiments import functional_values, replica_histograms
    c = cfg(checkpoints=(777,), replicas=3)
    vals = functional_values(power(1), replica_histograms(c), c.checkpoints)
    assert np.all(vals == 1.0)
