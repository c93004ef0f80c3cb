import numpy as np
import pytest
from scipy import stats as sps

from walklln.groups import FreeGroup, GroupError, Lattice
from walklln.walk import (AliasTable, RngSpec, StepDistribution, from_weights, return_times, sample_step,
                          simulate_sites, standard_srw, walk)

F2 = FreeGroup(2)
Z3 = Lattice(3)


def test_alias_table_is_exact():
    probs = [0.5, 0.25, 0.125, 0.0625, 0.0625]
    assert np.allclose(AliasTable(probs).implied_probs(), probs, atol=1e-15)


def test_alias_frequencies_chi_square():
    probs = np.array([1, 2, 3, 4, 10], dtype=float)
    probs /= probs.sum()
    draws = AliasTable(probs).draw(RngSpec(7).generator(), 200_000)
    counts = np.bincount(draws, minlength=len(probs))
    assert sps.chisquare(counts, probs * len(draws)).pvalue > 1e-4


def test_weights_validation():
    with pytest.raises(ValueError):
        from_weights(F2, {"a": 1, "A": -1})
    with pytest.raises(ValueError):
        StepDistribution(F2, (), ())
    with pytest.raises(GroupError):
        from_weights(F2, {"c": 1})
    dist = from_weights(Z3, {"(1,0,0)": 3, "(-1,0,0)": 1})
    assert dist.probs == (0.75, 0.25)
    assert not dist.is_standard()
    assert standard_srw(F2).is_standard()


def test_rng_spec_validation_and_determinism():
    with pytest.raises(ValueError):
        RngSpec(-1)
    with pytest.raises(ValueError):
        RngSpec(2**64)
    a = RngSpec(5, 3).generator().random(4)
    assert np.array_equal(a, RngSpec(5, 3).generator().random(4))
    assert not np.array_equal(a, RngSpec(5, 4).generator().random(4))
    assert not np.array_equal(a, RngSpec(5, 3).substream(1).generator().random(4))


def test_block_draws_equal_sequential_draws():
    dist = standard_srw(F2)
    whole = dist.draw_indices(RngSpec(11).generator(), 1000)
    gen = RngSpec(11).generator()
    parts = np.concatenate([dist.draw_indices(gen, 300), dist.draw_indices(gen, 700)])
    assert np.array_equal(whole, parts)
    gen = RngSpec(11).generator()
    singles = [dist.support.index(sample_step(dist, gen)) for _ in range(50)]
    assert singles == whole[:50].tolist()


@pytest.mark.parametrize("group", [F2, Z3])
def test_stream_matches_fast_path(group):
    dist = standard_srw(group)
    n = 5000
    stream = list(walk(group, dist, n, RngSpec(3)))
    tr = simulate_sites(dist, n, RngSpec(3).generator())
    assert len(stream) == n + 1 == len(tr.ids)
    assert stream[0] == group.identity()
    for i in (0, 1, 2, 17, 999, n):
        assert tr.position(i) == stream[i]
    # equal ids exactly when equal elements
    enc = {}
    for i, s in enumerate(stream):
        enc.setdefault(group.encode(s), set()).add(int(tr.ids[i]))
    assert all(len(v) == 1 for v in enc.values())
    assert len(enc) == len(set(tr.ids.tolist()))


def test_fold_property():
    """S_n is the product of the recorded increments."""
    ws = walk(F2, standard_srw(F2), 200, RngSpec(9), record_increments=True)
    last = list(ws)[-1]
    acc = F2.identity()
    for xi in ws.increments:
        acc = F2.compose(acc, xi)
    assert acc == last


def test_walk_rejects_foreign_distribution():
    with pytest.raises(GroupError):
        walk(F2, standard_srw(Z3), 10, RngSpec(0))


def test_return_times_match_trajectory():
    dist = standard_srw(Z3)
    horizon = 3000
    times = return_times(dist, horizon, 50, RngSpec(4).generator())
    tr = simulate_sites(dist, horizon, RngSpec(4).generator())
    expected = (np.flatnonzero(tr.ids[1:] == tr.origin) + 1)[:50]
    assert times.tolist() == expected.tolist()


def test_biased_lattice_walk_drifts():
    dist = from_weights(Lattice(1), {"(1)": 3, "(-1)": 1})
    tr = simulate_sites(dist, 10_000, RngSpec(1).generator())
    assert abs(tr.position(10_000).data[0] / 10_000 - 0.5) < 0.05
