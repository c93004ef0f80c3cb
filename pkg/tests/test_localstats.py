import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from walklln.functionals import h_shift, indicator_level, indicator_range, power, user_table
from walklln.groups import Lattice
from walklln.localstats import (LocalTimeTable, MultiplicityHistogram, PairingError, RunningFunctionalSum,
                                functional_from_histogram, g_sum_direct, g_window, h_values, ingest,
                                snapshot_csv, snapshot_histograms, snapshot_json, table_from_keys,
                                verify_identities)

Z1 = Lattice(1)


def test_hand_example():
    """Positions 0, 1, 2, 1 on Z: site 1 twice, sites 0 and 2 once."""
    table = LocalTimeTable(Z1, [RunningFunctionalSum(power(2)), RunningFunctionalSum(indicator_range())])
    for x in (0, 1, 2, 1):
        table.ingest(Z1.element((x,)))
    assert table.histogram.as_dict() == {1: 2, 2: 1}
    assert table.range == 3
    assert table.local_time(Z1.element((1,))) == 2
    assert table.local_time(Z1.element((5,))) == 0
    assert [s.value for s in table.sums] == [1 + 4 + 1, 3]
    snap = table.snapshot()
    assert snap["n"] == 4 and snap["histogram"] == {"1": 2, "2": 1}
    assert json.loads(snapshot_json(snap))["g_values"] == {"power:2": 6, "range": 3}


def test_free_function_ingest_matches_method():
    a, b = LocalTimeTable(), LocalTimeTable()
    hist, sums = MultiplicityHistogram(), [RunningFunctionalSum(h_shift(2))]
    for k in [3, 1, 3, 3, 2, 1]:
        a.ingest_key(k)
        ingest(b, hist, sums, k)
    assert a.counts == b.counts and hist.as_dict() == a.histogram.as_dict()
    assert sums[0].value == g_sum_direct([3, 1, 3, 3, 2, 1], h_shift(2)) == 2 + 1


keys = st.lists(st.integers(0, 15), min_size=1, max_size=200)


@given(keys)
def test_incremental_matches_direct(seq):
    fs = [indicator_range(), indicator_level(2), power(2), h_shift(3), power(1.5), user_table([0.5, -1.0, 2.25])]
    table = table_from_keys(seq, fs)
    for f, s in zip(fs, table.sums):
        direct = g_sum_direct(seq, f)
        if f.is_integer_valued:
            assert s.value == direct
        else:
            assert math.isclose(s.value, direct, rel_tol=1e-12, abs_tol=1e-12)
        assert math.isclose(functional_from_histogram(f, table.histogram), direct, rel_tol=1e-12, abs_tol=1e-12)
    assert table.histogram.visits() == len(seq)


@given(keys, keys)
def test_histogram_merge_associative_commutative(a, b):
    ha, hb = table_from_keys(a).histogram, table_from_keys(b).histogram
    hc = table_from_keys(a[::2]).histogram
    assert ha.merge(hb).as_dict() == hb.merge(ha).as_dict()
    assert ha.merge(hb).merge(hc).as_dict() == ha.merge(hb.merge(hc)).as_dict()
    assert ha.merge(hb).range == ha.range + hb.range


@given(keys, st.integers(1, 6), st.data())
def test_identities_hold(seq, j_max, data):
    table = table_from_keys(seq)
    splits = data.draw(st.lists(st.integers(1, max(1, len(seq) - 1)), max_size=4)) if len(seq) > 1 else []
    rep = verify_identities(table, table.histogram, seq, j_max, splits)
    assert rep.passed, rep.failures


def test_identity_checker_detects_corruption():
    seq = [0, 1, 0, 2, 0, 1]
    table = table_from_keys(seq)
    bad = [0, 1, 2, 3, 4, 5]  # same length, different local times
    rep = verify_identities(table, table.histogram, bad, 3, [3])
    assert not rep.passed and not rep.checks["h_sum_formula"]
    with pytest.raises(PairingError):
        verify_identities(table, table.histogram, seq[:-1], 3, [])
    with pytest.raises(PairingError):
        verify_identities(table, MultiplicityHistogram(), seq, 3, [])
    with pytest.raises(IndexError):
        verify_identities(table, table.histogram, seq, 3, [6])


def test_superadditivity_example():
    # h_2 counts revisits: the two halves see none, the whole sees three
    seq = [0, 1, 2, 0, 1, 2]
    f = h_shift(2)
    assert g_window(seq, 0, 3, f) + g_window(seq, 3, 6, f) == 0 < g_sum_direct(seq, f) == 3
    with pytest.raises(IndexError):
        g_window(seq, 4, 7, f)
    with pytest.raises(ValueError):
        g_sum_direct([], f)


def test_compiled_snapshots_match_streaming():
    rng = np.random.default_rng(0)
    ids = rng.integers(0, 50, size=3000)
    cks = [1, 10, 500, 3000]
    rows = snapshot_histograms(ids, 50, cks)
    for row, n in zip(rows, cks):
        table = table_from_keys(ids[:n].tolist())
        assert MultiplicityHistogram.from_array(row).as_dict() == table.histogram.as_dict()
        assert h_values(row, 4) == [g_sum_direct(ids[:n].tolist(), h_shift(j)) for j in range(1, 5)]
    with pytest.raises(ValueError):
        snapshot_histograms(ids, 50, [10, 5])


def test_snapshot_csv_shape():
    t = table_from_keys([1, 1, 2], [power(2)])
    text = snapshot_csv([(0, t.snapshot()), (1, t.snapshot())])
    lines = text.strip().split("\n")
    assert lines[0] == "schema,replica,n,range,histogram,g_values"
    assert len(lines) == 3 and lines[1].startswith("walklln.snapshot/1,0,3,2,")
