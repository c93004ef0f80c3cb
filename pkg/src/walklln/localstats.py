"""Streaming local times, multiplicity histograms and functional sums.

A :class:`LocalTimeTable` holds how often each site was visited among the
positions ingested so far (S_0..S_{n-1} after n ingests).  The paired
:class:`MultiplicityHistogram` holds R^(k), the number of sites visited
exactly k times.  A functional sum over sites then equals
``sum_k f(k) * R^(k)``, which is what :class:`RunningFunctionalSum` keeps up
to date one visit at a time.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from . import _kernels
from .functionals import LocalFunctional
from .groups import Element, GroupDescriptor

SNAPSHOT_SCHEMA = "walklln.snapshot/1"


class PairingError(ValueError):
    """Table and histogram do not describe the same visits."""


class MultiplicityHistogram:
    def __init__(self):
        self.r: dict[int, int] = {}
        self.range = 0

    def move(self, old: int, new: int) -> None:
        if old > 0:
            left = self.r[old] - 1
            if left:
                self.r[old] = left
            else:
                del self.r[old]
        else:
            self.range += 1
        self.r[new] = self.r.get(new, 0) + 1

    def visits(self) -> int:
        return sum(k * v for k, v in self.r.items())

    def as_dict(self) -> dict[int, int]:
        return dict(sorted(self.r.items()))

    @classmethod
    def from_counts(cls, counts: Iterable[int]) -> "MultiplicityHistogram":
        h = cls()
        for k, v in Counter(c for c in counts if c > 0).items():
            h.r[k] = v
            h.range += v
        return h

    @classmethod
    def from_array(cls, row: np.ndarray) -> "MultiplicityHistogram":
        """From a dense row where entry k is R^(k)."""
        h = cls()
        for k in np.flatnonzero(row):
            if k > 0:
                h.r[int(k)] = int(row[k])
        h.range = sum(h.r.values())
        return h

    def merge(self, other: "MultiplicityHistogram") -> "MultiplicityHistogram":
        """Bucket-wise sum; associative and commutative (used to pool replicas)."""
        out = MultiplicityHistogram()
        for src in (self, other):
            for k, v in src.r.items():
                out.r[k] = out.r.get(k, 0) + v
        out.range = self.range + other.range
        return out


class RunningFunctionalSum:
    """G = sum over sites of f(local time), updated per visit.

    Integer-valued functionals accumulate exactly in Python ints; real-valued
    ones use Neumaier compensated summation.
    """

    def __init__(self, f: LocalFunctional, name: str | None = None):
        self.f = f
        self.name = name or f.ident
        self.exact = f.is_integer_valued
        self._sum = 0 if self.exact else 0.0
        self._comp = 0.0
        self._delta: dict[int, int | float] = {}  # f(l+1) - f(l), by l

    def _increment(self, old: int):
        if self.exact:
            d = self.f.evaluate_int(old + 1) - self.f.evaluate_int(old)
        else:
            d = self.f.evaluate(old + 1) - self.f.evaluate(old)
        self._delta[old] = d
        return d

    def add_visit(self, old: int) -> None:
        delta = self._delta.get(old)
        if delta is None:
            delta = self._increment(old)
        if self.exact:
            self._sum += delta
            return
        t = self._sum + delta
        if abs(self._sum) >= abs(delta):
            self._comp += (self._sum - t) + delta
        else:
            self._comp += (delta - t) + self._sum
        self._sum = t

    @property
    def value(self):
        return self._sum if self.exact else self._sum + self._comp


class LocalTimeTable:
    """Visit counts keyed by the canonical byte encoding of each site.

    With ``group=None`` any hashable label can be ingested as a site key
    (the fast paths feed integer site ids this way).
    """

    def __init__(self, group: GroupDescriptor | None = None,
                 sums: Sequence[RunningFunctionalSum] = ()):
        self.group = group
        self.counts: dict[Hashable, int] = {}
        self.total_steps = 0
        self.histogram = MultiplicityHistogram()
        self.sums = list(sums)

    def key(self, position) -> Hashable:
        if self.group is not None and isinstance(position, Element):
            return self.group.encode(position)
        return position

    def ingest(self, position) -> None:
        self.ingest_key(self.key(position))

    def ingest_key(self, key: Hashable) -> None:
        old = self.counts.get(key, 0)
        self.counts[key] = old + 1
        self.histogram.move(old, old + 1)
        for s in self.sums:
            s.add_visit(old)
        self.total_steps += 1

    def local_time(self, position) -> int:
        return self.counts.get(self.key(position), 0)

    @property
    def range(self) -> int:
        return self.histogram.range

    def snapshot(self) -> dict:
        return snapshot(self.total_steps, self.histogram, {s.name: s.value for s in self.sums})


def ingest(table: LocalTimeTable, histogram: MultiplicityHistogram,
           sums: Sequence[RunningFunctionalSum], position) -> None:
    """Free-function form: update an explicit (table, histogram, sums) triple."""
    key = table.key(position)
    old = table.counts.get(key, 0)
    table.counts[key] = old + 1
    histogram.move(old, old + 1)
    for s in sums:
        s.add_visit(old)
    table.total_steps += 1


def functional_from_histogram(f: LocalFunctional, hist: MultiplicityHistogram | dict[int, int]):
    """sum_k f(k) R^(k); exact int for integer-valued f."""
    r = hist.r if isinstance(hist, MultiplicityHistogram) else hist
    if f.is_integer_valued:
        return sum(f.evaluate_int(k) * v for k, v in r.items())
    return math.fsum(f.evaluate(k) * v for k, v in r.items())


def _local_times(positions: Iterable[Hashable]) -> Counter:
    return Counter(positions)


def g_sum_direct(trajectory: Sequence[Hashable], f: LocalFunctional):
    """Sum over sites of f(visits among all given positions), from scratch.

    Pass the first n positions S_0..S_{n-1} to get G_n(f).
    """
    if len(trajectory) == 0:
        raise ValueError("trajectory must be nonempty")
    counts = _local_times(trajectory).values()
    if f.is_integer_valued:
        return sum(f.evaluate_int(c) for c in counts)
    return math.fsum(f.evaluate(c) for c in counts)


def g_window(trajectory: Sequence[Hashable], m: int, n: int, f: LocalFunctional):
    """Functional sum over the visits made by positions S_m..S_{n-1}."""
    if not 0 <= m < n <= len(trajectory):
        raise IndexError(f"window [{m}, {n}) outside trajectory of length {len(trajectory)}")
    return g_sum_direct(trajectory[m:n], f)


@dataclass
class IdentityReport:
    n: int
    checks: dict[str, bool] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks[name] = self.checks.get(name, True) and ok
        if not ok:
            self.failures.append(f"{name}: {detail}" if detail else name)

    def merge(self, other: "IdentityReport") -> "IdentityReport":
        out = IdentityReport(self.n + other.n)
        for src in (self, other):
            for k, v in src.checks.items():
                out.checks[k] = out.checks.get(k, True) and v
            out.failures.extend(src.failures)
        return out


def verify_identities(table: LocalTimeTable, histogram: MultiplicityHistogram,
                      trajectory: Sequence[Hashable], j_max: int,
                      split_points: Iterable[int]) -> IdentityReport:
    """Exact integer checks of the visit-count identities on one trajectory.

    ``trajectory`` holds the site keys of the n ingested positions.
    (a) sum_k k R^(k) = n.
    (b) for j <= j_max: G_n(h_j) = sum_{k>=j} (k+1-j) R^(k), recomputed from
        the raw trajectory, and n - G_n(h_j) = (j-1) R_n - sum_{k<j} (j-1-k) R^(k).
    (c) for each split m: G_{0,m}(h_j) + G_{m,n}(h_j) <= G_{0,n}(h_j).
    """
    n = table.total_steps
    if len(trajectory) != n:
        raise PairingError(f"trajectory has {len(trajectory)} positions, table ingested {n}")
    if histogram.range != len(table.counts) or histogram.visits() != sum(table.counts.values()):
        raise PairingError("histogram does not match the local-time table")
    rep = IdentityReport(n)
    r = histogram.r
    rn = histogram.range

    total = sum(k * v for k, v in r.items())
    rep.record("visits_sum", total == n, f"sum k R^(k) = {total} != n = {n}")

    def mult(keys) -> Counter:
        # multiplicity histogram recomputed from the raw keys, independent of ``histogram``
        return Counter(Counter(keys).values())

    def h_sum(m: Counter, j: int) -> int:
        return sum((k + 1 - j) * v for k, v in m.items() if k >= j)

    direct_mult = mult(trajectory)
    splits = sorted(set(split_points))
    windows = {}
    for m in splits:
        if not 0 < m < n:
            raise IndexError(f"split point {m} not in (0, {n})")
        windows[m] = (mult(trajectory[:m]), mult(trajectory[m:]))

    for j in range(1, j_max + 1):
        from_hist = sum((k + 1 - j) * v for k, v in r.items() if k >= j)
        direct = h_sum(direct_mult, j)
        rep.record("h_sum_formula", from_hist == direct,
                   f"j={j}: histogram {from_hist} != direct {direct}")
        rhs = (j - 1) * rn - sum((j - 1 - k) * v for k, v in r.items() if k < j)
        rep.record("h_range_formula", n - from_hist == rhs,
                   f"j={j}: n - G = {n - from_hist} != {rhs}")
        for m in splits:
            left, right = windows[m]
            g0m, gmn = h_sum(left, j), h_sum(right, j)
            rep.record("superadditivity", g0m + gmn <= direct,
                       f"j={j}, m={m}: {g0m} + {gmn} > {direct}")
    return rep


def table_from_keys(keys: Iterable[Hashable], functionals: Sequence[LocalFunctional] = ()) -> LocalTimeTable:
    table = LocalTimeTable(sums=[RunningFunctionalSum(f) for f in functionals])
    for k in keys:
        table.ingest_key(k)
    return table


def snapshot_histograms(ids: np.ndarray, n_sites: int, checkpoints: Sequence[int]) -> np.ndarray:
    """Dense R^(k) rows after the first n positions, for each checkpoint n.

    Compiled counterpart of repeated :meth:`LocalTimeTable.ingest_key`.
    """
    cks = np.asarray(checkpoints, dtype=np.int64)
    if len(cks) and (cks[0] < 1 or cks[-1] > len(ids) or np.any(np.diff(cks) <= 0)):
        raise ValueError("checkpoints must be strictly increasing within the trajectory")
    top = int(np.bincount(ids[: cks[-1]], minlength=1).max()) if len(cks) else 0
    return _kernels.histogram_snapshots(ids, n_sites, cks, top + 2)


def h_values(row: np.ndarray, j_max: int) -> list[int]:
    """G_n(h_j) for j = 1..j_max from a dense histogram row."""
    k = np.arange(len(row), dtype=np.int64)
    return [int(np.sum(np.maximum(k + 1 - j, 0) * row)) for j in range(1, j_max + 1)]


def snapshot(n: int, histogram: MultiplicityHistogram, g_values: dict[str, float]) -> dict:
    return {
        "schema": SNAPSHOT_SCHEMA,
        "n": n,
        "range": histogram.range,
        "histogram": {str(k): v for k, v in histogram.as_dict().items()},
        "g_values": dict(sorted(g_values.items())),
    }


def snapshot_json(snap: dict) -> str:
    return json.dumps(snap, sort_keys=False, separators=(",", ":"))


SNAPSHOT_CSV_FIELDS = ["schema", "replica", "n", "range", "histogram", "g_values"]


def snapshot_csv(rows: Iterable[tuple[int, dict]]) -> str:
    """CSV form: one row per (replica, snapshot); nested maps as compact JSON cells."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SNAPSHOT_CSV_FIELDS)
    for replica, snap in rows:
        w.writerow([snap["schema"], replica, snap["n"], snap["range"],
                    json.dumps(snap["histogram"], separators=(",", ":")),
                    json.dumps(snap["g_values"], separators=(",", ":"))])
    return buf.getvalue()
