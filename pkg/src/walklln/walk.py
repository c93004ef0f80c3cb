"""Step distributions, seeded substreams and walk generation.

Randomness: every replica owns a Philox4x64 counter-based generator keyed by
``SeedSequence(master_seed, spawn_key=(replica_index,))``.  Distinct replica
indices give distinct 128-bit Philox keys, hence disjoint streams of period
2^256 each.  A step consumes exactly one double from that stream, so the
position sequence does not depend on how draws are blocked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .groups import Element, FreeGroup, GroupDescriptor, GroupError, Lattice

_BLOCK = 4096


@dataclass(frozen=True)
class RngSpec:
    """(master seed, replica index) -> one independent Philox stream.

    ``stream`` separates auxiliary runs (escape or return-time estimates)
    from the main replicas that share a master seed.
    """

    master_seed: int
    replica_index: int = 0
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if self.replica_index < 0:
            raise ValueError(f"replica_index must be >= 0, got {self.replica_index}")

    def generator(self) -> np.random.Generator:
        key = (self.replica_index,) if self.stream == 0 else (self.replica_index, self.stream)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(seq))

    def replica(self, index: int) -> "RngSpec":
        return RngSpec(self.master_seed, index, self.stream)

    def substream(self, stream: int) -> "RngSpec":
        return RngSpec(self.master_seed, self.replica_index, stream)


class AliasTable:
    """Vose alias table; one uniform double per draw."""

    def __init__(self, probs: Sequence[float]):
        p = np.asarray(probs, dtype=float)
        k = len(p)
        scaled = p * k
        prob = np.ones(k)
        alias = np.arange(k, dtype=np.int64)
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = scaled[g] + scaled[s] - 1.0
            if scaled[g] < 1.0:
                small.append(g)
            else:
                large.append(g)
        # leftovers are 1 up to rounding
        self.prob = prob
        self.alias = alias

    def pick(self, u: np.ndarray) -> np.ndarray:
        return _kernels.alias_pick(np.ascontiguousarray(u, dtype=np.float64), self.prob, self.alias)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.pick(rng.random(size))

    def implied_probs(self) -> np.ndarray:
        k = len(self.prob)
        out = self.prob.copy()
        for i in range(k):
            out[self.alias[i]] += 1.0 - self.prob[i]
        return out / k


@dataclass(frozen=True)
class StepDistribution:
    group: GroupDescriptor
    support: tuple[Element, ...]
    weights: tuple[float, ...]
    probs: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.support) == 0:
            raise ValueError("step distribution needs at least one atom")
        if len(self.support) != len(self.weights):
            raise ValueError("support and weights differ in length")
        for a in self.support:
            self.group.check(a)
        if len(set(self.support)) != len(self.support):
            raise ValueError("support elements must be distinct")
        if any(not (w > 0 and math.isfinite(w)) for w in self.weights):
            raise ValueError("weights must be strictly positive and finite")
        total = math.fsum(self.weights)
        probs = tuple(w / total for w in self.weights)
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError("probabilities do not sum to 1")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_alias", AliasTable(probs))
        object.__setattr__(self, "_arrays", _atom_arrays(self.group, self.support))

    @property
    def alias(self) -> AliasTable:
        return self._alias

    def draw_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self._alias.draw(rng, size)

    def is_standard(self) -> bool:
        """True for the uniform law on generators and their inverses."""
        gens = self.group.generators()
        return set(self.support) == set(gens) and len(set(self.weights)) == 1


def standard_srw(group: GroupDescriptor) -> StepDistribution:
    gens = group.generators()
    return StepDistribution(group, tuple(gens), (1.0,) * len(gens))


def from_weights(group: GroupDescriptor, table: dict[str, float]) -> StepDistribution:
    """Build a distribution from config literals (``"(1,0,0)"`` or ``"a"``, ``"A"``)."""
    support, weights = [], []
    for literal, w in table.items():
        support.append(group.parse(literal))
        weights.append(float(w))
    return StepDistribution(group, tuple(support), tuple(weights))


def sample_step(dist: StepDistribution, rng: np.random.Generator) -> Element:
    idx = int(dist.alias.pick(np.array([rng.random()]))[0])
    return dist.support[idx]


class WalkStream:
    """Iterator over positions S_0 = e, S_1, ..., S_n."""

    def __init__(self, group: GroupDescriptor, dist: StepDistribution, n: int, rng: RngSpec,
                 record_increments: bool = False):
        if n < 0:
            raise ValueError("step count must be >= 0")
        if dist.group != group:
            raise GroupError("distribution belongs to a different group")
        self.group = group
        self.dist = dist
        self.n = n
        self.rng_spec = rng
        self._gen = rng.generator()
        self.position = group.identity()
        self.steps = 0
        self._emitted = False
        self._buf = np.empty(0, np.int64)
        self._pos = 0
        self.increments: list[Element] | None = [] if record_increments else None

    def __iter__(self) -> Iterator[Element]:
        return self

    def __next__(self) -> Element:
        if not self._emitted:
            self._emitted = True
            return self.position
        if self.steps >= self.n:
            raise StopIteration
        if self._pos >= len(self._buf):
            self._buf = self.dist.draw_indices(self._gen, min(_BLOCK, self.n - self.steps))
            self._pos = 0
        xi = self.dist.support[int(self._buf[self._pos])]
        self._pos += 1
        if self.increments is not None:
            self.increments.append(xi)
        self.position = self.group.compose(self.position, xi)
        self.steps += 1
        return self.position


def walk(group: GroupDescriptor, dist: StepDistribution, n: int, rng: RngSpec,
         record_increments: bool = False) -> WalkStream:
    return WalkStream(group, dist, n, rng, record_increments)


# --- fast path: site ids of a whole trajectory -------------------------------------------


@dataclass
class SiteTrajectory:
    """Positions S_0..S_n reduced to integer site ids (equal ids <=> equal elements)."""

    ids: np.ndarray
    n_sites: int
    origin: int
    group: GroupDescriptor
    # free group: tree bookkeeping to recover words; lattice: coordinates table
    parent: np.ndarray | None = None
    last: np.ndarray | None = None
    coords: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return len(self.ids) - 1

    def element(self, site: int) -> Element:
        if isinstance(self.group, FreeGroup):
            letters = []
            node = int(site)
            while node != self.origin:
                c = int(self.last[node])
                letters.append(c // 2 + 1 if c % 2 == 0 else -(c // 2 + 1))
                node = int(self.parent[node])
            return Element("free", tuple(reversed(letters)))
        return Element("lattice", tuple(int(x) for x in self.coords[site]))

    def position(self, i: int) -> Element:
        return self.element(int(self.ids[i]))


def _atom_arrays(group: GroupDescriptor, support: Sequence[Element]):
    if isinstance(group, FreeGroup):
        lens = np.array([len(a.data) for a in support], dtype=np.int64)
        letters = np.zeros((len(support), max(1, int(lens.max()))), dtype=np.int64)
        for r, a in enumerate(support):
            for q, x in enumerate(a.data):
                letters[r, q] = 2 * (x - 1) if x > 0 else 2 * (-x - 1) + 1
        return letters, lens
    return np.array([a.data for a in support], dtype=np.int64), None


def simulate_sites(dist: StepDistribution, n: int, rng: np.random.Generator) -> SiteTrajectory:
    """Draw n steps and return the trajectory as dense site ids."""
    group = dist.group
    choices = dist.draw_indices(rng, n) if n > 0 else np.empty(0, np.int64)
    if isinstance(group, FreeGroup):
        letters, lens = dist._arrays
        ids, n_nodes, parent, last = _kernels.free_tree_walk(choices, letters, lens, 2 * group.rank)
        return SiteTrajectory(ids, int(n_nodes), 0, group, parent=parent, last=last)
    atoms = dist._arrays[0]
    if n * int(np.abs(atoms).max()) >= 2**62:
        raise OverflowError("lattice coordinates could overflow 64-bit integers")
    pos = np.zeros((n + 1, group.dim), dtype=np.int64)
    np.cumsum(atoms[choices], axis=0, out=pos[1:])
    lo = pos.min(axis=0)
    span = pos.max(axis=0) - lo + 1
    if math.prod(int(s) for s in span) < 2**62:
        key = np.zeros(n + 1, dtype=np.int64)
        stride = 1
        for axis in range(group.dim):
            key += (pos[:, axis] - lo[axis]) * stride
            stride *= int(span[axis])
        uniq, ids = np.unique(key, return_inverse=True)
        where = np.empty(len(uniq), dtype=np.int64)
        where[ids] = np.arange(n + 1)
        coords = pos[where]
    else:
        coords, ids = np.unique(pos, axis=0, return_inverse=True)
    ids = ids.reshape(-1).astype(np.int64)
    return SiteTrajectory(ids, len(coords), int(ids[0]), group, coords=coords)


def return_times(dist: StepDistribution, horizon: int, max_returns: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Times 1 <= t <= horizon with S_t = e, at most ``max_returns`` of them.

    Draws are consumed in growing chunks and stop early once enough returns
    have been seen.
    """
    group = dist.group
    times = np.zeros(max(1, max_returns), dtype=np.int64)
    state = np.array([0, 0, max_returns], dtype=np.int64)
    if max_returns <= 0 or horizon <= 0:
        return times[:0]
    if isinstance(group, FreeGroup):
        letters, lens = dist._arrays
        stack = np.zeros(horizon * int(lens.max()) + 1, dtype=np.int64)
    else:
        atoms = dist._arrays[0]
        pos = np.zeros(group.dim, dtype=np.int64)
    t0 = 0
    chunk = 256
    while t0 < horizon and state[1] < max_returns:
        size = min(chunk, horizon - t0)
        choices = dist.draw_indices(rng, size)
        if isinstance(group, FreeGroup):
            _kernels.free_returns_chunk(choices, letters, lens, stack, state, times, t0)
        else:
            _kernels.lattice_returns_chunk(choices, atoms, pos, state, times, t0)
        t0 += size
        chunk = min(chunk * 2, 1 << 16)
    return times[: state[1]].copy()


def is_lattice(group: GroupDescriptor) -> bool:
    return isinstance(group, Lattice)
