"""Escape probability, return times and the expected multiple-range lower bound.

The escape probability gamma is exact only for the simple random walk on a
free group F_k, where gamma = (2k - 2) / (2k - 1).  Everything else is
estimated.  Return times are observed up to a finite horizon; a return after
the horizon is indistinguishable from no return, so

* the escape-fraction estimate over-estimates gamma (bias shrinks as the
  horizon grows), and
* the conditional mean return time a = E(tau | tau < inf) is estimated from
  returns at or before the horizon only, which under-estimates it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .groups import FreeGroup, GroupDescriptor
from .parallel import map_replicas
from .stats import Z95, AggregateStats, wilson_halfwidth
from .walk import RngSpec, StepDistribution, return_times as _walk_returns, simulate_sites

# auxiliary stream ids so estimates never reuse the experiment replicas' randomness
ESCAPE_STREAM = 1
RETURN_STREAM = 2


class TheoryError(ValueError):
    pass


@dataclass(frozen=True)
class EscapeProbability:
    gamma: float
    source: str  # "exact" | "escape" | "range"
    horizon: int | None = None
    replicas: int | None = None
    ci_halfwidth: float | None = None

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise TheoryError(f"escape probability must lie in (0, 1], got {self.gamma}")
        if self.source == "escape" and not (self.ci_halfwidth and self.ci_halfwidth > 0):
            raise TheoryError("escape-fraction estimate needs a positive CI half-width")
        # a range estimate from a degenerate walk can have zero spread
        if self.source == "range" and (self.ci_halfwidth is None or self.ci_halfwidth < 0):
            raise TheoryError("range estimate needs a CI half-width")

    @property
    def exact(self) -> bool:
        return self.source == "exact"

    def as_dict(self) -> dict:
        out = {"gamma": self.gamma, "source": self.source}
        if not self.exact:
            out.update(horizon=self.horizon, replicas=self.replicas, ci=self.ci_halfwidth)
        return out


def gamma_exact(group: GroupDescriptor, dist: StepDistribution) -> EscapeProbability | None:
    if isinstance(group, FreeGroup) and dist.group == group and dist.is_standard():
        k = group.rank
        return EscapeProbability((2 * k - 2) / (2 * k - 1), "exact")
    return None


def first_return_times(dist: StepDistribution, horizon: int, replicas: int, rng: RngSpec,
                       threads: int | None = None) -> np.ndarray:
    """First return time per replica, 0 when there is none within the horizon."""
    def one(_r, gen):
        t = _walk_returns(dist, horizon, 1, gen)
        return int(t[0]) if len(t) else 0

    return np.array(map_replicas(one, rng, replicas, threads), dtype=np.int64)


def escape_curve(first_returns: np.ndarray, horizons) -> list[float]:
    """Escape fraction at each horizon N from the same first-return samples.

    Pathwise monotone: a walk counted as escaped at N2 is escaped at every N1 < N2.
    """
    fr = np.asarray(first_returns)
    returned = fr > 0
    return [float(np.mean(~(returned & (fr <= n)))) for n in horizons]


def gamma_estimate_escape(group: GroupDescriptor, dist: StepDistribution, horizon: int,
                          replicas: int, rng: RngSpec, threads: int | None = None) -> EscapeProbability:
    """Fraction of walks with S_m != e for 1 <= m <= horizon (an over-estimate of gamma)."""
    if horizon < 1 or replicas < 1:
        raise TheoryError("horizon and replicas must be >= 1")
    if dist.group != group:
        raise TheoryError("distribution belongs to a different group")
    fr = first_return_times(dist, horizon, replicas, rng.substream(ESCAPE_STREAM), threads)
    escaped = int(np.sum(fr == 0))
    p, half = wilson_halfwidth(escaped, replicas)
    return EscapeProbability(p, "escape", horizon, replicas, half)


def range_fractions(dist: StepDistribution, n: int, replicas: int, rng: RngSpec,
                    threads: int | None = None) -> np.ndarray:
    """R_n / n per replica (distinct sites among S_0..S_{n-1})."""
    def one(_r, gen):
        tr = simulate_sites(dist, n - 1, gen)
        return len(np.unique(tr.ids)) / n

    return np.array(map_replicas(one, rng, replicas, threads))


def gamma_estimate_range(group: GroupDescriptor, dist: StepDistribution, n: int, replicas: int,
                         rng: RngSpec, threads: int | None = None) -> EscapeProbability:
    if n < 1 or replicas < 1:
        raise TheoryError("n and replicas must be >= 1")
    if dist.group != group:
        raise TheoryError("distribution belongs to a different group")
    return gamma_from_range_values(range_fractions(dist, n, replicas, rng, threads), n)


def gamma_from_range_values(values, n: int) -> EscapeProbability:
    st = AggregateStats.from_values(values)
    return EscapeProbability(min(st.mean, 1.0), "range", n, st.count, st.ci_halfwidth)


@dataclass
class ReturnTimeStats:
    """Return times tau_1 < tau_2 < ... per replica, censored at ``horizon``.

    ``times[r, j-1]`` is tau_j for replica r, or ``horizon`` when censored
    (``censored[r, j-1]`` is then True).
    """

    horizon: int
    times: np.ndarray
    censored: np.ndarray

    @property
    def replicas(self) -> int:
        return self.times.shape[0]

    def return_fraction(self, j: int = 1) -> float:
        return float(np.mean(~self.censored[:, j - 1]))

    def conditional_mean(self, j: int = 1, horizon: int | None = None) -> AggregateStats:
        """Sample mean of tau_j over replicas where tau_j <= horizon."""
        h = self.horizon if horizon is None else horizon
        col = self.times[:, j - 1]
        ok = (~self.censored[:, j - 1]) & (col <= h)
        if not ok.any():
            raise TheoryError(f"no observed return number {j} within horizon {h}")
        return AggregateStats.from_values(col[ok])

    @property
    def conditional_mean_a(self) -> float:
        return self.conditional_mean(1).mean

    def a_stabilized(self, rel_ci: float = 0.05) -> tuple[bool, str]:
        """Heuristic check that the truncated estimate of a has settled.

        Requires a relative CI below ``rel_ci`` and agreement between the
        estimates at the full horizon and at half of it.  Heavy return-time
        tails (e.g. on Z^3) make the half-horizon estimate lag and fail this.
        """
        full = self.conditional_mean(1)
        try:
            half = self.conditional_mean(1, self.horizon // 2)
        except TheoryError:
            return False, "no returns within half the horizon"
        if full.ci_halfwidth > rel_ci * full.mean:
            return False, f"relative CI {full.ci_halfwidth / full.mean:.3g} above {rel_ci}"
        gap = abs(full.mean - half.mean)
        if gap > full.ci_halfwidth + 0.01 * full.mean:
            return False, (f"estimate still moving with the horizon (a={full.mean:.4g} at {self.horizon}, "
                           f"{half.mean:.4g} at {self.horizon // 2}); heavy tail suspected")
        return True, "stable"


def return_times(group: GroupDescriptor, dist: StepDistribution, horizon: int, j_max: int,
                 rng: RngSpec, replicas: int = 1, threads: int | None = None) -> ReturnTimeStats:
    if horizon < 1 or j_max < 1:
        raise TheoryError("horizon and j_max must be >= 1")
    if dist.group != group:
        raise TheoryError("distribution belongs to a different group")

    def one(_r, gen):
        return _walk_returns(dist, horizon, j_max, gen)

    rows = map_replicas(one, rng.substream(RETURN_STREAM), replicas, threads)
    times = np.full((replicas, j_max), horizon, dtype=np.int64)
    censored = np.ones((replicas, j_max), dtype=bool)
    for r, t in enumerate(rows):
        times[r, : len(t)] = t
        censored[r, : len(t)] = False
    return ReturnTimeStats(horizon, times, censored)


@dataclass
class BoundRow:
    j: int
    lhs: AggregateStats           # R_n^(j)
    rhs_mean: float               # gamma^2 E max(n - tau_{j-1}, 0)
    rhs_stderr: float
    holds: bool
    tau_gap_mean: float           # E max(n - tau_{j-1}, 0)
    tau_gap_stderr: float
    secondary_target: float | None  # (n/2)(1-gamma)^(j-1) when j <= 1 + n/(2a)
    secondary_holds: bool | None

    def as_dict(self) -> dict:
        return {"j": self.j, "lhs_mean": self.lhs.mean, "lhs_stderr": self.lhs.stderr,
                "rhs_mean": self.rhs_mean, "rhs_stderr": self.rhs_stderr, "holds": self.holds,
                "tau_gap_mean": self.tau_gap_mean, "tau_gap_stderr": self.tau_gap_stderr,
                "secondary_target": self.secondary_target, "secondary_holds": self.secondary_holds}


@dataclass
class BoundReport:
    n: int
    replicas: int
    gamma: EscapeProbability
    a: float
    rows: list[BoundRow] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.rows) and all(
            r.secondary_holds for r in self.rows if r.secondary_holds is not None)


def lemma3_samples(dist: StepDistribution, n: int, j_max: int, replicas: int, rng: RngSpec,
                   threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per replica: R_n^(j) and max(n - tau_{j-1}, 0) for j = 1..j_max, from one walk.

    Only S_0..S_{n-1} matter: a return at time >= n contributes 0 to both sides.
    """
    def one(_r, gen):
        tr = simulate_sites(dist, n - 1, gen)
        counts = np.bincount(tr.ids)
        mult = np.bincount(counts[counts > 0], minlength=j_max + 1)
        rj = mult[1 : j_max + 1]
        ret = np.flatnonzero(tr.ids[1:] == tr.origin) + 1
        tau = np.zeros(j_max, dtype=np.int64)  # tau_0 .. tau_{j_max-1}
        gaps = np.zeros(j_max, dtype=np.int64)
        gaps[0] = n
        for j in range(1, j_max):
            if len(ret) >= j:
                tau[j] = ret[j - 1]
                gaps[j] = max(n - tau[j], 0)
        return rj, gaps

    out = map_replicas(one, rng, replicas, threads)
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def lemma3_check(group: GroupDescriptor, dist: StepDistribution, n: int, j_max: int, replicas: int,
                 gamma: EscapeProbability | None, rng: RngSpec, a: float | None = None,
                 threads: int | None = None, sigmas: float = 3.0) -> BoundReport:
    """Monte Carlo check of E R_n^(j) >= gamma^2 E max(n - tau_{j-1}, 0).

    The inequality is accepted when lhs >= rhs - sigmas * sqrt(se_lhs^2 + se_rhs^2).
    With ``a`` (the conditional mean return time) the weaker bound
    E max(n - tau_{j-1}, 0) >= (n/2)(1-gamma)^(j-1) is also checked for
    j <= 1 + n/(2a).
    """
    if gamma is None:
        raise TheoryError("lemma3_check needs an escape probability")
    if n < 1 or j_max < 1 or replicas < 2:
        raise TheoryError("need n >= 1, j_max >= 1 and at least 2 replicas")
    rj, gaps = lemma3_samples(dist, n, j_max, replicas, rng, threads)
    g2 = gamma.gamma ** 2
    rep = BoundReport(n, replicas, gamma, a if a is not None else math.nan)
    for j in range(1, j_max + 1):
        lhs = AggregateStats.from_values(rj[:, j - 1])
        gap = AggregateStats.from_values(gaps[:, j - 1])
        rhs_mean, rhs_se = g2 * gap.mean, g2 * gap.stderr
        ok = lhs.mean >= rhs_mean - sigmas * math.hypot(lhs.stderr, rhs_se)
        target = sec_ok = None
        if a is not None and j <= 1 + n / (2 * a):
            target = (n / 2) * (1 - gamma.gamma) ** (j - 1)
            sec_ok = gap.mean >= target - sigmas * gap.stderr
        rep.rows.append(BoundRow(j, lhs, rhs_mean, rhs_se, ok, gap.mean, gap.stderr, target, sec_ok))
    return rep


def counterexample_lower_bound(gamma: float, a: float) -> float:
    """gamma^2 / (4 a (1 - gamma)): asymptotic floor of the tail second moment."""
    return gamma * gamma / (4 * a * (1 - gamma))


__all__ = [
    "EscapeProbability", "ReturnTimeStats", "BoundReport", "BoundRow", "TheoryError", "Z95",
    "gamma_exact", "gamma_estimate_escape", "gamma_estimate_range", "gamma_from_range_values",
    "return_times", "lemma3_check", "lemma3_samples", "escape_curve", "first_return_times",
    "range_fractions", "counterexample_lower_bound",
]
