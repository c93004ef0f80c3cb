"""Replicated Monte Carlo experiments against the local-time limit laws.

Each replica runs one walk; statistics at every checkpoint n are snapshots of
that same walk (first n positions).  Per-replica results are collected in
replica order and reduced in that order, so reports do not depend on the
number of worker threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .functionals import (ConditionError, LocalFunctional, check_condition_l1, check_condition_l2,
                          geometric_half, h_shift, power, tail_limit, theoretical_limit, truncate)
from .groups import GroupDescriptor
from .localstats import (IdentityReport, MultiplicityHistogram, table_from_keys, snapshot_histograms,
                         verify_identities)
from .parallel import map_replicas
from .stats import AggregateStats, loglog_slope
from .theory import (EscapeProbability, TheoryError, counterexample_lower_bound, gamma_estimate_escape,
                     gamma_exact, gamma_from_range_values, return_times)
from .walk import RngSpec, StepDistribution, simulate_sites


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    group: GroupDescriptor
    dist: StepDistribution
    functionals: tuple[LocalFunctional, ...]
    checkpoints: tuple[int, ...]
    replicas: int
    seed: int = 0
    gamma: str = "exact"          # "exact" | "escape:<N>" | "range"
    tolerance: float = 0.01       # verdict bound on |mean - target| at the last checkpoint
    k_max: int = 5
    j_max: int = 4
    p_list: tuple[int, ...] = (10,)
    window: int = 500
    offsets: tuple[int, ...] = (0, 100, 1000)
    shift_j: int = 2
    horizon: int = 10_000         # return-time horizon for estimating a
    return_replicas: int = 10_000
    escape_replicas: int = 10_000
    threads: int | None = None

    def __post_init__(self):
        cks = self.checkpoints
        if not cks or any(b <= a for a, b in zip(cks, cks[1:])) or cks[0] < 1:
            raise ValueError("checkpoints must be a strictly increasing list of positive integers")
        if self.replicas < 2:
            raise ValueError("replicas >= 2 (variance needs at least two replicas)")
        if self.dist.group != self.group:
            raise ValueError("step distribution belongs to a different group")

    @property
    def steps(self) -> int:
        return self.checkpoints[-1]

    @property
    def rng(self) -> RngSpec:
        return RngSpec(self.seed)


# -- shared machinery ---------------------------------------------------------------------------


def replica_histograms(config: ExperimentConfig) -> list[np.ndarray]:
    """Dense R^(k) rows (one per checkpoint) for every replica."""
    cks = config.checkpoints

    def one(_r, gen):
        tr = simulate_sites(config.dist, cks[-1] - 1, gen)
        return snapshot_histograms(tr.ids, tr.n_sites, cks)

    return map_replicas(one, config.rng, config.replicas, config.threads)


def functional_values(f: LocalFunctional, hists: list[np.ndarray], checkpoints) -> np.ndarray:
    """G_n(f)/n, shape (replicas, checkpoints)."""
    width = max(h.shape[1] for h in hists)
    coef = np.array([f.evaluate(k) for k in range(width)])
    out = np.empty((len(hists), len(checkpoints)))
    n = np.asarray(checkpoints, dtype=float)
    for r, h in enumerate(hists):
        if f.is_integer_valued:
            ints = [f.evaluate_int(k) for k in range(h.shape[1])]
            out[r] = [sum(int(c) * v for c, v in zip(ints, row) if v) for row in h]
            out[r] /= n
        else:
            out[r] = [math.fsum(coef[: h.shape[1]] * row) for row in h]
            out[r] /= n
    return out


def level_values(k: int, hists: list[np.ndarray], checkpoints) -> np.ndarray:
    n = np.asarray(checkpoints, dtype=float)
    return np.array([(h[:, k] if k < h.shape[1] else np.zeros(len(n))) / n for h in hists])


def resolve_gamma(config: ExperimentConfig, hists: list[np.ndarray] | None = None) -> tuple[EscapeProbability, str]:
    """Escape probability per the config policy, plus a note on how it was obtained."""
    policy = config.gamma
    if policy == "exact":
        g = gamma_exact(config.group, config.dist)
        if g is not None:
            return g, "closed form for the simple random walk on a free group"
        policy = "range"
        note = "no closed form for this walk; fell back to the range estimator"
    else:
        note = ""
    if policy == "range":
        if hists is None:
            hists = replica_histograms(config)
        n = config.checkpoints[-1]
        vals = [int(h[-1, 1:].sum()) / n for h in hists]
        return gamma_from_range_values(vals, n), note or "mean R_n/n over the experiment's own replicas"
    if policy.startswith("escape:"):
        horizon = int(policy.split(":", 1)[1])
        g = gamma_estimate_escape(config.group, config.dist, horizon, config.escape_replicas,
                                  config.rng, config.threads)
        return g, "escape fraction within the horizon (over-estimates gamma)"
    raise ExperimentError(f"unknown gamma policy {config.gamma!r}")


@dataclass
class Row:
    """One CSV line: a statistic at a checkpoint."""

    checkpoint_n: int
    statistic: str
    stats: AggregateStats
    theory_target: float | None = None

    @property
    def abs_gap(self) -> float | None:
        if self.theory_target is None:
            return None
        return abs(self.stats.mean - self.theory_target)


@dataclass
class Report:
    kind: str
    gamma: EscapeProbability | None
    gamma_note: str
    rows: list[Row] = field(default_factory=list)
    verdicts: dict[str, bool] = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def find(self, statistic: str, n: int | None = None) -> Row:
        for r in self.rows:
            if r.statistic == statistic and (n is None or r.checkpoint_n == n):
                return r
        raise KeyError((statistic, n))


def _check_gate(f: LocalFunctional, gamma: float, which: str) -> None:
    if gamma >= 1.0:
        return  # no returns: every series is a single term
    verdict = check_condition_l1(f, gamma) if which == "l1" else check_condition_l2(f, gamma)
    if not verdict.holds:
        hint = " Use the 'counterexample' subcommand for this functional." if f.family == "geomhalf" else ""
        raise ConditionError(f"{f.ident} fails the {which.upper()} summability condition "
                             f"({verdict.status}: {verdict.certificate}).{hint}")


def _gamma_gate(config: ExperimentConfig, which: str) -> None:
    """Refuse early when the condition fails for a gamma known without simulating."""
    g = gamma_exact(config.group, config.dist)
    for f in config.functionals:
        if f.family == "geomhalf" and f.param is None:
            # binds to the walk's own gamma; L2 fails for every gamma, L1 always holds
            if which == "l2":
                raise ConditionError("geomhalf fails the L2 summability condition (summand = 1/j, harmonic "
                                     "divergence). Use the 'counterexample' subcommand for this functional.")
            if g is None:
                continue
        if g is not None:
            _check_gate(f.resolve(g.gamma), g.gamma, which)


# -- operations ---------------------------------------------------------------------------------


def run_lln(config: ExperimentConfig) -> Report:
    """Mean of G_n(f)/n across replicas against the limit series, per checkpoint.

    The almost-sure proxy is the per-replica deviation sup_{n' >= n} |G_n'/n' - target|
    over the remaining checkpoints.
    """
    _gamma_gate(config, "l1")
    hists = replica_histograms(config)
    gamma, note = resolve_gamma(config, hists)
    rep = Report("lln", gamma, note)
    cks = config.checkpoints
    for f0 in config.functionals:
        f = f0.resolve(gamma.gamma)
        _check_gate(f, gamma.gamma, "l1")
        target = theoretical_limit(f, gamma.gamma)
        vals = functional_values(f, hists, cks)
        dev = np.abs(vals - target)
        tail_dev = np.maximum.accumulate(dev[:, ::-1], axis=1)[:, ::-1]
        for i, n in enumerate(cks):
            rep.rows.append(Row(n, f"G/n[{f.ident}]", AggregateStats.from_values(vals[:, i]), target))
            rep.rows.append(Row(n, f"maxdev_after_n[{f.ident}]", AggregateStats.from_values(tail_dev[:, i])))
        final = rep.find(f"G/n[{f.ident}]", cks[-1])
        rep.verdicts[f"gap[{f.ident}]"] = final.abs_gap <= config.tolerance
    return rep


def run_multirange(config: ExperimentConfig, k_max: int | None = None, j_max: int | None = None) -> Report:
    """R_n^(k)/n against gamma^2 (1-gamma)^(k-1) and G_n(h_j)/n against (1-gamma)^(j-1)."""
    k_max = config.k_max if k_max is None else k_max
    j_max = config.j_max if j_max is None else j_max
    if k_max < 1:
        raise ValueError("k_max >= 1")
    hists = replica_histograms(config)
    gamma, note = resolve_gamma(config, hists)
    g = gamma.gamma
    rep = Report("multirange", gamma, note)
    cks = config.checkpoints
    last = len(cks) - 1
    for k in range(1, k_max + 1):
        vals = level_values(k, hists, cks)
        target = g * g * (1 - g) ** (k - 1)
        for i, n in enumerate(cks):
            rep.rows.append(Row(n, f"R{k}/n", AggregateStats.from_values(vals[:, i]), target))
        rep.verdicts[f"gap[R{k}/n]"] = rep.rows[-1].abs_gap <= config.tolerance
    for j in range(1, j_max + 1):
        vals = functional_values(h_shift(j), hists, cks)
        target = (1 - g) ** (j - 1)
        for i, n in enumerate(cks):
            rep.rows.append(Row(n, f"G/n[hshift:{j}]", AggregateStats.from_values(vals[:, i]), target))
        final = rep.rows[-1].stats
        rep.verdicts[f"gap[hshift:{j}]"] = rep.rows[-1].abs_gap <= config.tolerance
        # the expected value approaches its limit from below; it may not overshoot beyond noise
        sigma = math.sqrt(final.variance / final.count)
        rep.verdicts[f"no_overshoot[hshift:{j}]"] = final.mean <= target + 3 * sigma + 1e-12
    rep.details["checkpoint_index"] = last
    return rep


def run_l2(config: ExperimentConfig) -> Report:
    """Empirical second moment of G_n(f)/n - target per checkpoint, with its trend in n."""
    _gamma_gate(config, "l2")
    hists = replica_histograms(config)
    gamma, note = resolve_gamma(config, hists)
    rep = Report("l2", gamma, note)
    cks = config.checkpoints
    for f0 in config.functionals:
        f = f0.resolve(gamma.gamma)
        _check_gate(f, gamma.gamma, "l2")
        target = theoretical_limit(f, gamma.gamma)
        sq = (functional_values(f, hists, cks) - target) ** 2
        moments = []
        for i, n in enumerate(cks):
            st = AggregateStats.from_values(sq[:, i])
            rep.rows.append(Row(n, f"sqdev[{f.ident}]", st, 0.0))
            moments.append(st.mean)
        rep.details[f"trend[{f.ident}]"] = trend = _trend(cks, moments)
        rep.verdicts[f"decreasing[{f.ident}]"] = trend["verdict"] in ("decreasing", "identically zero",
                                                                      "insufficient data")
    return rep


def _trend(cks, moments) -> dict:
    if len(cks) < 2:
        return {"verdict": "insufficient data", "slope": None}
    if all(m == 0.0 for m in moments):
        return {"verdict": "identically zero", "slope": None}
    if any(m <= 0 for m in moments):
        ok = moments[-1] < moments[0]
        return {"verdict": "decreasing" if ok else "not decreasing", "slope": None}
    slope = loglog_slope(cks, moments)
    return {"verdict": "decreasing" if slope < 0 else "not decreasing", "slope": slope}


def estimate_a(config: ExperimentConfig) -> tuple[float, AggregateStats, tuple[bool, str]]:
    rt = return_times(config.group, config.dist, config.horizon, 1, config.rng,
                      replicas=config.return_replicas, threads=config.threads)
    st = rt.conditional_mean(1)
    return st.mean, st, rt.a_stabilized()


def run_counterexample(config: ExperimentConfig, p_list=None) -> Report:
    """Tail second moment E[(G_n(f) - G_n(f^(p)))^2]/n^2 for f(j) = (1-gamma)^(-j/2).

    (i) target if the mean-square limit existed: (gamma^2 sum_{j>p} f(j)(1-gamma)^(j-1))^2;
    (ii) asymptotic floor gamma^2/(4a(1-gamma)), used at half strength for the verdict.
    A power:1 control under the same histograms must show tail moments shrinking in p.
    """
    p_list = tuple(sorted(config.p_list if p_list is None else p_list))
    if not p_list or p_list[0] < 1:
        raise ValueError("p_list needs positive truncation levels")
    hists = replica_histograms(config)
    gamma, note = resolve_gamma(config, hists)
    g = gamma.gamma
    if not 0 < g < 1:
        raise ExperimentError(f"counterexample needs 0 < gamma < 1, got {g}")
    f = geometric_half(g)
    l1, l2 = check_condition_l1(f, g), check_condition_l2(f, g)
    a, a_stats, (stable, why) = estimate_a(config)
    if not stable:
        raise TheoryError(f"conditional mean return time not stabilized: {why}")
    rep = Report("counterexample", gamma, note)
    rep.details.update(condition_l1=l1.status, condition_l1_certificate=l1.certificate,
                       condition_l2=l2.status, condition_l2_certificate=l2.certificate,
                       a=a, a_ci_halfwidth=a_stats.ci_halfwidth, a_note=why)
    floor = counterexample_lower_bound(g, a)
    floor_half = floor / 2
    rep.details.update(lower_bound=floor, lower_bound_discounted=floor_half)
    cks = config.checkpoints
    full_vals = functional_values(f, hists, cks)
    for p in p_list:
        tail_target = tail_limit(f, g, p) ** 2
        sq = (full_vals - functional_values(truncate(f, p), hists, cks)) ** 2
        ok_all = True
        for i, n in enumerate(cks):
            st = AggregateStats.from_values(sq[:, i])
            rep.rows.append(Row(n, f"tail_sq[p={p}]", st, tail_target))
            ok_all &= st.mean >= floor_half
        rep.details[f"vanishing_target[p={p}]"] = tail_target
        if p == p_list[-1]:
            rep.verdicts["floor_exceeds_vanishing_target"] = floor_half > tail_target
            rep.verdicts["moment_respects_floor"] = ok_all
    rep.verdicts["l2_condition_fails"] = l2.status == "fails"
    rep.verdicts["l1_condition_holds"] = l1.holds

    control = power(1)
    ctrl_ps = tuple(sorted(set((1, 2, 5) + p_list)))
    ctrl_full = functional_values(control, hists, cks)
    ctrl_last = []
    for p in ctrl_ps:
        sq = (ctrl_full - functional_values(truncate(control, p), hists, cks)) ** 2
        for i, n in enumerate(cks):
            rep.rows.append(Row(n, f"control_tail_sq[p={p}]", AggregateStats.from_values(sq[:, i])))
        ctrl_last.append(float(np.mean(sq[:, -1])))
    rep.details["control_p"] = list(ctrl_ps)
    rep.details["control_tail_sq_last"] = ctrl_last
    shrinking = all(b <= a for a, b in zip(ctrl_last, ctrl_last[1:])) and ctrl_last[-1] < ctrl_last[0]
    rep.verdicts["control_shrinks_in_p"] = shrinking
    rep.details["divergence_witnessed"] = (rep.verdicts["floor_exceeds_vanishing_target"]
                                           and rep.verdicts["moment_respects_floor"])
    return rep


def run_shift_invariance(config: ExperimentConfig, k: int | None = None, offsets=None,
                         j: int | None = None) -> Report:
    """Means of G_{m,m+k}(h_j) across replicas must agree for every offset m."""
    k = config.window if k is None else k
    offsets = tuple(config.offsets if offsets is None else offsets)
    j = config.shift_j if j is None else j
    if k < 1 or not offsets or min(offsets) < 0:
        raise ValueError("window k >= 1 and offsets >= 0 required")
    total = max(offsets) + k

    def one(_r, gen):
        tr = simulate_sites(config.dist, total - 1, gen)
        out = []
        for m in offsets:
            c = np.bincount(tr.ids[m : m + k])
            out.append(int(np.maximum(c[c > 0] + 1 - j, 0).sum()))
        return out

    vals = np.array(map_replicas(one, config.rng, config.replicas, config.threads), dtype=float)
    rep = Report("shift", None, "not needed")
    stats = []
    for i, m in enumerate(offsets):
        st = AggregateStats.from_values(vals[:, i])
        stats.append(st)
        rep.rows.append(Row(m, f"G_window[hshift:{j},k={k}]", st))
    agree = True
    for a in range(len(stats)):
        for b in range(a + 1, len(stats)):
            diff = abs(stats[a].mean - stats[b].mean)
            agree &= diff <= 3 * math.hypot(stats[a].stderr, stats[b].stderr) + 1e-12
    rep.verdicts["offsets_agree"] = agree
    rep.details.update(window=k, offsets=list(offsets), j=j)
    return rep


def identity_trajectory(config: ExperimentConfig, replica: int, n: int, j_max: int) -> IdentityReport:
    """Exact identity checks on the first n positions of one replica's walk."""
    gen = config.rng.replica(replica).generator()
    tr = simulate_sites(config.dist, n - 1, gen)
    keys = tr.ids[:n].tolist()
    table = table_from_keys(keys)
    splits = {m for m in (n // 4, n // 2, 3 * n // 4) if 0 < m < n}
    if n > 1:
        splits.update(int(m) for m in gen.integers(1, n, size=3))
    rep = verify_identities(table, table.histogram, keys, j_max, sorted(splits))
    compiled = MultiplicityHistogram.from_array(snapshot_histograms(tr.ids, tr.n_sites, [n])[0])
    rep.record("compiled_histogram", compiled.r == table.histogram.r,
               "compiled accumulator disagrees with the streaming table")
    return rep


def run_identity_suite(config: ExperimentConfig, j_max: int = 10) -> Report:
    """Exact identities on every replica's trajectory of ``config.steps`` positions."""
    n = config.steps

    def one(r, _gen):
        return identity_trajectory(config, r, n, j_max)

    reports = map_replicas(one, config.rng, config.replicas, config.threads)
    rep = Report("identities", None, "not needed")
    names = ["visits_sum", "h_sum_formula", "h_range_formula", "superadditivity", "compiled_histogram"]
    failing = []
    for r, ir in enumerate(reports):
        if not ir.passed:
            failing.append({"replica": r, "seed": config.seed, "failures": ir.failures[:5]})
    for name in names:
        rep.verdicts[name] = all(ir.checks.get(name, True) for ir in reports)
    rep.details.update(trajectories=len(reports), n=n, j_max=j_max, failing=failing)
    return rep
