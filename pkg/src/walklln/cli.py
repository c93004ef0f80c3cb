"""Command line entry point.

    walklln <subcommand> [--config FILE] [--set key=value ...] [--seed N] [--out DIR] [--no-plots]

Exit status: 0 when every verdict passes, 2 when a verdict fails, 1 on a
usage, configuration or condition error.  On 0 and 2 the output directory
holds ``<subcommand>.csv``, ``<subcommand>.json``, an optional PNG figure and
``manifest.json``.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, parse_config
from .experiments import (ExperimentConfig, ExperimentError, Report, Row, estimate_a, functional_values,
                          replica_histograms, resolve_gamma, run_counterexample, run_identity_suite,
                          run_l2, run_lln, run_multirange, run_shift_invariance)
from .functionals import ConditionError
from .localstats import MultiplicityHistogram, functional_from_histogram, snapshot, snapshot_csv
from .parallel import thread_count
from .report import MANIFEST_SCHEMA, dumps, rows_csv, summary, write_text
from .stats import AggregateStats
from .theory import TheoryError, lemma3_check

SUBCOMMANDS = ("simulate", "gamma", "lln", "l2", "multirange", "counterexample", "identities", "shift",
               "lemma3")
SEED_SCHEME = "Philox keyed by SeedSequence(master_seed, spawn_key=(replica,) or (replica, stream))"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="walklln", description="Local-time limit laws for transient random walks.")
    p.add_argument("--version", action="version", version=f"walklln {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND",
                           parser_class=_Parser)
    helps = {
        "simulate": "walk and export local-time snapshots",
        "gamma": "resolve the escape probability",
        "lln": "G_n(f)/n against its limit",
        "l2": "mean-square deviation and its trend in n",
        "multirange": "R_n^(k)/n and G_n(h_j)/n laws",
        "counterexample": "tail second moment for f(j) = (1-gamma)^(-j/2)",
        "identities": "exact visit-count identities",
        "shift": "window-shift invariance of G_{m,m+k}(h_j)",
        "lemma3": "lower bound on E R_n^(j) through return times",
    }
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, help=helps[name])
        s.add_argument("--config", type=Path)
        s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", type=Path, default=Path("walklln-out"))
        s.add_argument("--no-plots", action="store_true")
    return p


# -- subcommand bodies -------------------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig, echo: dict, out: Path) -> tuple[Report, list[Path]]:
    hists = replica_histograms(cfg)
    needs_gamma = any(f.family == "geomhalf" and f.param is None for f in cfg.functionals)
    gamma, note = resolve_gamma(cfg, hists) if needs_gamma else (None, "not needed")
    funcs = [f.resolve(gamma.gamma) if gamma else f for f in cfg.functionals]
    rep = Report("simulate", gamma, note)
    snaps = []
    for r, h in enumerate(hists):
        for i, n in enumerate(cfg.checkpoints):
            mh = MultiplicityHistogram.from_array(h[i])
            snaps.append((r, snapshot(n, mh, {f.ident: functional_from_histogram(f, mh) for f in funcs})))
    n = np.asarray(cfg.checkpoints, dtype=float)
    ranges = np.array([h[:, 1:].sum(axis=1) for h in hists]) / n
    for i, ck in enumerate(cfg.checkpoints):
        rep.rows.append(Row(ck, "R/n", AggregateStats.from_values(ranges[:, i])))
    for f in funcs:
        vals = functional_values(f, hists, cfg.checkpoints)
        for i, ck in enumerate(cfg.checkpoints):
            rep.rows.append(Row(ck, f"G/n[{f.ident}]", AggregateStats.from_values(vals[:, i])))
    extra = [write_text(out / "snapshots.json", dumps([{"replica": r, **s} for r, s in snaps])),
             write_text(out / "snapshots.csv", snapshot_csv(snaps))]
    return rep, extra


def cmd_gamma(cfg: ExperimentConfig, echo: dict, out: Path) -> tuple[Report, list[Path]]:
    hists = replica_histograms(cfg)
    gamma, note = resolve_gamma(cfg, hists)
    rep = Report("gamma", gamma, note)
    target = None if gamma.source == "range" else gamma.gamma
    n = np.asarray(cfg.checkpoints, dtype=float)
    ranges = np.array([h[:, 1:].sum(axis=1) for h in hists]) / n
    for i, ck in enumerate(cfg.checkpoints):
        rep.rows.append(Row(ck, "R/n", AggregateStats.from_values(ranges[:, i]), target))
    if gamma.exact:
        rep.verdicts["range_consistent"] = rep.rows[-1].abs_gap <= cfg.tolerance
    return rep, []


def cmd_lemma3(cfg: ExperimentConfig, echo: dict, out: Path) -> tuple[Report, list[Path]]:
    gamma, note = resolve_gamma(cfg)
    a, a_stats, (stable, why) = estimate_a(cfg)
    br = lemma3_check(cfg.group, cfg.dist, cfg.steps, cfg.j_max, cfg.replicas, gamma, cfg.rng,
                      a=a if stable else None, threads=cfg.threads)
    rep = Report("lemma3", gamma, note)
    for row in br.rows:
        rep.rows.append(Row(cfg.steps, f"R{row.j}", row.lhs, row.rhs_mean))
        rep.verdicts[f"bound[j={row.j}]"] = row.holds
        if row.secondary_holds is not None:
            rep.verdicts[f"secondary[j={row.j}]"] = row.secondary_holds
    rep.details.update(a=a, a_ci_halfwidth=a_stats.ci_halfwidth, a_note=why,
                       bound_rows=[r.as_dict() for r in br.rows])
    return rep, []


def _wrap(fn):
    return lambda cfg, echo, out: (fn(cfg), [])


def _lln(cfg):
    for f in cfg.functionals:
        if f.family == "geomhalf":
            raise ConditionError("geomhalf is the mean-square counterexample; the lln harness does not "
                                 "accept it. Use the 'counterexample' subcommand for this functional.")
    return run_lln(cfg)


COMMANDS = {
    "simulate": cmd_simulate,
    "gamma": cmd_gamma,
    "lln": _wrap(_lln),
    "l2": _wrap(run_l2),
    "multirange": _wrap(run_multirange),
    "counterexample": _wrap(run_counterexample),
    "identities": lambda cfg, echo, out: (run_identity_suite(cfg, echo["identity_j_max"]), []),
    "shift": _wrap(run_shift_invariance),
    "lemma3": cmd_lemma3,
}


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def dispatch(subcommand: str, cfg: ExperimentConfig, echo: dict, out: Path, plots: bool = True) -> int:
    """Run one subcommand, write its outputs and manifest, return the exit code."""
    if subcommand not in COMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    started, t0 = _now(), time.perf_counter()
    report, extra = COMMANDS[subcommand](cfg, echo, out)
    elapsed = time.perf_counter() - t0
    outputs = [write_text(out / f"{subcommand}.csv", rows_csv(report.rows)),
               write_text(out / f"{subcommand}.json", dumps(summary(report, subcommand, echo)))]
    outputs += extra
    if plots:
        from .plots import render

        fig = render(report, out / f"{subcommand}.png")
        if fig is not None:
            outputs.append(fig)
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "artifact_version": __version__,
        "subcommand": subcommand,
        "config": echo,
        "gamma": None if report.gamma is None else {**report.gamma.as_dict(), "note": report.gamma_note},
        "seed_record": {"master_seed": cfg.seed, "replicas": cfg.replicas, "scheme": SEED_SCHEME},
        "outputs": [p.name for p in outputs],
        "started": started,
        "finished": _now(),
        "timings": {"wall_seconds": elapsed},
        "threads": thread_count(cfg.threads),
        "passed": report.passed,
    }
    write_text(out / "manifest.json", dumps(manifest))
    return 0 if report.passed else 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    try:
        cfg, echo = parse_config(args.config, overrides)
        code = dispatch(args.subcommand, cfg, echo, args.out, plots=not args.no_plots)
    except (ConfigError, ConditionError, TheoryError, ExperimentError, ValueError) as exc:
        print(f"walklln {args.subcommand}: error: {exc}", file=sys.stderr)
        return 1
    verdict = "all verdicts pass" if code == 0 else "verdict failure"
    print(f"walklln {args.subcommand}: {verdict}; outputs in {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
