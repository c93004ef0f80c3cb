"""Run configuration: a flat TOML file plus ``--set key=value`` overrides.

Example::

    group = "free"          # or "lattice"
    rank = 2                # free-group rank (dim = <d> for lattices)
    functional = "range"    # range | level:<j> | power:<a> | hshift:<j> | geomhalf | table:<v1,...>
    steps = 100000
    checkpoints = [1000, 10000, 100000]
    replicas = 200
    seed = 1
    gamma = "exact"         # exact | escape:<N> | range

    [step_weights]          # optional; default is the simple random walk
    a = 1
    A = 1
    b = 2
    B = 2

Lattice increments are written as tuples: ``"(1,0,0)" = 1``.
"""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Iterable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .experiments import ExperimentConfig
from .functionals import parse_functional
from .groups import GroupError, make_group
from .walk import from_weights, standard_srw


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "group": "free",
    "dim": 3,
    "rank": 2,
    "functional": "range",
    "steps": 1000,
    "checkpoints": None,
    "replicas": 10,
    "seed": 0,
    "gamma": "exact",
    "tolerance": 0.01,
    "k_max": 5,
    "j_max": 4,
    "p_list": [10],
    "window": 500,
    "offsets": [0, 100, 1000],
    "shift_j": 2,
    "horizon": 10_000,
    "return_replicas": 10_000,
    "escape_replicas": 10_000,
    "identity_j_max": 10,
    "step_weights": None,
}


def _parse_value(raw: str) -> Any:
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def apply_override(data: dict, item: str) -> None:
    key, sep, raw = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    value = _parse_value(raw.strip())
    if key.startswith("step_weights."):
        table = data.get("step_weights") or {}
        table[key.split(".", 1)[1].strip().strip("\"'")] = value
        data["step_weights"] = table
    else:
        data[key] = value


def load(path: str | Path | None = None, overrides: Iterable[str] = ()) -> dict:
    """Merge defaults, file contents and overrides; reject unknown keys."""
    data: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} does not exist")
        try:
            data = tomllib.loads(p.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from None
    for item in overrides:
        apply_override(data, item)
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}")
    merged = dict(DEFAULTS)
    merged.update(data)
    return merged


def _int(data: dict, key: str, lo: int, hi: int | None = None) -> int:
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    if v < lo or (hi is not None and v > hi):
        bound = f"{key} >= {lo}" if hi is None else f"{lo} <= {key} <= {hi}"
        raise ConfigError(f"invalid {key}={v}: requires {bound}")
    return v


def _int_list(data: dict, key: str, lo: int) -> tuple[int, ...]:
    v = data[key]
    if isinstance(v, int) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{key} must be a list of integers, got {v!r}")
    if any(x < lo for x in v):
        raise ConfigError(f"invalid {key}: every entry must be >= {lo}")
    return tuple(v)


def build(data: dict, threads: int | None = None) -> ExperimentConfig:
    """Validate a merged config dict and build the experiment description."""
    kind = data["group"]
    size = _int(data, "dim" if kind == "lattice" else "rank", 1)
    try:
        group = make_group(kind, size)
    except GroupError as exc:
        raise ConfigError(str(exc)) from None
    weights = data["step_weights"]
    try:
        if weights:
            if not isinstance(weights, dict):
                raise ConfigError("step_weights must be a table")
            dist = from_weights(group, weights)
        else:
            dist = standard_srw(group)
    except (GroupError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid step_weights: {exc}") from None

    funcs = data["functional"]
    funcs = [funcs] if isinstance(funcs, str) else funcs
    if not isinstance(funcs, list) or not funcs:
        raise ConfigError("functional must be a string or a nonempty list of strings")
    try:
        functionals = tuple(parse_functional(str(f)) for f in funcs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    steps = _int(data, "steps", 1)
    if data["checkpoints"] is None:
        checkpoints = (steps,)
    else:
        checkpoints = tuple(sorted(set(_int_list(data, "checkpoints", 1))))
        if "steps" in data and steps > checkpoints[-1]:
            checkpoints = checkpoints + (steps,)
    _int(data, "identity_j_max", 1)
    gamma = data["gamma"]
    if not isinstance(gamma, str) or not (gamma in ("exact", "range") or _escape_policy(gamma)):
        raise ConfigError(f"invalid gamma={gamma!r}: expected exact | escape:<N> | range")
    tol = data["tolerance"]
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not tol > 0:
        raise ConfigError(f"invalid tolerance={tol!r}: requires tolerance > 0")
    try:
        return ExperimentConfig(
            group=group, dist=dist, functionals=functionals, checkpoints=checkpoints,
            replicas=_int(data, "replicas", 2), seed=_int(data, "seed", 0, 2**64 - 1), gamma=gamma,
            tolerance=float(tol), k_max=_int(data, "k_max", 1), j_max=_int(data, "j_max", 1),
            p_list=_int_list(data, "p_list", 1), window=_int(data, "window", 1),
            offsets=_int_list(data, "offsets", 0), shift_j=_int(data, "shift_j", 1),
            horizon=_int(data, "horizon", 2), return_replicas=_int(data, "return_replicas", 2),
            escape_replicas=_int(data, "escape_replicas", 1), threads=threads,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _escape_policy(text: str) -> bool:
    name, _, arg = text.partition(":")
    return name == "escape" and arg.isdigit() and int(arg) >= 1


def parse_config(path: str | Path | None = None, overrides: Iterable[str] = (),
                 threads: int | None = None) -> tuple[ExperimentConfig, dict]:
    """Return the validated config and the fully materialized echo of its keys."""
    data = load(path, overrides)
    cfg = build(data, threads)
    echo = dict(data)
    echo["checkpoints"] = list(cfg.checkpoints)
    echo["steps"] = cfg.steps
    return cfg, echo
