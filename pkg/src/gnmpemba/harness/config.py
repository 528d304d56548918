"""Run configuration: nested YAML sections with dotted-key overrides.

Canonical schema (all keys optional except ``command``)::

    command: quench            # scan | steady | quench | pme | qme | validate
    output: runs/quench        # output directory
    workers: 1                 # default from GNMPEMBA_WORKERS
    master_seed: 0
    seeds: [0, 1]              # steady-state seeds
    store: null                # steady-state cache directory
    model:    {L, J, mu, g, gamma, kBT}
    evolution: {dt, t_max, snapshot_stride, steady_tol, steady_window,
                rediag_mode, dissipator_mode, check_every, bound_tol}
    steady:   {strategy, t_max, rediag_mode}
    scan:     {mus: [...], gs: [...]}      # or points: [[mu, g], ...]
    quench:   {p_in: [mu, g], p_eq: [mu, g], t_max}
    pme:      {S, A, F, switch_policy, t_switch, threshold, horizon,
               checkpoint_every}
    qme:      {initial: [[mu, g], ...], target: [mu, g], threshold,
               check_thresholds, horizon}
    plot:     {input, kind}
"""

from __future__ import annotations

import copy
from dataclasses import fields
from pathlib import Path

import yaml

from ..evolution import EvolutionConfig
from ..model import ModelParams
from .sweep import default_workers

COMMANDS = ("scan", "steady", "quench", "pme", "qme", "validate", "plot")


class ConfigError(ValueError):
    """Invalid run configuration."""


def _fields(cls) -> dict:
    return {f.name: f.default for f in fields(cls)}


DEFAULTS: dict = {
    "command": None,
    "output": "runs/out",
    "workers": None,
    "master_seed": 0,
    "seeds": [0, 1],
    "store": None,
    "model": _fields(ModelParams),
    "evolution": {**{k: v for k, v in _fields(EvolutionConfig).items() if k not in ("stop_at_steady", "theta_stride")},
                  "t_max": 2500.0, "rediag_mode": "per-step"},
    "steady": {"strategy": "dynamics", "t_max": 20000.0, "rediag_mode": "per-step"},
    "scan": {"mus": [0.0, 0.5, 0.8], "gs": [0.9, 1.1], "points": None},
    "quench": {"p_in": [0.5, 1.1], "p_eq": [0.8, 1.1], "t_max": 2500.0},
    "pme": {"S": [0.5, 1.1], "A": [0.8, 1.1], "F": [0.5, 0.9], "switch_policy": "fixed",
            "t_switch": 960.0, "threshold": 1e-2, "horizon": 3000.0, "checkpoint_every": 1.0},
    "qme": {"initial": [[0.5, 1.1], [0.8, 1.1], [0.5, 1.3], [0.25, 1.1]], "target": [0.5, 0.9],
            "threshold": 1e-2, "check_thresholds": [3e-3, 1e-2, 3e-2], "horizon": 2000.0},
    "plot": {"input": None, "kind": "auto"},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        key = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{key!r} must be a section")
            out[k] = _merge(base[k], v, key + ".")
        else:
            out[k] = v
    return out


def parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value of {key!r}: {exc}") from exc
    return key.strip().split("."), value


def apply_overrides(cfg: dict, overrides) -> dict:
    cfg = copy.deepcopy(cfg)
    for text in overrides:
        keys, value = parse_override(text)
        node = cfg
        for k in keys[:-1]:
            if not isinstance(node.get(k), dict):
                raise ConfigError(f"unknown config section in {text!r}")
            node = node[k]
        if keys[-1] not in node:
            raise ConfigError(f"unknown config key {'.'.join(keys)!r}")
        node[keys[-1]] = value
    return cfg


def load_config(path=None, overrides=(), command: str | None = None) -> dict:
    """Defaults, then the YAML file, then ``key=value`` overrides; validated."""
    user: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            user = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    cfg = _merge(DEFAULTS, user)
    cfg = apply_overrides(cfg, overrides)
    if command is not None:
        cfg["command"] = command
    validate(cfg)
    if cfg["workers"] is None:
        cfg["workers"] = default_workers()
    return cfg


def _point(value, name) -> tuple[float, float]:
    try:
        mu, g = (float(x) for x in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a pair [mu, g], got {value!r}") from exc
    return mu, g


def _check_types(cfg: dict, defaults: dict, path: str = "") -> None:
    for k, d in defaults.items():
        v, key = cfg[k], f"{path}{k}"
        if isinstance(d, dict):
            _check_types(v, d, key + ".")
        elif v is None or d is None:
            continue
        elif isinstance(d, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"{key} must be true or false, got {v!r}")
        elif isinstance(d, int):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{key} must be an integer, got {v!r}")
        elif isinstance(d, float):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{key} must be a number, got {v!r}")
        elif isinstance(d, str):
            if not isinstance(v, str):
                raise ConfigError(f"{key} must be a string, got {v!r}")
        elif isinstance(d, list) and not isinstance(v, list):
            raise ConfigError(f"{key} must be a list, got {v!r}")


def validate(cfg: dict) -> None:
    _check_types(cfg, DEFAULTS)
    if cfg["command"] not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {cfg['command']!r}")
    try:
        model_params(cfg)
        evolution_config(cfg)
        steady_evolution_config(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["workers"] is not None and (not isinstance(cfg["workers"], int) or cfg["workers"] < 1):
        raise ConfigError("workers must be a positive integer")
    if not isinstance(cfg["seeds"], list) or not cfg["seeds"] or not all(isinstance(s, int) for s in cfg["seeds"]):
        raise ConfigError("seeds must be a non-empty list of integers")
    if cfg["steady"]["strategy"] not in ("dynamics", "fixed-point"):
        raise ConfigError("steady.strategy must be dynamics or fixed-point")
    cmd = cfg["command"]
    if cmd == "scan":
        sc = cfg["scan"]
        if sc["points"] is not None:
            [_point(p, "scan.points[]") for p in sc["points"]]
        elif not sc["mus"] or not sc["gs"]:
            raise ConfigError("scan needs non-empty mus and gs, or points")
    elif cmd == "quench":
        _point(cfg["quench"]["p_in"], "quench.p_in")
        _point(cfg["quench"]["p_eq"], "quench.p_eq")
    elif cmd == "pme":
        p = cfg["pme"]
        for k in "SAF":
            _point(p[k], f"pme.{k}")
        if p["switch_policy"] not in ("fixed", "min-distance", "plateau-start"):
            raise ConfigError("pme.switch_policy must be fixed, min-distance or plateau-start")
        if p["switch_policy"] == "fixed" and p["t_switch"] is None:
            raise ConfigError("pme.t_switch is required for the fixed policy")
        if not p["threshold"] > 0:
            raise ConfigError("pme.threshold must be positive")
    elif cmd == "qme":
        q = cfg["qme"]
        if len(q["initial"]) < 2:
            raise ConfigError("qme.initial needs at least two points")
        [_point(x, "qme.initial[]") for x in q["initial"]]
        _point(q["target"], "qme.target")
    elif cmd == "plot" and not cfg["plot"]["input"]:
        raise ConfigError("plot.input is required")


def model_params(cfg: dict) -> ModelParams:
    m = cfg["model"]
    return ModelParams(L=int(m["L"]), J=float(m["J"]), mu=float(m["mu"]), g=float(m["g"]),
                       gamma=float(m["gamma"]), kBT=float(m["kBT"]))


def evolution_config(cfg: dict) -> EvolutionConfig:
    return EvolutionConfig(**cfg["evolution"])


def steady_evolution_config(cfg: dict) -> EvolutionConfig:
    s = cfg["steady"]
    base = {k: v for k, v in cfg["evolution"].items() if k not in ("t_max", "rediag_mode", "snapshot_stride")}
    return EvolutionConfig(**base, t_max=float(s["t_max"]), rediag_mode=s["rediag_mode"],
                           snapshot_stride=200, stop_at_steady=True)
