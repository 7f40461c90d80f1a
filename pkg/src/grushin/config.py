"""Experiment configuration: a TOML document with a few flat sections.

Example::

    experiment = "mass-profile"
    workers = 2

    [manifold]
    n = 1
    circumferences = [6.283185307179586]
    epsilon0 = 1.0
    bc_right = "D"

    [params]
    lambda = 1000.0
    gamma = [-0.5, -0.4, -0.3, -0.2, -0.1, 0.0]

    [grid]
    tail_fraction = 0.05

    [output]
    dir = "runs/mass-profile"
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = (
    "constants",
    "mode-count",
    "trace-1d",
    "scaling-check",
    "mass-profile",
    "test-function",
    "trace-diff",
    "sandwich",
    "weyl-ratio",
    "convergence-study",
)

TEST_FUNCTIONS = ("one", "identity", "square", "cosine")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _default_gammas():
    return [-0.5, -0.4, -0.3, -0.2, -0.1, 0.0]


@dataclass
class ExperimentConfig:
    experiment: str = "constants"
    workers: int = 1
    # manifold
    n: int = 1
    circumferences: list = field(default_factory=lambda: [2 * math.pi])
    epsilon0: float = 1.0
    bc_right: str = "D"
    # params
    lam: float = 1000.0
    gamma: list = field(default_factory=_default_gammas)
    delta: list = field(default_factory=lambda: [0.5])
    beta: list = field(default_factory=lambda: [2.0])
    omega: list = field(default_factory=lambda: [400.0])
    mu: float = 16.0
    a: float = 5.0
    levels: int = 4
    tol: float = 1e-13
    functions: list = field(default_factory=lambda: list(TEST_FUNCTIONS))
    # grid
    layer_fraction: float = 0.05
    tail_fraction: float = 0.05
    ratio: float = 1.05
    # output
    out_dir: str = "grushin-out"

    def to_document(self) -> dict:
        """Nested mapping in the same layout :func:`parse_config` reads."""
        doc: dict = {}
        for (section, key), attr in _LAYOUT.items():
            value = getattr(self, attr)
            target = doc if section is None else doc.setdefault(section, {})
            target[key] = list(value) if isinstance(value, (list, tuple)) else value
        return doc


# (section, key) -> attribute
_LAYOUT = {
    (None, "experiment"): "experiment",
    (None, "workers"): "workers",
    ("manifold", "n"): "n",
    ("manifold", "circumferences"): "circumferences",
    ("manifold", "epsilon0"): "epsilon0",
    ("manifold", "bc_right"): "bc_right",
    ("params", "lambda"): "lam",
    ("params", "gamma"): "gamma",
    ("params", "delta"): "delta",
    ("params", "beta"): "beta",
    ("params", "omega"): "omega",
    ("params", "mu"): "mu",
    ("params", "a"): "a",
    ("params", "levels"): "levels",
    ("params", "tol"): "tol",
    ("params", "functions"): "functions",
    ("grid", "layer_fraction"): "layer_fraction",
    ("grid", "tail_fraction"): "tail_fraction",
    ("grid", "ratio"): "ratio",
    ("output", "dir"): "out_dir",
}
_SECTIONS = {s for s, _ in _LAYOUT if s is not None}
_LIST_FIELDS = {"circumferences", "gamma", "delta", "beta", "omega", "functions"}


def _path(section, key):
    return key if section is None else f"{section}.{key}"


def _number(path, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if not math.isfinite(value):
        raise ConfigError(f"{path}: value must be finite")
    return float(value)


def _coerce(section, key, attr, value):
    path = _path(section, key)
    if attr in _LIST_FIELDS:
        items = value if isinstance(value, list) else [value]
        if not items:
            raise ConfigError(f"{path}: list must not be empty")
        if attr == "functions":
            return [str(v) for v in items]
        return [_number(path, v) for v in items]
    if attr in ("experiment", "bc_right", "out_dir"):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    return _number(path, value, integer=attr in ("workers", "n", "levels"))


def _check_range(cfg: ExperimentConfig):
    def fail(path, msg):
        raise ConfigError(f"{path}: {msg}")

    if cfg.experiment not in EXPERIMENTS:
        fail("experiment", f"unknown experiment {cfg.experiment!r}; one of {', '.join(EXPERIMENTS)}")
    if cfg.workers < 1:
        fail("workers", "must be >= 1")
    if cfg.n < 1:
        fail("manifold.n", "must be a positive integer")
    if len(cfg.circumferences) != cfg.n:
        fail("manifold.circumferences", f"need exactly n = {cfg.n} entries")
    if any(c <= 0 for c in cfg.circumferences):
        fail("manifold.circumferences", "entries must be > 0")
    if cfg.epsilon0 <= 0:
        fail("manifold.epsilon0", "must be > 0")
    if cfg.bc_right.upper() not in ("D", "N"):
        fail("manifold.bc_right", "must be D or N")
    cfg.bc_right = cfg.bc_right.upper()
    if cfg.lam <= 0:
        fail("params.lambda", "must be > 0")
    for g in cfg.gamma:
        if not -0.5 <= g <= 0.0:
            fail("params.gamma", f"gamma = {g!r} outside gamma in [-1/2, 0]")
    for d in cfg.delta:
        if not -0.5 <= d <= 0.5:
            fail("params.delta", f"delta = {d!r} outside delta in [-1/2, 1/2]")
    for b in cfg.beta:
        if b <= 0:
            fail("params.beta", "beta must be > 0")
    for w in cfg.omega:
        if w <= 0:
            fail("params.omega", "omega must be > 0")
    if cfg.mu <= 0:
        fail("params.mu", "must be > 0")
    if cfg.a <= 0:
        fail("params.a", "must be > 0")
    if not 0 < cfg.tol < 1e-3:
        fail("params.tol", "quadrature tolerance must lie in (0, 1e-3)")
    if cfg.levels < 3:
        fail("params.levels", "need at least 3 refinement levels")
    for f in cfg.functions:
        if f not in TEST_FUNCTIONS:
            fail("params.functions", f"unknown test function {f!r}; one of {', '.join(TEST_FUNCTIONS)}")
    for name in ("layer_fraction", "tail_fraction"):
        v = getattr(cfg, name)
        if not 0 < v <= 0.1:
            fail(f"grid.{name}", "must lie in (0, 0.1]")
    if cfg.ratio <= 1:
        fail("grid.ratio", "grading ratio must be > 1")


def config_from_mapping(doc: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = dataclasses.replace(base) if base is not None else ExperimentConfig()
    for key, value in doc.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a section")
            for sub, subval in value.items():
                attr = _LAYOUT.get((key, sub))
                if attr is None:
                    raise ConfigError(f"unknown key {_path(key, sub)!r}")
                setattr(cfg, attr, _coerce(key, sub, attr, subval))
        else:
            attr = _LAYOUT.get((None, key))
            if attr is None:
                raise ConfigError(f"unknown key {key!r}")
            setattr(cfg, attr, _coerce(None, key, attr, value))
    _check_range(cfg)
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration document; empty text gives defaults."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    return config_from_mapping(doc)


def override(cfg: ExperimentConfig, updates: dict[str, Any]) -> ExperimentConfig:
    """Apply ``{"section.key": value}`` overrides with full validation."""
    doc: dict = {}
    for dotted, value in updates.items():
        if "." in dotted:
            section, key = dotted.split(".", 1)
            doc.setdefault(section, {})[key] = value
        else:
            doc[dotted] = value
    return config_from_mapping(doc, cfg)
