"""Experiment configuration: strict schema, defaults, stable hashing.

Configs are YAML documents organized in blocks (equation, grid, data,
physical, selfsim, diagnostics, output).  Unknown keys are rejected with
their full key path; the resolved config embeds a sha256 hash so run
manifests are reproducible and diffable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import yaml

from wavebreak.symbols import LinearSymbol, mu_exponents

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Schema violation, reported with the offending key path."""


def _typecheck(path, value, types):
    if not isinstance(value, types) or isinstance(value, bool) and bool not in (
        types if isinstance(types, tuple) else (types,)
    ):
        names = "/".join(
            t.__name__ for t in (types if isinstance(types, tuple) else (types,))
        )
        raise ConfigError(f"{path}: expected {names}, got {value!r}")
    return value


# Each leaf: (default, accepted types); required leaves use the marker.
_REQUIRED = object()

_SCHEMA = {
    "schema_version": (SCHEMA_VERSION, int),
    "k": (1, int),
    "seed": (0, int),
    "equation": {
        "family": ("burgers", str),
        "alpha": (0.0, (int, float)),
        "beta": (0.0, (int, float)),
    },
    "grid": {
        "n": (4096, int),
        "half_length": (12.0, (int, float)),
    },
    "data": {
        "tau0": (0.05, (int, float)),
        "xi0": (0.0, (int, float)),
        "kappa0": (0.0, (int, float)),
        "w0": ([], list),
        "eps0": (1e-3, (int, float)),
        "gamma": (0.1, (int, float)),
        "perturbation": {
            "shape": ("none", str),
            "amplitude": ("calibrated", (int, float, str)),
            "width": (1.0, (int, float)),
            "carrier": (2.0, (int, float)),
        },
    },
    "physical": {
        "c_adv": (0.4, (int, float)),
        "c_grad": (0.04, (int, float)),
        "g_max": (2.0e3, (int, float)),
        "t_stop": (None, (int, float, type(None))),
        "boundary_threshold": (1.0e-4, (int, float)),
        "n_max": (2**17, int),
    },
    "selfsim": {
        "s_end": (8.0, (int, float)),
        "y0": (0.1, (int, float)),
        "A": (10.0, (int, float)),
        "ds_max": (0.02, (int, float)),
        "cfl": (0.5, (int, float)),
        "fit_radius": (0.5, (int, float)),
        "sponge_fraction": (0.3, (int, float)),
        "sponge_strength": (300.0, (int, float)),
        "taper_fraction": (0.45, (int, float)),
        "record_ds": (0.05, (int, float)),
    },
    "shoot": {
        "budget": (50, int),
        "s_horizon": (4.0, (int, float)),
    },
    "diagnostics": {
        "sigmas": ([1.0 / 3.0, 2.0 / 3.0, 1.0], list),
        "grad_min": (10.0, (int, float)),
        "min_decades": (1.5, (int, float)),
    },
    "output": {
        "directory": (".", str),
        "svg": (False, bool),
    },
}


def _resolve(schema, data, path=""):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'top level'}: expected a mapping")
    out = {}
    for key, value in data.items():
        if key not in schema:
            raise ConfigError(f"unknown key {path + key!r}")
    for key, spec in schema.items():
        here = f"{path}{key}"
        if isinstance(spec, dict):
            out[key] = _resolve(spec, data.get(key, {}), here + ".")
            continue
        default, types = spec
        if key in data:
            out[key] = _typecheck(here, data[key], types)
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key {here!r}")
        else:
            out[key] = default
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully-resolved, validated experiment description."""

    raw: dict

    def __getitem__(self, dotted):
        node = self.raw
        for part in dotted.split("."):
            node = node[part]
        return node

    @property
    def k(self):
        return self.raw["k"]

    def symbol(self):
        eq = self.raw["equation"]
        return LinearSymbol.from_config(eq["family"], eq["alpha"], eq["beta"])

    def canonical_json(self):
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def parse_config(text):
    """Parse and validate a YAML config; fill defaults; reject unknowns."""
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as err:
        raise ConfigError(f"not valid YAML: {err}") from err
    raw = _resolve(_SCHEMA, data)
    if raw["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: expected {SCHEMA_VERSION}, got {raw['schema_version']}"
        )
    if raw["k"] < 1:
        raise ConfigError("k: must be >= 1")
    cfg = ExperimentConfig(raw)
    # the perturbative-regime precondition is part of config validity
    mu_exponents(cfg.symbol(), raw["k"])
    if raw["data"]["tau0"] <= 0:
        raise ConfigError("data.tau0: must be positive")
    return cfg


def apply_overrides(text, overrides):
    """Apply repeated ``key=value`` overrides on top of a YAML document."""
    data = yaml.safe_load(text) or {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, _, value = item.partition("=")
        node = data
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r} crosses a non-mapping key")
        node[parts[-1]] = yaml.safe_load(value)
    return yaml.safe_dump(data)
