"""Structured run configuration (TOML, schema-versioned).

A run file has a [site] table naming a builtin potential family (or a
tabulated file), an optional [system] table (sizes, mean-spins,
interaction, boundary, width), a [run] table (seeds, sample counts,
output), optional [constants] overrides, and per-subcommand tables.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .measure1d import Measure1D, normalize
from .potentials import (FAMILIES, Potential1D, gaussian, power, tabulated,
                         two_sided_exp, uniform, weakly_gaussian)
from .transference import UniversalConstants

SCHEMA_VERSION = 1


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    if cfg.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"config must declare schema = {SCHEMA_VERSION}")
    return cfg


def apply_overrides(cfg: dict, sets) -> dict:
    """Apply --set dotted.key=value pairs; values parse as TOML literals."""
    for item in sets or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        try:
            parsed = tomllib.loads(f"v = {value}")["v"]
        except tomllib.TOMLDecodeError:
            parsed = value
        node = cfg
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {key!r} crosses a non-table")
        node[parts[-1]] = parsed
    return cfg


def build_potential(site_cfg: dict) -> Potential1D:
    family = site_cfg.get("family")
    if family is None:
        raise ConfigError("[site] needs a family")
    if family == "gaussian":
        return gaussian(float(site_cfg.get("sigma", 1.0)))
    if family == "two_sided_exp":
        return two_sided_exp()
    if family == "power":
        if "p" not in site_cfg:
            raise ConfigError("power family needs p")
        return power(float(site_cfg["p"]))
    if family == "uniform":
        return uniform(float(site_cfg.get("half_width", 1.0)))
    if family == "weakly_gaussian":
        return weakly_gaussian(
            alpha=float(site_cfg.get("alpha", 1.0)),
            omega=float(site_cfg.get("omega", 0.0)),
            bump_amplitude=site_cfg.get("bump_amplitude"),
            bump_width=site_cfg.get("bump_width"),
        )
    if family == "tabulated":
        path = site_cfg.get("path")
        if path is None:
            raise ConfigError("tabulated family needs path")
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        cols = [data[:, i] for i in range(data.shape[1])]
        return tabulated(*cols[:4])
    raise ConfigError(f"unknown site family {family!r} "
                      f"(known: {sorted(FAMILIES)} + tabulated)")


def build_site(site_cfg: dict) -> Measure1D:
    pot = build_potential(site_cfg)
    window = site_cfg.get("window")
    if window is not None:
        if len(window) != 2:
            raise ConfigError("window must be [lo, hi]")
        return normalize(pot, (float(window[0]), float(window[1])),
                         extend=bool(site_cfg.get("extend", False)))
    return normalize(pot)


def build_constants(cfg: dict) -> UniversalConstants:
    table = cfg.get("constants", {})
    known = {f for f in UniversalConstants().as_dict()}
    bad = set(table) - known
    if bad:
        raise ConfigError(f"unknown constants {sorted(bad)}; known: {sorted(known)}")
    try:
        return UniversalConstants(**{k: float(v) for k, v in table.items()})
    except Exception as exc:
        raise ConfigError(f"bad constants table: {exc}") from exc


def build_interaction(system_cfg: dict, n: int):
    """Dense matrix from an explicit list or a named generator."""
    inter = system_cfg.get("interaction")
    if inter is None:
        return None
    if isinstance(inter, list):
        a = np.asarray(inter, float)
        if a.shape != (n, n):
            raise ConfigError(f"interaction matrix must be {n}x{n}")
        return a
    kind = inter.get("kind")
    strength = float(inter.get("strength", 0.0))
    a = np.zeros((n, n))
    if kind == "nearest_neighbor":
        idx = np.arange(n - 1)
        a[idx, idx + 1] = strength
        a[idx + 1, idx] = strength
    elif kind == "mean_field":
        a[:] = strength / n
        np.fill_diagonal(a, 0.0)
    else:
        raise ConfigError(f"unknown interaction kind {kind!r}")
    return a


def build_boundary(system_cfg: dict, n: int):
    b = system_cfg.get("boundary")
    if b is None:
        return None
    b = np.asarray(b, float)
    if b.shape != (n,):
        raise ConfigError(f"boundary vector must have length {n}")
    return b


def resolve_width(system_cfg: dict, stats=None):
    """'auto' widths resolve through the optimal-width formula."""
    w = system_cfg.get("w", "auto")
    if w == "auto":
        if stats is None:
            return None
        from .spin import choose_w0
        variant = system_cfg.get("w_variant", "two_sided")
        return choose_w0(stats, variant)
    w = float(w)
    if not (w > 0 and math.isfinite(w)):
        raise ConfigError("width w must be positive")
    return w
