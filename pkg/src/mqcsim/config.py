"""Flat key-value configuration files (INI sections) for the CLI.

Grammar: standard INI sections with ``key = value`` pairs; lists are
space separated; keys are order insensitive.  ``render_config`` writes a
canonical (sorted) form that re-parses to an identical resolved config.

Sections and keys (defaults in parentheses):

  [run]          seed (required), workers (1), max_spins (14)
  [geometry]     kind (required: fcc | chain), sites (required),
                 lattice_constant (1.0), spacing (1.0),
                 nn_coupling (1.0), cutoff (inf)
  [orientation]  mode (single), angles (0 0 0), count (1)
  [cycle]        tau_c (0.5), mode (effective)
  [experiment]   p (required), schedule (required), n0 (0),
                 normalization (raw)
  [error]        kind (none), strength (0.0), ensemble (1)
  [sweep]        tail_window (0.25)
"""

from __future__ import annotations

import configparser
import math

from .errors import ConfigError
from .experiments import (ErrorSpec, ExperimentConfig, GeometrySpec,
                          OrientationSpec)

_REQUIRED = [
    ("run", "seed"),
    ("geometry", "kind"),
    ("geometry", "sites"),
    ("experiment", "p"),
    ("experiment", "schedule"),
]


def _get(cp, section, key, cast, default=None):
    if not cp.has_option(section, key):
        if default is None:
            raise ConfigError(f"missing required key {section}.{key}")
        return default
    raw = cp.get(section, key)
    try:
        return cast(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})")


def _float_list(raw: str):
    return tuple(float(v) for v in raw.split())


def _int_list(raw: str):
    return tuple(int(v) for v in raw.split())


def _angles(raw: str):
    vals = tuple(float(v) for v in raw.split())
    if len(vals) != 3:
        raise ValueError("need exactly 3 Euler angles")
    return vals


def parse_config(text: str, overrides=()) -> ExperimentConfig:
    """Parse config text (with optional ``section.key=value`` overrides)."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}")
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        key, value = item.split("=", 1)
        section, option = key.split(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section.strip(), option.strip(), value.strip())
    for section, key in _REQUIRED:
        if not cp.has_option(section, key):
            raise ConfigError(f"missing required key {section}.{key}")
    geom = GeometrySpec(
        kind=_get(cp, "geometry", "kind", str),
        sites=_get(cp, "geometry", "sites", int),
        lattice_constant=_get(cp, "geometry", "lattice_constant", float, 1.0),
        spacing=_get(cp, "geometry", "spacing", float, 1.0),
        nn_coupling=_get(cp, "geometry", "nn_coupling", float, 1.0),
        cutoff=_get(cp, "geometry", "cutoff", float, math.inf),
    )
    orient = OrientationSpec(
        mode=_get(cp, "orientation", "mode", str, "single"),
        angles=_get(cp, "orientation", "angles", _angles, (0.0, 0.0, 0.0)),
        count=_get(cp, "orientation", "count", int, 1),
    )
    error = ErrorSpec(
        kind=_get(cp, "error", "kind", str, "none"),
        strength=_get(cp, "error", "strength", float, 0.0),
        ensemble=_get(cp, "error", "ensemble", int, 1),
    )
    return ExperimentConfig(
        geometry=geom,
        orientation=orient,
        p_values=_get(cp, "experiment", "p", _float_list),
        schedule=_get(cp, "experiment", "schedule", _int_list),
        n0=_get(cp, "experiment", "n0", int, 0),
        tau_c=_get(cp, "cycle", "tau_c", float, 0.5),
        mode=_get(cp, "cycle", "mode", str, "effective"),
        normalization=_get(cp, "experiment", "normalization", str, "raw"),
        error=error,
        seed=_get(cp, "run", "seed", int),
        tail_window=_get(cp, "sweep", "tail_window", float, 0.25),
        workers=_get(cp, "run", "workers", int, 1),
        max_spins=_get(cp, "run", "max_spins", int, 14),
    )


def render_config(cfg: ExperimentConfig) -> str:
    """Canonical text form of a resolved config (round-trips exactly)."""
    sections = {
        "run": {
            "seed": cfg.seed,
            "workers": cfg.workers,
            "max_spins": cfg.max_spins,
        },
        "geometry": {
            "kind": cfg.geometry.kind,
            "sites": cfg.geometry.sites,
            "lattice_constant": repr(cfg.geometry.lattice_constant),
            "spacing": repr(cfg.geometry.spacing),
            "nn_coupling": repr(cfg.geometry.nn_coupling),
            "cutoff": repr(cfg.geometry.cutoff),
        },
        "orientation": {
            "mode": cfg.orientation.mode,
            "angles": " ".join(repr(a) for a in cfg.orientation.angles),
            "count": cfg.orientation.count,
        },
        "cycle": {
            "tau_c": repr(cfg.tau_c),
            "mode": cfg.mode,
        },
        "experiment": {
            "p": " ".join(repr(p) for p in cfg.p_values),
            "schedule": " ".join(str(n) for n in cfg.schedule),
            "n0": cfg.n0,
            "normalization": cfg.normalization,
        },
        "error": {
            "kind": cfg.error.kind,
            "strength": repr(cfg.error.strength),
            "ensemble": cfg.error.ensemble,
        },
        "sweep": {
            "tail_window": repr(cfg.tail_window),
        },
    }
    lines = []
    for section in sorted(sections):
        lines.append(f"[{section}]")
        for key in sorted(sections[section]):
            lines.append(f"{key} = {sections[section][key]}")
        lines.append("")
    return "\n".join(lines)
