"""Run-configuration parsing and output writers.

Configs are flat `key.path = value` text files: '#' starts a comment,
values are floats, ints, booleans, bare strings, or whitespace-separated
float lists.  No schema language; the case builder validates semantics.

Snapshots are CSV with a fixed column order and floats printed at 17
significant digits, which round-trips float64 bitwise.  Run statistics
go out as deterministic JSON.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SNAPSHOT_COLUMNS = ("x", "alpha_v", "p", "u_v", "u_l", "h_v", "h_l")
FLOAT_FMT = "%.17g"


def _parse_value(text):
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    parts = text.split()
    if len(parts) > 1:
        try:
            return [float(p) for p in parts]
        except ValueError:
            return text
    try:
        as_int = int(text)
        return as_int
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_config(path):
    """Flat-key config file -> dict; errors carry line numbers."""
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                              f"got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key] = _parse_value(val)
    return out


def require(cfg, key, path="<config>"):
    if key not in cfg:
        raise ConfigError(f"{path}: missing required key {key!r}")
    return cfg[key]


def write_snapshot(path, x, state):
    """Profile CSV: x, alpha_v, p, u_v, u_l, h_v, h_l at 17 digits."""
    prim = np.atleast_2d(state.prim) if hasattr(state, "prim") else np.empty((0, 6))
    x = np.asarray(x, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(SNAPSHOT_COLUMNS) + "\n")
        for i in range(prim.shape[0]):
            row = [x[i], *prim[i]]
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def read_snapshot(path):
    """Inverse of write_snapshot: (x, prim array (N,6))."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != SNAPSHOT_COLUMNS:
            raise ConfigError(f"{path}: unexpected snapshot header {header}")
        rows = [list(map(float, line.split(","))) for line in fh if line.strip()]
    arr = np.asarray(rows, dtype=float).reshape(-1, 7)
    return arr[:, 0], arr[:, 1:]


def write_stats(path, stats):
    """Run statistics as deterministic JSON (dict or RunStats-like)."""
    data = stats.as_dict() if hasattr(stats, "as_dict") else dict(stats)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_samples_csv(path, columns, arrays):
    """Generic small CSV used by the diagnostic subcommands."""
    arrays = [np.asarray(a, dtype=float) for a in arrays]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in zip(*arrays):
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def cases_dir():
    """Locate the shipped case-config directory.

    Resolution order: $TWOFLUID_CASES, ./cases relative to the working
    directory, then the repository layout next to the package sources.
    """
    env = os.environ.get("TWOFLUID_CASES")
    if env:
        return env
    if os.path.isdir("cases"):
        return "cases"
    here = os.path.dirname(os.path.abspath(__file__))
    repo = os.path.normpath(os.path.join(here, "..", "..", "cases"))
    if os.path.isdir(repo):
        return repo
    raise ConfigError("cannot locate the cases/ directory; set TWOFLUID_CASES")
