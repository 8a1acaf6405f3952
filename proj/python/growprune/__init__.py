# Copyright 2026 The growprune Authors
# SPDX-License-Identifier: Apache-2.0
"""Alternating prune/grow training for DLRM-style recommenders."""

import json as _json
import os as _os

from growprune import _core
from growprune._core import (
    ConfigError,
    DataError,
    Error,
    ShapeError,
    categorical_hash,
    keep_count,
    predict,
    preset_names,
    relative_metric,
    spearman,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "ShapeError",
    "categorical_hash",
    "compare",
    "inspect_checkpoint",
    "keep_count",
    "load_summary",
    "predict",
    "preset_names",
    "relative_metric",
    "resolve_config",
    "run",
    "spearman",
]


def resolve_config(config=None, overrides=()):
    """Resolves a config dict (preset, then config, then overrides)."""
    return _json.loads(_core.resolve_config(_json.dumps(config or {}), list(overrides)))


def run(config, overrides=()):
    """Trains one run, or a sweep, and returns the run directories."""
    return _core.run(_json.dumps(config), list(overrides))


def compare(baseline, runs):
    return _json.loads(_core.compare(_os.fspath(baseline), [_os.fspath(r) for r in runs]))


def inspect_checkpoint(path):
    return _json.loads(_core.inspect_checkpoint(_os.fspath(path)))


def load_summary(run_dir):
    with open(_os.path.join(_os.fspath(run_dir), "summary.json")) as f:
        return _json.load(f)
