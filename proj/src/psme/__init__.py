"""Trajectory simulation and robust filtering for continuously monitored qubits."""

from __future__ import annotations

import json
from os import PathLike
from typing import Any, Mapping, Union

from . import _psme
from ._psme import ConfigError, Error, __version__, expm

Config = Union[Mapping[str, Any], str, None]


def _text(config: Config, **overrides: Any) -> str:
    if config is None:
        doc: dict = {}
    elif isinstance(config, str):
        doc = json.loads(config)
    else:
        doc = dict(config)
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return json.dumps(doc)


def normalize_config(config: Config = None) -> dict:
    """Validated configuration with every default filled in."""
    return json.loads(_psme.normalize_config(_text(config)))


def trajectory(config: Config = None, seed: int | None = None) -> dict:
    """One trajectory: times, bloch (N+1, 3), log_lambda, purity, record, final_rho."""
    return _psme.trajectory(_text(config, seed=seed))


def filter_record(record, config: Config = None) -> dict:
    """Filters stored increments (dy or dN) with the configured scheme."""
    return _psme.filter_record(_text(config), [float(v) for v in record])


def ensemble(config: Config = None, n_traj: int | None = None, seed: int | None = None) -> dict:
    """Trajectory i uses seed + i. Returns times, final_bloch, final_purity, mean_bloch."""
    return _psme.ensemble(_text(config, n_traj=n_traj, seed=seed))


def master_path(config: Config = None):
    """Bloch vectors of the unconditional (master-equation) evolution."""
    return _psme.master_path(_text(config))


def run_command(command: str, config: Config, out_dir: Union[str, PathLike], record=None) -> list:
    """Runs a CLI subcommand in-process and returns the files written."""
    return _psme.run_command(command, _text(config), out_dir, record or "")


__all__ = [
    "ConfigError",
    "Error",
    "__version__",
    "ensemble",
    "expm",
    "filter_record",
    "master_path",
    "normalize_config",
    "run_command",
    "trajectory",
]
