"""Optimal portfolios in affine Volterra and Volterra-Wishart volatility models."""

import json as _json
import os as _os

from ._vmerton import (
    BlowUpError,
    Config,
    ConfigError,
    DomainError,
    ModelError,
    ShapeError,
    SimulationError,
    SolverError,
    kernel,
    list_presets,
    load_config,
    load_config_text,
    load_preset,
    mc_check,
    mittag_leffler,
    preset_directory,
    resolvent,
    solve,
    strategy,
    value,
)
from . import _vmerton

# An installed wheel carries its presets next to the module.
_bundled = _os.path.join(_os.path.dirname(__file__), "presets")
if "VMERTON_PRESET_DIR" not in _os.environ and _os.path.isdir(_bundled):
    _os.environ["VMERTON_PRESET_DIR"] = _bundled


def run(config):
    """Run the experiment described by `config` and return the report as a dict."""
    return _json.loads(_vmerton._execute(config))


__all__ = [
    "BlowUpError", "Config", "ConfigError", "DomainError", "ModelError", "ShapeError",
    "SimulationError", "SolverError", "kernel", "list_presets", "load_config",
    "load_config_text", "load_preset", "mc_check", "mittag_leffler", "preset_directory",
    "resolvent", "run", "solve", "strategy", "value",
]
