"""Multistatic passive sensing simulator."""

import json

from . import _core
from ._core import (
    WaveformConfig,
    associate,
    bistatic_radial_velocity,
    bistatic_range,
    compute_caf,
    estimate_velocity,
    generate_frame,
    synthesize_capture,
    track,
    trilaterate,
)

__all__ = [
    "WaveformConfig",
    "associate",
    "bistatic_radial_velocity",
    "bistatic_range",
    "compute_caf",
    "default_config",
    "estimate_velocity",
    "generate_frame",
    "run",
    "synthesize_capture",
    "track",
    "trilaterate",
]


def default_config(mode="single"):
    return json.loads(_core.default_config_json(mode))


def run(config, out_dir=None):
    """Run an experiment from a config dict; returns the metrics report.

    Files are written only when out_dir is given.
    """
    text = _core.run_json(json.dumps(config), "" if out_dir is None else str(out_dir))
    return json.loads(text)
