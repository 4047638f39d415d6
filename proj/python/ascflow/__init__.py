"""Python interface to the anisotropic curvature-flow toolkit.

Every entry point takes an experiment (or audit) configuration either as a
JSON string or as a plain dict with the same schema the command-line tool
reads.  Trajectory data comes back as numpy arrays.
"""

import json as _json

from ._ascflow import (
    AnalysisError,
    ConfigError,
    ConvexityError,
    Error,
    IoError,
    ResolutionError,
    __version__,
)
from ._ascflow import audit as _audit
from ._ascflow import canonical_config as _canonical_config
from ._ascflow import initial_body as _initial_body
from ._ascflow import run_experiment as _run_experiment
from ._ascflow import run_flow as _run_flow
from ._ascflow import verify as _verify

__all__ = [
    "AnalysisError",
    "ConfigError",
    "ConvexityError",
    "Error",
    "IoError",
    "ResolutionError",
    "audit",
    "canonical_config",
    "initial_body",
    "run_experiment",
    "run_flow",
    "verify",
    "__version__",
]


def _as_text(config):
    if isinstance(config, str):
        return config
    return _json.dumps(config)


def run_flow(config):
    """Run the flow; returns the in-memory trajectory and diagnostics."""
    return _run_flow(_as_text(config))


def run_experiment(config, quiet=True):
    """Run the flow and write the artifact set; returns the artifact paths."""
    return _run_experiment(_as_text(config), quiet)


def audit(config):
    """Seeded positivity audit; returns the batch statistics."""
    return _audit(_as_text(config))


def verify(config):
    """Check engine steps against the analytic evolution identities."""
    return _verify(_as_text(config))


def initial_body(config):
    """Grid nodes, initial samples, volume, and extents for a config."""
    return _initial_body(_as_text(config))


def canonical_config(config):
    """Canonical serialized form of a config (parse + re-serialize)."""
    return _canonical_config(_as_text(config))
