"""Aligned traffic flow maps from GPS trajectories.

Coordinates are planar metres. A flow map is a list of ``(flow, coords)``
pairs, a line is a list of ``(x, y)`` tuples.
"""

import json

from . import _flowmap
from ._flowmap import (
    BackendError,
    Error,
    GeometryError,
    InputError,
    InvariantError,
    desire_lines,
    dtw,
    hausdorff,
    lineblend_pass,
    overline,
    proxy_flows,
    prune,
    simplify,
    snap_nodes,
)

__all__ = [
    "BackendError",
    "Error",
    "GeometryError",
    "InputError",
    "InvariantError",
    "aggregate",
    "default_config",
    "desire_lines",
    "dtw",
    "hausdorff",
    "lineblend_pass",
    "match_synthetic",
    "overline",
    "proxy_flows",
    "prune",
    "run_cli",
    "simplify",
    "snap_nodes",
]


def default_config():
    """The default run configuration as a dict."""
    return json.loads(_flowmap.default_config())


def aggregate(routes, config=None, threads=1):
    """Run the staged aggregation on routes.

    ``config`` is a partial config dict merged over the defaults, e.g.
    ``{"aggregate": {"j_max": 10}}``. Returns ``{"maps": [...], "log": [...]}``
    with the prepared map first and one map per stage.
    """
    return _flowmap.aggregate(routes, json.dumps(config or {}), threads)


def match_synthetic(trajectories, network, config=None, threads=1):
    """Map-match trajectories onto a network given as a list of lines."""
    return _flowmap.match_synthetic(trajectories, network, json.dumps(config or {}), threads)


def run_cli(args):
    """Run the command-line tool in process and return its exit code."""
    return _flowmap.run_cli([str(a) for a in args])
