"""Robust one-shot aggregation for federated ICA."""

try:
    from ._rfica import *  # noqa: F401,F403  (installed package layout)
except ImportError:  # pragma: no cover - in-tree builds put _rfica on sys.path
    from _rfica import *  # noqa: F401,F403

__version__ = "0.1.0"
