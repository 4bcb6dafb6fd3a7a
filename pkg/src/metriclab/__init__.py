"""Measurement toolkit for invariant metrics on finitely generated groups.

Exact word-metric balls, translation lengths and marked length spectra,
comparisons of two metrics through their difference, four-point δ estimates,
relative Cayley graph geometry and a periodic witness search.
"""

from .errors import (
    BudgetExceeded, CacheMismatch, ConfigError, ElementError, GroupSpecSyntaxError, MetricLabError,
    NonWordMetric, NotGenerating, OutOfBall, UnsupportedNesting,
)
from .groups import IDENTITY, GroupSpec, parse_group_spec
from .metrics import (
    WORD, Ball, Derivation, GeneratingSet, Metric, additive, build_metric, check_coarse_geodesic, concave,
    enumerate_ball,
)

__version__ = "0.1.0"

__all__ = [
    "IDENTITY", "GroupSpec", "parse_group_spec", "GeneratingSet", "Metric", "Derivation", "WORD",
    "additive", "concave", "build_metric", "enumerate_ball", "Ball", "check_coarse_geodesic",
    "MetricLabError", "GroupSpecSyntaxError", "UnsupportedNesting", "ElementError", "NotGenerating",
    "OutOfBall", "BudgetExceeded", "NonWordMetric", "CacheMismatch", "ConfigError",
]
