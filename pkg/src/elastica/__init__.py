"""Elastic shape analysis of plane curves.

Lifts curves to a flat or conical space where the elastic metric becomes
an L2 metric, computes geodesics of open and closed curves, and matches
unparameterized shapes by descent over reparameterizations.
"""

from .curves import CLOSED, OPEN, DiscreteCurve, ElasticParams
from .transforms import LiftedCurve, elastic_metric, r_inverse, r_transform

__version__ = "0.1.0"

__all__ = [
    "CLOSED",
    "OPEN",
    "DiscreteCurve",
    "ElasticParams",
    "LiftedCurve",
    "elastic_metric",
    "r_inverse",
    "r_transform",
]
