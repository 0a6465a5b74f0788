"""Approximate in-range farthest point and minimum enclosing ball queries."""

from rangeagg.core import Ball, GlobalConfig, PointSet, RngStream, align_up, dist, expand_ball

__all__ = [
    "Ball",
    "GlobalConfig",
    "PointSet",
    "RngStream",
    "align_up",
    "dist",
    "expand_ball",
]

__version__ = "0.1.0"
