"""Numerical laboratory for Lagrangian mean curvature flow on symmetric classes."""

from lagflow.geom import DiscreteCurve, ResampleParams
from lagflow.lagrangian import CycleId, Equivariant, Planar, Product
from lagflow.functionals import SpacetimeCenter
from lagflow.flow import FlowParams, FlowState, FlowTrace

__all__ = [
    "CycleId",
    "DiscreteCurve",
    "Equivariant",
    "FlowParams",
    "FlowState",
    "FlowTrace",
    "Planar",
    "Product",
    "ResampleParams",
    "SpacetimeCenter",
]
