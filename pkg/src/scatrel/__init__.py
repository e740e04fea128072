"""Numerical laboratory for the single-measurement wave-equation inverse problem.

A pseudorandom-noise array of boundary point sources fires once; the wave it
produces is recorded on the boundary of an unknown region.  From that single
trace (plus knowledge of the metric outside the region) the package recovers
travel times, exit points and exit directions of geodesics through the region,
and compares them against ground truth computed with full knowledge of the
interior.
"""

__version__ = "0.1.0"

from .geometry import (
    DiskBoundary,
    MetricModel,
    PhasePoint,
    blind_mode,
    first_hit_tau,
    geodesic_flow,
    ground_truth_sigma,
    hamiltonian_blocks,
    metric_at,
)
from .source import SourceSet, generate_sources, m_A

__all__ = [
    "DiskBoundary",
    "MetricModel",
    "PhasePoint",
    "SourceSet",
    "blind_mode",
    "first_hit_tau",
    "generate_sources",
    "geodesic_flow",
    "ground_truth_sigma",
    "hamiltonian_blocks",
    "m_A",
    "metric_at",
]
