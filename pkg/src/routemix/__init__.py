"""Route clustering with Bezier-mean Gaussian mixtures.

Modules
-------
bernstein  Bernstein basis, Bezier evaluation and least-squares fits
ingest     tracking parser and route preprocessing
mixture    the curve mixture model and its EM fit
labeling   label maps, usage reports, SVG plots
synth      synthetic corpora and the adjusted Rand index
io         file formats shared by the command-line stages
"""

from .bernstein import basis, design_matrix, evaluate_bezier, fit_control_points
from .ingest import NormalizedCurve, parse_tracking, preprocess
from .mixture import ClusterModel, MixtureConfig, assign, assign_all, e_step, fit, m_step
from .synth import adjusted_rand_index, default_templates, generate

__version__ = "0.1.0"

__all__ = [
    "ClusterModel",
    "MixtureConfig",
    "NormalizedCurve",
    "adjusted_rand_index",
    "assign",
    "assign_all",
    "basis",
    "default_templates",
    "design_matrix",
    "e_step",
    "evaluate_bezier",
    "fit",
    "fit_control_points",
    "generate",
    "m_step",
    "parse_tracking",
    "preprocess",
]
