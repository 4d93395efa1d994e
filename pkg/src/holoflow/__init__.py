"""Complex-time continuation of analytic ODEs.

Integrate autonomous systems along polylines in complex time, sample the
resulting solution surfaces, and use imaginary-time Fourier spectra to
tell initial values on a slow invariant manifold from those off it.
"""

from .errors import (EvaluationError, HoloflowError, IntegrationFailure, ParseError, PoleOrBranch,
                     SingularityEncountered, StepSizeUnderflow)
from .expr import parse_expression, to_source
from .field import (VectorField, builtin_field, davis_skodje, expression_field, jacobian_spectrum,
                    linear2d, rotate_field)
from .integrator import IntegratorConfig, TimePath, Trajectory, integrate_path, path_commutativity_defect
from .sim import SimGraph, benchmark_truth, classifier_validation, invariance_residual, known_graph
from .spectral import (ClassificationReport, Spectrum, classify_sim_membership, fft, ifft,
                       imaginary_time_spectrum, suggest_fast_band)
from .surface import SurfaceMesh, cauchy_riemann_residual, project_surface_svg, sample_surface

__version__ = "0.1.0"

__all__ = [
    "ClassificationReport", "EvaluationError", "HoloflowError", "IntegrationFailure", "IntegratorConfig",
    "ParseError", "PoleOrBranch", "SimGraph", "SingularityEncountered", "Spectrum", "StepSizeUnderflow",
    "SurfaceMesh", "TimePath", "Trajectory", "VectorField", "benchmark_truth", "builtin_field",
    "cauchy_riemann_residual", "classifier_validation", "classify_sim_membership", "davis_skodje",
    "expression_field", "fft", "ifft", "imaginary_time_spectrum", "integrate_path", "invariance_residual",
    "jacobian_spectrum", "known_graph", "linear2d", "parse_expression", "path_commutativity_defect",
    "project_surface_svg", "rotate_field", "sample_surface", "suggest_fast_band", "to_source",
]
