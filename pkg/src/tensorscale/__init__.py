"""Feature-centered structure tensor scale analysis for 2D/3D fields.

The pipeline: normalized Gaussian derivatives build a gradient, a ring
filter integrates the outer products at a feature-matched radius, and the
per-pixel scale that maximizes the tensor trace is selected, corrected for
feature shape, and converted to a width estimate.
"""

__version__ = "0.1.0"

from .filters import RingSpec, apply_ring, gaussian_derivative_kernel, gaussian_kernel
from .grid import BoundaryRule, Kernel1D, convolve_axis, convolve_separable, validate_field
from .scalecalc import (DEFAULT_GAMMA, DEFAULT_K, CalibrationResult,
                        GammaParams, NumericalModelError, calibrate_anis_ratio,
                        circular_segment_area, default_params, gamma_to_t,
                        lambert_w_m1, rect_response, ring_line_ratio,
                        ring_peak_radius, sigma_r_from_scale, t_to_gamma)
from .scalespace import (DEFAULT_ANIS_RATIO, DEFAULT_CORRECTION_3D, Advice,
                         CorrectionFit, Histogram, ScaleGrid, ScaleSpaceResult,
                         SingleScaleResult, Spacing, correct_scale_2d,
                         correct_scale_3d, optimize_correction_2d,
                         optimize_correction_3d, range_advice, scale_histogram,
                         single_scale_analyze, sweep, width_map)
from .synth import (NoiseKind, Phantom, PhantomKind, PhantomSpec, add_noise,
                    downscale2, generate, three_feature_scene)
from .tensor import (EigenField, MeasureField, TensorField,
                     classic_structure_tensor, eigendecompose, gradient,
                     measures, orientation, structure_tensor)
