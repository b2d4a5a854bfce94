"""wienerpath: finite-dimensional approximation schemes for Wiener-measure
path integrals on closed Riemannian manifolds.

Importing the package registers every built-in functional and field.
"""

from . import backends
from .backends import BACKEND_NAME
from .manifolds import (Circle, CutLocusError, Euclidean, FlatTorus,
                        GeometryError, Manifold, ManifoldPoint, Sphere2,
                        TangentVector, make_manifold, manifold_from_config)
from .heatkernel import KernelError, KernelEvaluator
from .report import EstimateReport
from .cylinder import (CylinderFunctional, CylinderMeasure, Partition,
                       PartitionError, PathSkeleton, expectation_mc,
                       expectation_quadrature, lift_functional, lp_norm_mc,
                       lp_norm_quadrature, make_functional, project,
                       project_points)
from .limits import (FunctionalFamily, PathFunctional, co_cauchy_diagnostic,
                     convergence_table, discretize, discretized_family,
                     embed_family, extrapolated_value, limit_estimate,
                     make_path_functional)
from .stratonovich import (AmbientField, ScalarObservable, covariation_sum,
                           exact_form_residual, ito_sum, make_field,
                           make_scalar, midpoint_sum, stratonovich_convergence,
                           stratonovich_l2)
from .development import (CurvedPiecewisePath, FlatPiecewisePath,
                          GeometricMeasureSampler, antidevelop,
                          antidevelop_vertices, develop, develop_batch,
                          energy_curved, energy_flat,
                          geometric_limit_estimate, lambda0_density,
                          lambda0_log_density, sample_lambda0,
                          sample_lambda0_increments, sample_nu,
                          transfer_to_curved, transfer_to_flat)

__version__ = "0.1.0"
