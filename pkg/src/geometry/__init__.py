from .manifold import (
    ValidityBox, MetricField, ConnectionField, ChartManifold, CurvatureTensor,
    central_derivative, levi_civita, difference_tensor, dual_connection, dual_manifold,
    riemann_from_christoffel, curvature, lowered_curvature, curvature_norm, curvature_form,
    sectional_curvature, codazzi_tensor, codazzi_residual, duality_residual, exponential_map,
    trace_K_divergence,
)
from .zoo import make_manifold, verify_statistical, normal_cubic_form, MANIFOLD_TYPES, CONNECTION_KINDS
from .certificates import nonpositivity_certificate

__all__ = [
    'ValidityBox', 'MetricField', 'ConnectionField', 'ChartManifold', 'CurvatureTensor',
    'central_derivative', 'levi_civita', 'difference_tensor', 'dual_connection', 'dual_manifold',
    'riemann_from_christoffel', 'curvature', 'lowered_curvature', 'curvature_norm', 'curvature_form',
    'sectional_curvature', 'codazzi_tensor', 'codazzi_residual', 'duality_residual', 'exponential_map',
    'trace_K_divergence', 'make_manifold', 'verify_statistical', 'normal_cubic_form',
    'MANIFOLD_TYPES', 'CONNECTION_KINDS', 'nonpositivity_certificate',
]
