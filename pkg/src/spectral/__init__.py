from .jacobi import (
    rough_laplacian, curvature_term, connection_jacobi_apply, energy_hessian_apply, is_variational, jacobi_apply,
    harmonicity, hessian, finite_difference_hessian,
    HessianCheckReport, hessian_check, quadratic_form_minimum, integrated_curvature_check,
)
from .assembly import (
    JacobiAssembly, SpectrumReport, assemble, spectrum, stability_report, eigenvalue_clusters,
    probe_period, weight_matrix,
)
from .oracle import rayleigh_ritz_oracle, gershgorin_lower_bound

__all__ = [
    'rough_laplacian', 'curvature_term', 'connection_jacobi_apply', 'energy_hessian_apply', 'is_variational',
    'jacobi_apply', 'harmonicity', 'hessian', 'finite_difference_hessian',
    'HessianCheckReport', 'hessian_check', 'quadratic_form_minimum', 'integrated_curvature_check',
    'JacobiAssembly', 'SpectrumReport', 'assemble', 'spectrum', 'stability_report', 'eigenvalue_clusters',
    'probe_period', 'weight_matrix', 'rayleigh_ritz_oracle', 'gershgorin_lower_bound',
]
