from .tension import (
    pullback_derivative, energy, energy_and_gradient, energy_gradient_derivative, levi_civita_tension,
    statistical_defect, tension, bienergy, EnergyReport, energy_report,
)
from .families import (
    VariationFamily, FirstVariationReport, geodesic_family, random_section, first_variation_check,
)
from .flow import FlowResult, harmonic_flow, default_dt, stiffness

__all__ = [
    'pullback_derivative', 'energy', 'energy_and_gradient', 'energy_gradient_derivative', 'levi_civita_tension',
    'statistical_defect', 'tension', 'bienergy', 'EnergyReport', 'energy_report',
    'VariationFamily', 'FirstVariationReport', 'geodesic_family', 'random_section', 'first_variation_check',
    'FlowResult', 'harmonic_flow', 'default_dt', 'stiffness',
]
