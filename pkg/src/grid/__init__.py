from .domain_grid import DomainGrid, MapField, Section, build_grid

__all__ = ['DomainGrid', 'MapField', 'Section', 'build_grid']
