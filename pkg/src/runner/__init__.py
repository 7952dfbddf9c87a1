from .scenario import (
    Scenario, parse_scenario, load_scenario, validate_document, json_pointer,
    ANALYSES, MAP_TYPES, SCENARIO_SCHEMA,
)
from .maps import build_map
from .storage import ReportStorage, to_jsonable, dumps, write_csv
from .runner import RunReport, ScenarioRunner, run, emit_plot_data, mirrored_descriptor
from .suite import run_suite, discover_scenarios

__all__ = [
    'Scenario', 'parse_scenario', 'load_scenario', 'validate_document', 'json_pointer',
    'ANALYSES', 'MAP_TYPES', 'SCENARIO_SCHEMA', 'build_map', 'ReportStorage', 'to_jsonable', 'dumps', 'write_csv',
    'RunReport', 'ScenarioRunner', 'run', 'emit_plot_data', 'mirrored_descriptor',
    'run_suite', 'discover_scenarios',
]
