import copy
import json
import logging
import os
from typing import Dict, Any, List


class Config:
    def __init__(self, config_path: str = "statmap.json"):
        self.config_path = config_path
        self._config: Dict[str, Any] = {}
        self.logger = logging.getLogger(__name__)
        self.load_config()

    def load_config(self) -> None:
        self._config = self.get_default_config()
        if not os.path.exists(self.config_path):
            return
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                overrides = json.load(f)
        except (json.JSONDecodeError, IOError) as e:
            self.logger.error(f"Error loading config {self.config_path}: {e}, using defaults")
            return
        self._merge(self._config, overrides)

    @staticmethod
    def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> None:
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(base.get(key), dict):
                Config._merge(base[key], value)
            else:
                base[key] = value

    def save_config(self) -> None:
        try:
            with open(self.config_path, 'w', encoding='utf-8') as f:
                json.dump(self._config, f, indent=2, ensure_ascii=False)
        except IOError as e:
            self.logger.error(f"Error saving config: {e}")

    def get_default_config(self) -> Dict[str, Any]:
        return copy.deepcopy({
            "numerics": {
                "fd_relative_step": 1e-5,
                "boundary_margin_steps": 2,
                "structural_tolerance": 1e-8,
                "codazzi_tolerance": 1e-6
            },
            "grid": {
                "min_nodes": 8
            },
            "variation": {
                "steps": [1e-2, 5e-3, 2.5e-3, 1.25e-3],
                "min_order": 1.8,
                "tolerance": 1e-6,
                "exact_floor": 1e-10,
                "random_max_mode": 3
            },
            "flow": {
                "dt_factor": 0.2,
                "tol": 1e-6,
                "max_steps": 200000,
                "divergence_window": 50,
                "monotonicity_tolerance": 1e-12,
                "log_every": 2000
            },
            "spectral": {
                "dof_cap": 6000,
                "zero_threshold_rel": 1e-6,
                "cluster_gap_factor": 10.0,
                "harmonicity_gate": 1e-4,
                "certificate_samples": 2000,
                "certificate_tolerance": 1e-10,
                "hessian_tolerance": 1e-4,
                "hessian_step": 1e-3,
                "hessian_pairs": 20,
                "quadratic_form_samples": 200,
                "quadratic_form_tolerance": 1e-6,
                "curvature_source": "connection"
            },
            "runner": {
                "schema_version": 1,
                "out_dir": "reports",
                "jobs": 1
            },
            "logging": {
                "level": "INFO",
                "file": ""
            }
        })

    def get(self, key: str, default: Any = None) -> Any:
        keys = key.split('.')
        value = self._config
        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def set(self, key: str, value: Any, persist: bool = False) -> None:
        keys = key.split('.')
        config = self._config
        for k in keys[:-1]:
            if k not in config:
                config[k] = {}
            config = config[k]
        config[keys[-1]] = value
        if persist:
            self.save_config()

    @property
    def fd_relative_step(self) -> float:
        return self.get("numerics.fd_relative_step", 1e-5)

    @property
    def boundary_margin_steps(self) -> float:
        return self.get("numerics.boundary_margin_steps", 2)

    @property
    def structural_tolerance(self) -> float:
        return self.get("numerics.structural_tolerance", 1e-8)

    @property
    def codazzi_tolerance(self) -> float:
        return self.get("numerics.codazzi_tolerance", 1e-6)

    @property
    def min_nodes(self) -> int:
        return self.get("grid.min_nodes", 8)

    @property
    def variation_steps(self) -> List[float]:
        return list(self.get("variation.steps", [1e-2, 5e-3, 2.5e-3, 1.25e-3]))

    @property
    def variation_min_order(self) -> float:
        return self.get("variation.min_order", 1.8)

    @property
    def variation_tolerance(self) -> float:
        return self.get("variation.tolerance", 1e-6)

    @property
    def variation_exact_floor(self) -> float:
        return self.get("variation.exact_floor", 1e-10)

    @property
    def random_max_mode(self) -> int:
        return self.get("variation.random_max_mode", 3)

    @property
    def flow_dt_factor(self) -> float:
        return self.get("flow.dt_factor", 0.2)

    @property
    def flow_tol(self) -> float:
        return self.get("flow.tol", 1e-6)

    @property
    def flow_max_steps(self) -> int:
        return self.get("flow.max_steps", 200000)

    @property
    def flow_divergence_window(self) -> int:
        return self.get("flow.divergence_window", 50)

    @property
    def flow_monotonicity_tolerance(self) -> float:
        return self.get("flow.monotonicity_tolerance", 1e-12)

    @property
    def flow_log_every(self) -> int:
        return self.get("flow.log_every", 2000)

    @property
    def dof_cap(self) -> int:
        return self.get("spectral.dof_cap", 6000)

    @property
    def zero_threshold_rel(self) -> float:
        return self.get("spectral.zero_threshold_rel", 1e-6)

    @property
    def cluster_gap_factor(self) -> float:
        return self.get("spectral.cluster_gap_factor", 10.0)

    @property
    def harmonicity_gate(self) -> float:
        return self.get("spectral.harmonicity_gate", 1e-4)

    @property
    def certificate_samples(self) -> int:
        return self.get("spectral.certificate_samples", 2000)

    @property
    def certificate_tolerance(self) -> float:
        return self.get("spectral.certificate_tolerance", 1e-10)

    @property
    def hessian_tolerance(self) -> float:
        return self.get("spectral.hessian_tolerance", 1e-4)

    @property
    def hessian_step(self) -> float:
        return self.get("spectral.hessian_step", 1e-3)

    @property
    def hessian_pairs(self) -> int:
        return self.get("spectral.hessian_pairs", 20)

    @property
    def quadratic_form_samples(self) -> int:
        return self.get("spectral.quadratic_form_samples", 200)

    @property
    def quadratic_form_tolerance(self) -> float:
        return self.get("spectral.quadratic_form_tolerance", 1e-6)

    @property
    def curvature_source(self) -> str:
        return self.get("spectral.curvature_source", "connection")

    @property
    def schema_version(self) -> int:
        return self.get("runner.schema_version", 1)

    @property
    def out_dir(self) -> str:
        return self.get("runner.out_dir", "reports")

    @property
    def jobs(self) -> int:
        return self.get("runner.jobs", 1)

    @property
    def thread_cap(self) -> int:
        value = os.environ.get("STATMAP_THREADS", "")
        try:
            return max(1, int(value))
        except ValueError:
            return os.cpu_count() or 1

    @property
    def log_level(self) -> str:
        return self.get("logging.level", "INFO")

    @property
    def log_file(self) -> str:
        return self.get("logging.file", "")


config = Config(os.environ.get("STATMAP_CONFIG", "statmap.json"))
