import logging
import time
from copy import deepcopy
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ..config import config
from ..errors import StatmapError
from ..geometry import (
    ChartManifold, codazzi_residual, curvature, curvature_norm, dual_connection, dual_manifold,
    duality_residual, lowered_curvature, make_manifold, nonpositivity_certificate, trace_K_divergence,
)
from ..grid import MapField, Section, build_grid
from ..spectral import (
    assemble, hessian_check, rayleigh_ritz_oracle, spectrum, stability_report,
)
from ..variational import (
    energy_report, first_variation_check, geodesic_family, harmonic_flow, random_section, statistical_defect,
    VariationFamily,
)
from .maps import build_map
from .scenario import SEED_STREAMS, Scenario
from .storage import ReportStorage, to_jsonable, write_csv


class RunReport:
    def __init__(self, name: str, data: Dict[str, Any], timing: Dict[str, Any],
                 series: Optional[Dict[str, List[List[Any]]]] = None):
        self.name = name
        self.data = data
        self.timing = timing
        self.series = series or {}

    @property
    def exit_code(self) -> int:
        return self.data["exit_code"]

    @property
    def passed(self) -> bool:
        return self.data["passed"]

    def write(self, out_dir: Optional[Union[str, Path]] = None) -> List[Path]:
        storage = ReportStorage(str(out_dir) if out_dir else None)
        paths = [
            storage.save_json(self.name, "report.json", self.data),
            storage.save_json(self.name, "timing.json", self.timing),
        ]
        if "spectrum" in self.series:
            paths.append(storage.save_csv(self.name, "eigenvalues.csv", None,
                                          ([value] for _, value in self.series["spectrum"])))
        paths.extend(emit_plot_data(self, storage.get_scenario_dir(self.name)))
        return paths


PLOT_SERIES = {
    "spectrum": ("spectrum.csv", ["rank", "eigenvalue"]),
    "first_variation": ("first_variation.csv", ["h", "residual", "order"]),
    "flow": ("flow.csv", ["step", "energy", "tension_sup"]),
}


def emit_plot_data(report: RunReport, path: Union[str, Path]) -> List[Path]:
    """把谱与收敛序列写成 CSV；没有序列时不写文件"""
    path = Path(path)
    return [write_csv(path / filename, header, report.series[key])
            for key, (filename, header) in PLOT_SERIES.items() if report.series.get(key)]


def _approx(actual: Optional[float], expected: Dict[str, float]) -> bool:
    if actual is None:
        return False
    tolerance = max(expected.get("abs_tol", 0.0), expected.get("rel_tol", 0.0) * abs(expected["value"]))
    if "abs_tol" not in expected and "rel_tol" not in expected:
        tolerance = 1e-6 * max(1.0, abs(expected["value"]))
    return abs(actual - expected["value"]) <= tolerance


def mirrored_descriptor(descriptor: Dict[str, Any]) -> Optional[Dict[str, Any]]:
    """α → −α 的描述符；没有 α 结构时返回 None"""
    mirror = deepcopy(descriptor)
    connection = mirror.get("connection") or {}
    if connection.get("kind") == "alpha":
        connection["alpha"] = -float(connection.get("alpha", mirror.get("alpha", 0.0)))
        return mirror
    if descriptor.get("type") in ("normal_family", "simplex") and connection.get("kind") is None:
        mirror["alpha"] = -float(mirror.get("alpha", 0.0))
        return mirror
    return None


class ScenarioRunner:
    def __init__(self, scenario: Scenario, base_dir: Optional[Path] = None, jobs: int = 1):
        self.scenario = scenario
        self.base_dir = base_dir
        self.jobs = max(1, jobs)
        self.logger = logging.getLogger(__name__)
        self.results: Dict[str, Any] = {}
        self.assertions: List[Dict[str, Any]] = []
        self.series: Dict[str, List[List[Any]]] = {}
        self.timing: Dict[str, float] = {}
        self.flow_converged: Optional[bool] = None
        self._spectrum = None
        self._assembly = None
        self._stability = None

    # ---------------------------------------------------------------- helpers

    def seed_for(self, analysis: str) -> int:
        sequence = np.random.SeedSequence([self.scenario.seed or 0, SEED_STREAMS.index(analysis)])
        return int(sequence.generate_state(1)[0])

    def rng_for(self, analysis: str) -> np.random.Generator:
        return np.random.default_rng(self.seed_for(analysis))

    def check(self, name: str, passed: bool, **detail: Any) -> None:
        self.assertions.append({"name": name, "passed": bool(passed), **detail})
        if not passed:
            self.logger.warning(f"{self.scenario.name}: assertion {name} failed {detail}")

    def build(self, n: int) -> MapField:
        grid = build_grid(self.domain, n)
        rng = np.random.default_rng(self.seed_for("flow") + 1) if self.scenario.seed is not None else None
        return build_map(self.scenario.map, grid, self.target, rng, self.base_dir)

    # ---------------------------------------------------------------- analyses

    def structure(self) -> Dict[str, Any]:
        m = self.target
        points = m.sample(self.rng_for("structure"), 100)
        riemann = curvature(m, points)
        r_scale = max(1.0, float(np.max(np.abs(riemann))))
        norms = curvature_norm(m, points)
        involution = dual_connection(dual_manifold(m), points) - m.connection(points)
        result = {
            "manifold": m.name,
            "levi_civita": m.is_levi_civita,
            "codazzi_residual": codazzi_residual(m, points),
            "duality_residual": duality_residual(m, points),
            "involution_residual": float(np.max(np.abs(involution))),
            "antisymmetry_residual": float(np.max(np.abs(riemann + np.swapaxes(riemann, -3, -2)))) / r_scale,
            "max_curvature_norm": float(np.max(norms)),
            "domain_codazzi_residual": codazzi_residual(self.domain, self.domain.sample(self.rng_for("structure"), 16)),
        }
        tolerance = config.structural_tolerance if m.metric.analytic_derivative else config.codazzi_tolerance
        self.check("codazzi", result["codazzi_residual"] <= tolerance, value=result["codazzi_residual"])
        self.check("duality_pairing", result["duality_residual"] <= 1e-8, value=result["duality_residual"])
        self.check("duality_involution", result["involution_residual"] <= 1e-10, value=result["involution_residual"])
        self.check("curvature_antisymmetry", result["antisymmetry_residual"] <= 1e-8,
                   value=result["antisymmetry_residual"])

        if m.is_levi_civita:
            lowered = lowered_curvature(m, points)
            scale = max(1.0, float(np.max(np.abs(lowered))))
            pair = float(np.max(np.abs(lowered - np.einsum('...mijk->...jkmi', lowered)))) / scale
            result["pair_symmetry_residual"] = pair
            self.check("pair_symmetry", pair <= 1e-8, value=pair)

        mirror_spec = mirrored_descriptor(self.scenario.target)
        if mirror_spec is not None:
            mirror = make_manifold(mirror_spec)
            gap = float(np.max(np.abs(curvature_norm(mirror, points) - norms)))
            dual_gap = float(np.max(np.abs(dual_connection(m, points) - mirror.connection(points))))
            result["alpha_norm_gap"] = gap
            result["alpha_dual_residual"] = dual_gap
            self.check("alpha_curvature_norm", gap <= 1e-8 * max(1.0, float(np.max(norms))), value=gap)
            self.check("alpha_duality", dual_gap <= 1e-10, value=dual_gap)
        return result

    def tension(self) -> Dict[str, Any]:
        report = energy_report(self.u)
        defect = statistical_defect(self.u)
        return {
            "tension_sup": report.tension_sup,
            "statistical_defect_sup": defect.sup_norm(),
            "domain_trace_divergence_sup": float(np.max(np.abs(trace_K_divergence(self.domain, self.u.grid)))),
            "levi_civita": bool(self.target.is_levi_civita and self.domain.is_levi_civita),
        }

    def energy(self) -> Dict[str, Any]:
        return energy_report(self.u, self.flow_converged).to_dict()

    def first_variation(self) -> Dict[str, Any]:
        options = self.scenario.variation
        rng = self.rng_for("first_variation")
        direction = options.get("direction", "random")
        if direction == "random":
            V = random_section(self.u, rng)
        else:
            V = Section(self.u, np.broadcast_to(np.asarray(direction, dtype=float), self.u.periodic.shape))
        if options.get("family", "linear") == "geodesic":
            family = geodesic_family(self.u, V)
        else:
            family = VariationFamily(self.u, V)
        report = first_variation_check(family, options.get("steps"))
        tolerance = options.get("tolerance", config.variation_tolerance)
        min_order = options.get("min_order", config.variation_min_order)
        exact = report.order == float("inf")
        passed = exact or (report.order >= min_order and report.relative_residuals[-1] <= tolerance)
        self.check("first_variation", passed, order=report.order, relative_residual=report.relative_residuals[-1])
        self.series["first_variation"] = [[h, r, o] for h, r, o in zip(report.steps, report.residuals, report.orders)]
        return report.to_dict()

    def flow(self) -> Dict[str, Any]:
        options = self.scenario.flow
        result = harmonic_flow(self.u, options.get("dt"), options.get("tol"), options.get("max_steps"))
        self.u = result.map
        self.flow_converged = result.converged
        self.check("flow_converged", result.converged, tension_sup=result.tension_sup, steps=result.steps)
        if result.monotone is not None:
            self.check("flow_monotone", result.monotone)
        self.series["flow"] = [[h["step"], h["energy"], h["tension_sup"]] for h in result.history]
        return result.to_dict()

    def hessian_check(self) -> Dict[str, Any]:
        options = self.scenario.spectral
        report = hessian_check(self.u, options.get("pairs"), self.seed_for("hessian_check"),
                               options.get("step"), options.get("tolerance"), self.jobs)
        self.check("hessian_identity", report.passed, max_residual=report.max_residual)
        self.check("harmonicity_gate", report.harmonic, tension_sup=report.tension_sup)
        return report.to_dict()

    def assembly(self):
        if self._assembly is None:
            self._assembly = assemble(self.u)
            V = random_section(self.u, np.random.default_rng(self.seed_for("spectrum")))
            residual = self._assembly.consistency_residual(V)
            scale = max(1.0, float(np.max(np.abs(self._assembly.A))))
            self.check("assembly_consistency", residual <= 1e-12 * scale, value=residual)
        return self._assembly

    def spectrum(self) -> Dict[str, Any]:
        asm = self.assembly()
        self._spectrum = spectrum(asm, self.scenario.spectral.get("tau_zero"))
        if self.target.is_levi_civita:
            tolerance = self.scenario.spectral.get("asymmetry_tolerance", 1e-8)
            self.check("self_adjoint", asm.asymmetry < tolerance, asymmetry=asm.asymmetry)
        self.series["spectrum"] = [[rank, value] for rank, value in enumerate(self._spectrum.eigenvalues, 1)]
        return self._spectrum.to_dict()

    def stability(self) -> Dict[str, Any]:
        options = self.scenario.spectral
        report = stability_report(self.u, options.get("samples"), self.seed_for("stability"),
                                  options.get("certificate_samples"), options.get("tau_zero"), self.jobs)
        self._stability = report
        if self._spectrum is None:
            self._spectrum = report["spectrum"]
            self.series["spectrum"] = [[rank, value] for rank, value in enumerate(self._spectrum.eigenvalues, 1)]
        self.check("stability_consistent", report["consistent"], route=report["route"], advice=report["advice"])
        if report["quadratic_form_nonnegative"] is not None:
            self.check("quadratic_form_nonnegative", report["quadratic_form_nonnegative"],
                       value=report["quadratic_form_min"])
        result = dict(report)
        result.pop("spectrum")
        return result

    def refinement(self) -> Dict[str, Any]:
        tau_zero = self.scenario.spectral.get("tau_zero")
        levels = []
        for n in (self.scenario.n, 2 * self.scenario.n):
            if n == self.scenario.n and self._spectrum is not None:
                report = self._spectrum
            else:
                u = self.build(n)
                if "flow" in self.scenario.analyses:
                    options = self.scenario.flow
                    u = harmonic_flow(u, None, options.get("tol"), options.get("max_steps")).map
                report = spectrum(assemble(u), tau_zero)
            levels.append({"n": n, "index": report.index, "nullity": report.nullity})
        stable = levels[0]["index"] == levels[1]["index"] and levels[0]["nullity"] == levels[1]["nullity"]
        self.check("refinement_stable", stable, levels=levels)
        return {"levels": levels, "stable": stable}

    def oracle(self) -> Dict[str, Any]:
        asm = self.assembly()
        report = self._spectrum or spectrum(asm, self.scenario.spectral.get("tau_zero"))
        k = min(self.scenario.spectral.get("oracle_k", 5), asm.dof)
        tolerance = self.scenario.spectral.get("oracle_tolerance", 1e-6)
        oracle = rayleigh_ritz_oracle(asm.B, asm.Wt, k, self.seed_for("oracle"))
        dense = report.eigenvalues[:k]
        gaps = np.abs(oracle - dense) / np.maximum(1.0, np.abs(dense))
        self.check("oracle_agreement", float(np.max(gaps)) <= tolerance, max_gap=float(np.max(gaps)))
        return {"k": k, "dense": dense.tolist(), "oracle": oracle.tolist(), "max_gap": float(np.max(gaps))}

    # ---------------------------------------------------------------- expectations

    def expectations(self) -> None:
        expect = self.scenario.expect
        if not expect:
            return
        spectral = self._spectrum
        verdict = self._stability["verdict"] if self._stability else (spectral.verdict if spectral else None)
        if "index" in expect:
            self.check("expect_index", spectral is not None and spectral.index == expect["index"],
                       actual=spectral.index if spectral else None, expected=expect["index"])
        if "index_min" in expect:
            self.check("expect_index_min", spectral is not None and spectral.index >= expect["index_min"],
                       actual=spectral.index if spectral else None, expected=expect["index_min"])
        if "nullity" in expect:
            self.check("expect_nullity", spectral is not None and spectral.nullity == expect["nullity"],
                       actual=spectral.nullity if spectral else None, expected=expect["nullity"])
        if "verdict" in expect:
            self.check("expect_verdict", verdict == expect["verdict"], actual=verdict, expected=expect["verdict"])
        for key, actual in (("lowest_eigenvalue", spectral.lowest if spectral else None),
                            ("smallest_positive_eigenvalue", spectral.smallest_positive if spectral else None)):
            if key in expect:
                self.check(f"expect_{key}", _approx(actual, expect[key]), actual=actual, expected=expect[key])
        if "energy" in expect or "bienergy" in expect:
            report = energy_report(self.u)
            for key, actual in (("energy", report.E), ("bienergy", report.E2)):
                if key in expect:
                    self.check(f"expect_{key}", _approx(actual, expect[key]), actual=actual, expected=expect[key])
        if "certificate_nonpositive" in expect:
            if self._stability is not None:
                certificate = self._stability["certificate"]
            else:
                certificate = nonpositivity_certificate(self.target, self.scenario.spectral.get("certificate_samples"),
                                                        self.seed_for("stability"))
            self.check("expect_certificate_nonpositive",
                       certificate["nonpositive"] == expect["certificate_nonpositive"],
                       max_normalized_curvature=certificate["max_normalized_curvature"])
        if "max_curvature_norm" in expect:
            actual = self.results.get("structure", {}).get("max_curvature_norm")
            self.check("expect_max_curvature_norm", actual is not None and actual <= expect["max_curvature_norm"],
                       actual=actual, expected=expect["max_curvature_norm"])

    # ---------------------------------------------------------------- driver

    def run(self) -> RunReport:
        scenario = self.scenario
        started = time.perf_counter()
        error = None
        exit_code = 0
        try:
            self.domain: ChartManifold = make_manifold(scenario.domain)
            self.target: ChartManifold = make_manifold(scenario.target)
            self.u = self.build(scenario.n)
            for idx, analysis in enumerate(scenario.analyses, 1):
                self.logger.info(f"[{idx}/{len(scenario.analyses)}] {scenario.name}: running {analysis}")
                tick = time.perf_counter()
                self.results[analysis] = getattr(self, analysis)()
                self.timing[analysis] = time.perf_counter() - tick
            self.expectations()
        except StatmapError as e:
            error = e.to_dict()
            exit_code = e.exit_code
            self.logger.error(f"{scenario.name}: {type(e).__name__}: {e}")
        except Exception as e:
            error = {"type": type(e).__name__, "message": str(e), "exit_code": 4}
            exit_code = 4
            self.logger.exception(f"{scenario.name}: unexpected failure")

        passed = error is None and all(a["passed"] for a in self.assertions)
        if error is None and not passed:
            exit_code = 2
        data = {
            "schema_version": config.schema_version,
            "name": scenario.name,
            "scenario": scenario.raw,
            "results": self.results,
            "assertions": self.assertions,
            "passed": passed,
            "exit_code": exit_code,
            "error": error,
        }
        timing = {
            "started_at": datetime.now().isoformat(timespec='seconds'),
            "analyses": self.timing,
            "total_seconds": time.perf_counter() - started,
        }
        self.logger.info(f"{scenario.name}: passed={passed}, exit code {exit_code}")
        return RunReport(scenario.name, to_jsonable(data), timing, self.series)


def run(scenario: Scenario, out_dir: Optional[Union[str, Path]] = None,
        base_dir: Optional[Path] = None, jobs: int = 1) -> RunReport:
    report = ScenarioRunner(scenario, base_dir, jobs).run()
    if out_dir is not None:
        report.write(out_dir)
    return report
