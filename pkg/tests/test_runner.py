import unittest
import copy
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import main
from src.errors import ScenarioError
from src.runner import (
    RunReport, build_map, dumps, emit_plot_data, load_scenario, mirrored_descriptor, parse_scenario, run,
    run_suite, write_csv,
)
from src.geometry import make_manifold
from src.grid import build_grid

GREAT_CIRCLE = {
    "version": 1,
    "name": "great_circle",
    "domain": {"type": "flat_torus", "dim": 1},
    "target": {"type": "sphere"},
    "map": {"type": "great_circle", "k": 1},
    "n": 64,
    "analyses": ["spectrum", "tension"],
    "spectral": {"tau_zero": 0.01},
    "expect": {"index": 1, "nullity": 3, "verdict": "unstable",
               "lowest_eigenvalue": {"value": -1.0, "abs_tol": 1e-8}},
}


def scenario_text(**changes):
    data = copy.deepcopy(GREAT_CIRCLE)
    for key, value in changes.items():
        if value is None:
            data.pop(key, None)
        else:
            data[key] = value
    return json.dumps(data)


class TestScenarioParsing(unittest.TestCase):
    def assertPointer(self, text, pointer):
        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(text)
        self.assertEqual(ctx.exception.pointer, pointer)
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_valid_scenario_orders_analyses(self):
        scenario = parse_scenario(scenario_text(analyses=["oracle", "spectrum", "flow"], seed=1))
        self.assertEqual(scenario.analyses, ["flow", "spectrum", "oracle"])
        self.assertEqual(scenario.version, 1)

    def test_pointers(self):
        self.assertPointer(scenario_text(version=None), "/version")
        self.assertPointer(scenario_text(colour="red"), "/colour")
        self.assertPointer(scenario_text(n=33), "/n")
        self.assertPointer(scenario_text(domain={"type": "sphere"}), "/domain/type")
        self.assertPointer(scenario_text(target={"type": "sphere", "alpha": 0.5}), "/target")
        self.assertPointer(scenario_text(analyses=["structure"]), "/seed")
        self.assertPointer(scenario_text(n=4000), "/n")
        self.assertPointer(scenario_text(analyses=["oracle"], seed=0, n=512), "/n")
        self.assertPointer(scenario_text(map={"type": "identity"}), "/map")

    def test_bundled_scenarios_are_valid(self):
        directory = Path(__file__).resolve().parent.parent / "scenarios"
        paths = sorted(directory.glob("*.json"))
        self.assertGreater(len(paths), 0)
        for path in paths:
            scenario = load_scenario(path)
            self.assertEqual(scenario.name, path.stem)

    def test_bundled_scenario_coverage(self):
        """流动得到的 Gaussian 族调和映射至少 10 个；Hessian 检查在 n = 128 上取 20 对"""
        directory = Path(__file__).resolve().parent.parent / "scenarios"
        scenarios = [load_scenario(path) for path in sorted(directory.glob("*.json"))]
        flowed = [s for s in scenarios if s.target["type"] == "normal_family"
                  and {"flow", "spectrum", "stability"} <= set(s.analyses)]
        self.assertGreaterEqual(len({s.seed for s in flowed}), 10)
        for s in scenarios:
            if "hessian_check" in s.analyses:
                self.assertEqual(s.n, 128, s.name)
                self.assertEqual(s.spectral["pairs"], 20, s.name)
        refined = {s.name for s in scenarios if "refinement" in s.analyses}
        for s in scenarios:
            if "spectrum" in s.analyses and s.name not in refined:
                self.assertIn(s.name, ("torus_identity", "normal_family_flow_hessian"))

    def test_invalid_json(self):
        self.assertPointer("{not json", "")

    def test_error_object(self):
        try:
            parse_scenario(scenario_text(n=33))
        except ScenarioError as e:
            data = e.to_dict()
        self.assertEqual(data["type"], "ScenarioError")
        self.assertEqual(data["pointer"], "/n")


class TestMaps(unittest.TestCase):
    def test_fourier_and_perturbation(self):
        grid = build_grid(make_manifold({"type": "flat_torus", "dim": 1}), 32)
        target = make_manifold({"type": "normal_family"})
        descriptor = {"type": "fourier", "base": [0.0, 1.0],
                      "modes": [{"k": 1, "cos": [0.5, 0.0], "sin": [0.0, 0.2]}],
                      "perturbation": {"amplitude": 0.01}}
        a = build_map(descriptor, grid, target, np.random.default_rng(3))
        b = build_map(descriptor, grid, target, np.random.default_rng(3))
        np.testing.assert_allclose(a.values, b.values)
        self.assertAlmostEqual(float(np.mean(a.values[:, 1])), 1.0, delta=0.05)

    def test_circle_embed(self):
        grid = build_grid(make_manifold({"type": "flat_torus", "dim": 1}), 16)
        u = build_map({"type": "circle_embed", "k": 2, "radius": 2.0}, grid,
                      make_manifold({"type": "euclidean", "dim": 2}))
        np.testing.assert_allclose(np.linalg.norm(u.values, axis=-1), 2.0)

    def test_mirrored_descriptor(self):
        self.assertEqual(mirrored_descriptor({"type": "normal_family", "alpha": 0.5})["alpha"], -0.5)
        mirrored = mirrored_descriptor({"type": "simplex", "connection": {"kind": "alpha", "alpha": 1.0}})
        self.assertEqual(mirrored["connection"]["alpha"], -1.0)
        self.assertIsNone(mirrored_descriptor({"type": "sphere"}))


class TestRun(unittest.TestCase):
    def test_great_circle_report(self):
        with tempfile.TemporaryDirectory() as tmp:
            report = run(parse_scenario(scenario_text()), tmp)
            self.assertTrue(report.passed, report.data["assertions"])
            self.assertEqual(report.exit_code, 0)
            out = Path(tmp) / "great_circle"
            for name in ("report.json", "timing.json", "eigenvalues.csv", "spectrum.csv"):
                self.assertTrue((out / name).exists(), name)
            saved = json.loads((out / "report.json").read_text(encoding='utf-8'))
            self.assertEqual(saved["results"]["spectrum"]["index"], 1)
            self.assertNotIn("total_seconds", saved)
            lines = (out / "eigenvalues.csv").read_text(encoding='utf-8').splitlines()
            self.assertEqual(len(lines), 128)
            self.assertAlmostEqual(float(lines[0]), -1.0, places=8)

    def test_reports_are_deterministic(self):
        text = scenario_text(analyses=["structure", "first_variation", "spectrum"], seed=4,
                             variation={"tolerance": 1e-4})
        first = run(parse_scenario(text))
        second = run(parse_scenario(text))
        self.assertEqual(dumps(first.data), dumps(second.data))
        self.assertTrue(first.passed, first.data["assertions"])

    def test_failed_expectation_exit_code(self):
        expect = dict(GREAT_CIRCLE["expect"], index=0)
        report = run(parse_scenario(scenario_text(expect=expect)))
        self.assertFalse(report.passed)
        self.assertEqual(report.exit_code, 2)
        failed = [a["name"] for a in report.data["assertions"] if not a["passed"]]
        self.assertEqual(failed, ["expect_index"])

    def test_numeric_error_is_reported(self):
        text = scenario_text(target={"type": "sphere"}, map={"type": "constant", "point": [4.0, 0.0]},
                             analyses=["energy"], expect=None)
        report = run(parse_scenario(text))
        self.assertEqual(report.exit_code, 4)
        self.assertEqual(report.data["error"]["type"], "DomainViolationError")

    def test_statistical_structure_and_variation(self):
        text = json.dumps({
            "version": 1,
            "name": "normal_loop",
            "domain": {"type": "flat_torus", "dim": 1},
            "target": {"type": "normal_family", "alpha": 0.5},
            "map": {"type": "fourier", "base": [0.0, 1.0], "modes": [{"k": 1, "cos": [0.2, 0.0]}]},
            "n": 16,
            "seed": 2,
            "analyses": ["structure", "first_variation", "energy"],
            "variation": {"tolerance": 1e-3},
        })
        report = run(parse_scenario(text))
        self.assertTrue(report.passed, report.data["assertions"])
        names = {a["name"] for a in report.data["assertions"]}
        self.assertIn("alpha_duality", names)
        self.assertIn("first_variation", names)
        self.assertIn("first_variation", report.series)

    def test_refinement_and_oracle(self):
        text = scenario_text(analyses=["spectrum", "refinement", "oracle"], seed=0, n=32)
        report = run(parse_scenario(text))
        self.assertTrue(report.passed, report.data["assertions"])
        self.assertEqual([level["n"] for level in report.data["results"]["refinement"]["levels"]], [32, 64])

    def test_emit_plot_data_without_series(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(emit_plot_data(RunReport("empty", {}, {}), tmp), [])

    def test_csv_rows_are_plain_numbers(self):
        """numpy 标量按普通浮点写出"""
        with tempfile.TemporaryDirectory() as tmp:
            rows = [[np.float64(5.2816251476417804e-14)], [np.float64(-1.0)]]
            path = write_csv(Path(tmp) / "values.csv", None, rows)
            self.assertEqual(path.read_text(encoding='utf-8'), "5.2816251476417804e-14\n-1.0\n")

    def test_constant_sphere_csv_artifacts(self):
        text = scenario_text(name="constant_sphere", map={"type": "constant", "point": [np.pi / 2, 0.0]},
                             analyses=["energy", "spectrum"], n=32, spectral=None,
                             expect={"index": 0, "nullity": 2})
        with tempfile.TemporaryDirectory() as tmp:
            report = run(parse_scenario(text), tmp)
            self.assertTrue(report.passed, report.data["assertions"])
            out = Path(tmp) / "constant_sphere"
            eigenvalues = [float(line) for line in (out / "eigenvalues.csv").read_text(encoding='utf-8').splitlines()]
            self.assertEqual(len(eigenvalues), 64)
            self.assertEqual(eigenvalues, sorted(eigenvalues))
            lines = (out / "spectrum.csv").read_text(encoding='utf-8').splitlines()
            self.assertEqual(lines[0], "rank,eigenvalue")
            rank, value = lines[1].split(",")
            self.assertEqual(int(rank), 1)
            self.assertEqual(float(value), eigenvalues[0])

    def test_flow_runs_before_energy_and_tension(self):
        text = json.dumps({
            "version": 1,
            "name": "flowed_identity",
            "domain": {"type": "flat_torus", "dim": 1},
            "target": {"type": "flat_torus", "dim": 1},
            "map": {"type": "identity", "perturbation": {"amplitude": 0.1, "max_mode": 3}},
            "n": 16,
            "seed": 7,
            "analyses": ["energy", "tension", "flow"],
            "flow": {"tol": 1e-8},
        })
        report = run(parse_scenario(text))
        self.assertTrue(report.passed, report.data["assertions"])
        results = report.data["results"]
        self.assertEqual(list(results), ["flow", "tension", "energy"])
        self.assertTrue(results["energy"]["converged"])
        self.assertAlmostEqual(results["energy"]["E"], results["flow"]["energy"], places=12)
        self.assertLess(results["tension"]["tension_sup"], 1e-8)


class TestSuiteAndCli(unittest.TestCase):
    def test_suite_takes_worst_exit_code(self):
        with tempfile.TemporaryDirectory() as tmp:
            scenarios = Path(tmp) / "scenarios"
            scenarios.mkdir()
            (scenarios / "good.json").write_text(scenario_text(name="good"), encoding='utf-8')
            (scenarios / "bad.json").write_text(scenario_text(name="bad", n=33), encoding='utf-8')
            result = run_suite(scenarios, Path(tmp) / "out", jobs=2)
            self.assertEqual(result["total_scenarios"], 2)
            self.assertEqual(result["successful"], 1)
            self.assertEqual(result["invalid"], 1)
            self.assertEqual(result["exit_code"], 3)
            self.assertTrue((Path(tmp) / "out" / "suite_report.json").exists())

    def test_cli_check_and_run(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "great_circle.json"
            path.write_text(scenario_text(), encoding='utf-8')
            self.assertEqual(main.main(["check", str(path)]), 0)
            self.assertEqual(main.main(["run", str(path), "--out", str(Path(tmp) / "out")]), 0)
            path.write_text(scenario_text(n=33), encoding='utf-8')
            self.assertEqual(main.main(["check", str(path)]), 3)

    def test_run_passes_jobs_through(self):
        """jobs 只改变并行度，报告逐字节相同"""
        text = scenario_text(analyses=["hessian_check", "spectrum"], seed=5, spectral={"tau_zero": 0.01, "pairs": 4})
        self.assertEqual(dumps(run(parse_scenario(text), jobs=3).data), dumps(run(parse_scenario(text)).data))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "great_circle.json"
            path.write_text(text, encoding='utf-8')
            self.assertEqual(main.build_parser().parse_args(["run", str(path), "--jobs", "2"]).jobs, 2)
            self.assertEqual(main.main(["run", str(path), "--out", str(Path(tmp) / "out"), "--jobs", "2"]), 0)


if __name__ == '__main__':
    unittest.main()
