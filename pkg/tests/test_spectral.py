import unittest
import os
import sys
from unittest.mock import PropertyMock, patch

import numpy as np
from numpy.testing import assert_allclose

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.config import Config
from src.errors import SizeError
from src.geometry import make_manifold
from src.grid import MapField, Section, build_grid
from src.spectral import (
    assemble, eigenvalue_clusters, finite_difference_hessian, gershgorin_lower_bound, harmonicity,
    connection_jacobi_apply, energy_hessian_apply, hessian, hessian_check, integrated_curvature_check, is_variational,
    jacobi_apply, probe_period, quadratic_form_minimum, rayleigh_ritz_oracle, rough_laplacian, spectrum,
    stability_report,
)
from src.variational import harmonic_flow, random_section

CIRCLE = {"type": "flat_torus", "dim": 1}


def great_circle(n):
    grid = build_grid(make_manifold(CIRCLE), n)
    periodic = np.zeros((n, 2))
    periodic[:, 0] = np.pi / 2
    return MapField(grid, make_manifold({"type": "sphere"}), periodic, np.array([[0.0], [1.0]]))


def constant_map(n, target, point):
    grid = build_grid(make_manifold(CIRCLE), n)
    return MapField(grid, make_manifold(target), np.tile(point, (n, 1)))


def normal_loop(n, alpha=0.0):
    grid = build_grid(make_manifold(CIRCLE), n)
    x = grid.points[..., 0]
    periodic = np.stack([0.5 * np.cos(x), 1.0 + 0.3 * np.sin(x)], axis=-1)
    return MapField(grid, make_manifold({"type": "normal_family", "alpha": alpha}), periodic)


class TestJacobiOperator(unittest.TestCase):
    def test_flat_rough_laplacian_is_minus_second_difference(self):
        u = constant_map(64, {"type": "euclidean", "dim": 2}, [0.0, 0.0])
        x = u.grid.points[..., 0]
        h = u.grid.spacing[0]
        V = Section(u, np.stack([np.sin(3 * x), np.zeros(64)], axis=-1))
        assert_allclose(rough_laplacian(u, V).values[:, 0], 4 * np.sin(1.5 * h) ** 2 / h ** 2 * np.sin(3 * x),
                        atol=1e-10)

    def test_great_circle_normal_direction(self):
        """法向常值截面：J V = −V"""
        u = great_circle(32)
        V = Section(u, np.tile([1.0, 0.0], (32, 1)))
        assert_allclose(jacobi_apply(u, V).values, -V.values, atol=1e-12)

    def test_energy_hessian_matches_nodal_formula_on_great_circle(self):
        """赤道大圆上两种离散逐点一致"""
        u = great_circle(64)
        self.assertTrue(is_variational(u))
        V = random_section(u, np.random.default_rng(5))
        assert_allclose(energy_hessian_apply(u, V).values, connection_jacobi_apply(u, V).values, atol=1e-9)

    def test_non_metric_target_uses_nodal_formula(self):
        u = normal_loop(32, alpha=0.8)
        self.assertFalse(is_variational(u))
        V = random_section(u, np.random.default_rng(5))
        assert_allclose(jacobi_apply(u, V).values, connection_jacobi_apply(u, V).values, atol=0.0)

    def test_hessian_matches_finite_differences(self):
        u = great_circle(64)
        rng = np.random.default_rng(7)
        V, W = random_section(u, rng), random_section(u, rng)
        self.assertAlmostEqual(hessian(u, V, W), finite_difference_hessian(u, V, W, 1e-3), delta=1e-5)

    def test_hessian_check_report(self):
        report = hessian_check(great_circle(64), pairs=3, seed=11)
        self.assertTrue(report.passed)
        self.assertTrue(report.harmonic)
        self.assertEqual(len(report.to_dict()["pairs"]), 3)

    def test_harmonicity_gate(self):
        self.assertTrue(harmonicity(great_circle(32))["harmonic"])
        grid = build_grid(make_manifold(CIRCLE), 32)
        x = grid.points[..., 0]
        circle = MapField(grid, make_manifold({"type": "euclidean", "dim": 2}),
                          np.stack([np.cos(x), np.sin(x)], axis=-1))
        with self.assertLogs('src.spectral.jacobi', level='WARNING'):
            self.assertFalse(harmonicity(circle)["harmonic"])

    def test_quadratic_forms(self):
        u = great_circle(32)
        self.assertGreater(integrated_curvature_check(u, samples=10, seed=1), 0.0)
        flat = constant_map(32, {"type": "euclidean", "dim": 2}, [1.0, 2.0])
        self.assertGreaterEqual(quadratic_form_minimum(flat, samples=10, seed=1), -1e-12)


class TestAssembly(unittest.TestCase):
    def test_probe_period(self):
        self.assertEqual(probe_period(64), 4)
        self.assertEqual(probe_period(10), 5)
        self.assertEqual(probe_period(18), 3)
        self.assertEqual(probe_period(14), 7)

    def test_matrix_matches_operator(self):
        u = great_circle(32)
        asm = assemble(u)
        V = random_section(u, np.random.default_rng(0))
        self.assertLess(asm.consistency_residual(V), 1e-10)
        assert_allclose(asm.apply(V).values, jacobi_apply(u, V).values, atol=1e-10)
        self.assertLess(asm.asymmetry, 1e-8)
        self.assertEqual(asm.dof, 64)

    def test_two_dimensional_matrix_matches_operator(self):
        torus = make_manifold({"type": "flat_torus", "dim": 2})
        grid = build_grid(torus, 12)
        u = MapField(grid, torus, 0.1 * grid.smooth_random_field(2, np.random.default_rng(1)), np.eye(2))
        asm = assemble(u)
        V = random_section(u, np.random.default_rng(2))
        self.assertLess(asm.consistency_residual(V), 1e-10)

    def test_curved_levi_civita_loop_is_self_adjoint(self):
        """非常值、非调和的 Gaussian 族圈：Wt·A 仍对称"""
        u = normal_loop(32)
        asm = assemble(u)
        self.assertFalse(asm.harmonic)
        self.assertLess(asm.asymmetry, 1e-12)
        V = random_section(u, np.random.default_rng(3))
        self.assertLess(asm.consistency_residual(V), 1e-12 * max(1.0, float(np.max(np.abs(asm.A)))))

    def test_flowed_normal_family_map_is_self_adjoint(self):
        u = harmonic_flow(normal_loop(32), max_steps=400).map
        asm = assemble(u)
        self.assertLess(asm.asymmetry, 1e-8)
        assert_allclose(asm.Wt @ asm.A, asm.B, atol=1e-10 * float(np.max(np.abs(asm.B))))

    def test_dof_cap(self):
        with patch.object(Config, 'dof_cap', new_callable=PropertyMock, return_value=10):
            with self.assertRaises(SizeError):
                assemble(great_circle(32))


class TestSpectrum(unittest.TestCase):
    def test_great_circle_index_and_nullity(self):
        for n in (128, 256):
            report = spectrum(assemble(great_circle(n)))
            self.assertEqual(report.index, 1, n)
            self.assertEqual(report.nullity, 3, n)
            self.assertEqual(report.verdict, "unstable")
            self.assertAlmostEqual(report.lowest, -1.0, places=10)

    def test_constant_maps(self):
        flat = spectrum(assemble(constant_map(32, {"type": "euclidean", "dim": 3}, [0.0, 0.0, 0.0])))
        self.assertEqual((flat.index, flat.nullity), (0, 3))
        self.assertEqual(flat.verdict, "weakly_stable")
        sphere = spectrum(assemble(constant_map(32, {"type": "sphere"}, [np.pi / 2, 0.0])))
        self.assertEqual((sphere.index, sphere.nullity), (0, 2))

    def test_torus_identity(self):
        torus = make_manifold({"type": "flat_torus", "dim": 2})
        grid = build_grid(torus, 16)
        u = MapField(grid, torus, np.zeros((16, 16, 2)), np.eye(2))
        report = spectrum(assemble(u))
        h = 2 * np.pi / 16
        self.assertEqual((report.index, report.nullity), (0, 2))
        self.assertAlmostEqual(report.smallest_positive, 4 * np.sin(h / 2) ** 2 / h ** 2, places=10)
        self.assertLess(abs(report.smallest_positive - (1 - h ** 2 / 12)), h ** 4 / 300)
        self.assertEqual(report.clusters[0]["multiplicity"], 2)

    def test_report_serialization(self):
        data = spectrum(assemble(great_circle(32))).to_dict()
        for key in ("eigenvalues", "index", "nullity", "asymmetry", "verdict", "harmonicity_gate"):
            self.assertIn(key, data)
        self.assertEqual(len(data["eigenvalues"]), 64)

    def test_clusters(self):
        clusters = eigenvalue_clusters(np.array([-1.0, 0.0, 1e-9, 2.0, 2.0, 2.0]), 1e-6)
        self.assertEqual([c["multiplicity"] for c in clusters], [1, 2, 3])


class TestStability(unittest.TestCase):
    def test_nonpositive_target_route(self):
        u = constant_map(32, {"type": "normal_family"}, [0.0, 1.0])
        report = stability_report(u, samples=10, seed=0, certificate_samples=200)
        self.assertEqual(report["route"], "nonpositive_curvature")
        self.assertEqual(report["verdict"], "weakly_stable")
        self.assertTrue(report["consistent"])
        self.assertTrue(report["quadratic_form_nonnegative"])
        self.assertGreaterEqual(report["quadratic_form_min"], -1e-6)

    def test_negative_quadratic_form_is_flagged(self):
        u = constant_map(32, {"type": "normal_family"}, [0.0, 1.0])
        with patch("src.spectral.assembly.quadratic_form_minimum", return_value=-1e-5):
            report = stability_report(u, samples=10, seed=0, certificate_samples=200)
        self.assertEqual(report["route"], "nonpositive_curvature")
        self.assertFalse(report["quadratic_form_nonnegative"])

    def test_positive_target_uses_spectrum(self):
        report = stability_report(great_circle(128), samples=10, seed=0, certificate_samples=200)
        self.assertEqual(report["route"], "spectrum")
        self.assertEqual(report["verdict"], "unstable")
        self.assertEqual(report["index"], 1)
        self.assertIsNone(report["quadratic_form_nonnegative"])


class TestOracle(unittest.TestCase):
    def test_gershgorin(self):
        C = np.array([[2.0, -1.0], [-1.0, 2.0]])
        self.assertEqual(gershgorin_lower_bound(C), 1.0)

    def test_oracle_agrees_with_dense_solver(self):
        asm = assemble(great_circle(64))
        dense = spectrum(asm).eigenvalues[:5]
        oracle = rayleigh_ritz_oracle(asm.B, asm.Wt, k=5, seed=3)
        assert_allclose(oracle, dense, atol=1e-8)


if __name__ == '__main__':
    unittest.main()
