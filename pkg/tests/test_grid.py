import unittest
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose
from scipy.special import i0

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.errors import ConfigurationError, DomainViolationError, NonPeriodicFieldError
from src.geometry import make_manifold
from src.grid import MapField, Section, build_grid

CIRCLE = {"type": "flat_torus", "dim": 1}


class TestDomainGrid(unittest.TestCase):
    def setUp(self):
        self.circle = make_manifold(CIRCLE)

    def test_build_grid_validation(self):
        with self.assertRaises(ConfigurationError):
            build_grid(self.circle, 33)
        with self.assertRaises(ConfigurationError):
            build_grid(self.circle, 4)
        with self.assertRaises(ConfigurationError):
            build_grid(make_manifold({"type": "euclidean", "dim": 1}), 32)
        with self.assertRaises(ConfigurationError):
            build_grid(self.circle, 32, lengths=[1.0])

    def test_central_difference_of_sine(self):
        grid = build_grid(self.circle, 256)
        x = grid.points[..., 0]
        h = grid.spacing[0]
        derivative = grid.partial(np.sin(x), 0)
        assert_allclose(derivative, np.cos(x) * np.sin(h) / h, atol=1e-12)
        self.assertLess(np.max(np.abs(derivative - np.cos(x))), 4e-4)

    def test_second_difference_is_narrow(self):
        grid = build_grid(self.circle, 64)
        x = grid.points[..., 0]
        h = grid.spacing[0]
        assert_allclose(grid.second(np.sin(3 * x), 0), -np.sin(3 * x) * 4 * np.sin(1.5 * h) ** 2 / h ** 2,
                        atol=1e-10)

    def test_one_sided_differences_average_to_central(self):
        grid = build_grid(make_manifold({"type": "flat_torus", "dim": 2}), 16)
        field = np.cos(grid.points[..., 0]) * np.sin(2 * grid.points[..., 1])
        for axis in (0, 1):
            assert_allclose(0.5 * (grid.forward(field, axis) + grid.backward(field, axis)),
                            grid.partial(field, axis), atol=1e-13)

    def test_quadrature(self):
        grid = build_grid(self.circle, 32)
        x = grid.points[..., 0]
        self.assertAlmostEqual(grid.integrate(np.ones(grid.shape)), 2 * np.pi, places=12)
        self.assertAlmostEqual(grid.integrate(np.cos(x) ** 2), np.pi, places=12)
        with self.assertRaises(ConfigurationError):
            grid.integrate(np.ones(31))

    def test_conformal_volume(self):
        domain = make_manifold({"type": "flat_torus", "dim": 1, "metric": {"conformal_amplitude": 0.1}})
        grid = build_grid(domain, 32)
        self.assertAlmostEqual(grid.volume, 2 * np.pi * i0(0.1), places=12)

    def test_two_dimensional_weights(self):
        domain = make_manifold({"type": "flat_torus", "dim": 2, "lengths": [1.0, 2.0]})
        grid = build_grid(domain, 16)
        self.assertEqual(grid.points.shape, (16, 16, 2))
        self.assertAlmostEqual(grid.volume, 2.0, places=12)
        self.assertEqual(grid.node_count, 256)

    def test_smoothness_diagnostic(self):
        grid = build_grid(self.circle, 32)
        x = grid.points[..., 0]
        self.assertTrue(grid.is_periodic_smooth(np.sin(x), 0))
        self.assertFalse(grid.is_periodic_smooth(x, 0))
        with self.assertRaises(NonPeriodicFieldError):
            grid.partial(x, 0, check_smoothness=True)

    def test_smooth_random_field_is_seeded(self):
        grid = build_grid(self.circle, 32)
        a = grid.smooth_random_field(2, np.random.default_rng(5))
        b = grid.smooth_random_field(2, np.random.default_rng(5))
        self.assertEqual(a.shape, (32, 2))
        assert_allclose(a, b)
        self.assertTrue(grid.is_periodic_smooth(a[..., 0], 0))


class TestMapField(unittest.TestCase):
    def setUp(self):
        self.grid = build_grid(make_manifold(CIRCLE), 32)
        self.plane = make_manifold({"type": "euclidean", "dim": 2})

    def test_winding_slope(self):
        target = make_manifold(CIRCLE)
        u = MapField(self.grid, target, np.zeros((32, 1)), slope=np.eye(1))
        assert_allclose(u.values[..., 0], self.grid.points[..., 0])
        assert_allclose(u.derivative(0), np.ones((32, 1)))
        self.assertEqual(u.dof, 32)

    def test_shape_and_box_checks(self):
        with self.assertRaises(ConfigurationError):
            MapField(self.grid, self.plane, np.zeros((32, 3)))
        sphere = make_manifold({"type": "sphere"})
        periodic = np.zeros((32, 2))
        periodic[:, 0] = 4.0
        with self.assertRaises(DomainViolationError):
            MapField(self.grid, sphere, periodic)

    def test_target_geometry_is_cached_at_values(self):
        normal = make_manifold({"type": "normal_family"})
        periodic = np.tile([0.0, 2.0], (32, 1))
        u = MapField(self.grid, normal, periodic)
        assert_allclose(u.metric[0], np.diag([0.25, 0.5]))
        self.assertIs(u.metric, u.metric)

    def test_csv_layout(self):
        x = self.grid.points[..., 0]
        u = MapField(self.grid, self.plane, np.stack([np.cos(x), np.sin(x)], axis=-1))
        V = Section(u, np.stack([-np.sin(x), np.cos(x)], axis=-1))
        with tempfile.TemporaryDirectory() as tmp:
            u.to_csv(Path(tmp) / "u.csv")
            V.to_csv(Path(tmp) / "v.csv")
            header = (Path(tmp) / "u.csv").read_text(encoding='utf-8').splitlines()[0]
            self.assertEqual(header, "i0,u0,u1")
            loaded = MapField.from_csv(Path(tmp) / "u.csv", self.grid, self.plane)
            section = Section.from_csv(Path(tmp) / "v.csv", loaded)
        assert_allclose(loaded.values, u.values, rtol=0, atol=0)
        assert_allclose(section.values, V.values, rtol=0, atol=0)

    def test_csv_with_missing_nodes(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "u.csv"
            path.write_text("i0,u0,u1\n0,1.0,0.0\n", encoding='utf-8')
            with self.assertRaises(ConfigurationError):
                MapField.from_csv(path, self.grid, self.plane)


class TestSection(unittest.TestCase):
    def setUp(self):
        self.grid = build_grid(make_manifold(CIRCLE), 32)
        self.u = MapField(self.grid, make_manifold({"type": "euclidean", "dim": 2}), np.zeros((32, 2)))

    def test_algebra_and_norms(self):
        V = Section(self.u, np.tile([1.0, 0.0], (32, 1)))
        W = Section(self.u, np.tile([0.0, 2.0], (32, 1)))
        self.assertAlmostEqual(V.inner(W), 0.0)
        self.assertAlmostEqual((V + W).inner(V + W), 5 * 2 * np.pi, places=10)
        self.assertAlmostEqual((2.0 * V).norm(), 2 * np.sqrt(2 * np.pi), places=10)
        self.assertAlmostEqual((-W).sup_norm(), 2.0)
        assert_allclose((V - V).values, 0.0)

    def test_flat_round_trip(self):
        V = Section(self.u, self.grid.smooth_random_field(2, np.random.default_rng(0)))
        assert_allclose(Section.from_flat(self.u, V.flatten()).values, V.values)
        with self.assertRaises(ConfigurationError):
            Section(self.u, np.zeros((31, 2)))


if __name__ == '__main__':
    unittest.main()
