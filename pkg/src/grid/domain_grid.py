"""
周期网格：平环面坐标卡上的差分、求积与场容器
"""

import csv
import logging
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..config import config
from ..errors import ConfigurationError, NonPeriodicFieldError
from ..geometry import ChartManifold, difference_tensor, riemann_from_christoffel

logger = logging.getLogger(__name__)


class DomainGrid:
    def __init__(self, domain: ChartManifold, n: int, lengths: Sequence[float]):
        self.domain = domain
        self.dim = domain.dim
        self.n = n
        self.lengths = np.asarray(lengths, dtype=float)
        self.spacing = self.lengths / n
        self.shape = (n,) * self.dim

        axes = [np.arange(n) * h for h in self.spacing]
        self.points = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)

        g = domain.metric(self.points)
        off_diagonal = g - np.einsum('...ii->...i', g)[..., None] * np.eye(self.dim)
        if np.max(np.abs(off_diagonal)) > 1e-12 * np.max(np.abs(g)):
            raise ConfigurationError(f"domain metric of {domain.name} must be diagonal")
        self.metric = g
        self.inverse_diagonal = 1.0 / np.einsum('...ii->...i', g)
        self.christoffel = domain.connection(self.points)
        self.sqrt_det = np.sqrt(np.prod(np.einsum('...ii->...i', g), axis=-1))
        self.weights = np.prod(self.spacing) * self.sqrt_det

        # Σ_i g^{ii} Γ^k_ii
        diagonal = np.einsum('...kii->...ki', self.christoffel)
        self.christoffel_trace = np.einsum('...i,...ki->...k', self.inverse_diagonal, diagonal)
        if domain.is_levi_civita:
            self.difference_trace = np.zeros(self.shape + (self.dim,))
        else:
            k_diagonal = np.einsum('...kii->...ki', difference_tensor(domain, self.points))
            self.difference_trace = np.einsum('...i,...ki->...k', self.inverse_diagonal, k_diagonal)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return float(np.sum(self.weights))

    def _check_axis(self, axis: int) -> None:
        if not 0 <= axis < self.dim:
            raise ConfigurationError(f"axis {axis} out of range for a {self.dim}-dimensional grid")

    def forward(self, field: np.ndarray, axis: int) -> np.ndarray:
        self._check_axis(axis)
        return (np.roll(field, -1, axis=axis) - field) / self.spacing[axis]

    def backward(self, field: np.ndarray, axis: int) -> np.ndarray:
        self._check_axis(axis)
        return (field - np.roll(field, 1, axis=axis)) / self.spacing[axis]

    def partial(self, field: np.ndarray, axis: int, check_smoothness: bool = False) -> np.ndarray:
        self._check_axis(axis)
        if check_smoothness and not self.is_periodic_smooth(field, axis):
            raise NonPeriodicFieldError(f"field is not periodic-smooth along axis {axis}")
        return (np.roll(field, -1, axis=axis) - np.roll(field, 1, axis=axis)) / (2.0 * self.spacing[axis])

    def second(self, field: np.ndarray, axis: int) -> np.ndarray:
        """窄三点二阶差分"""
        self._check_axis(axis)
        return (np.roll(field, -1, axis=axis) - 2.0 * field + np.roll(field, 1, axis=axis)) / self.spacing[axis] ** 2

    def is_periodic_smooth(self, field: np.ndarray, axis: int) -> bool:
        """回绕处的跳跃不应远大于内部相邻差"""
        self._check_axis(axis)
        jumps = np.abs(np.roll(field, -1, axis=axis) - field)
        wrap = np.take(jumps, -1, axis=axis)
        interior = np.take(jumps, np.arange(self.n - 1), axis=axis)
        scale = max(float(np.max(interior)), 1e-12 * max(1.0, float(np.max(np.abs(field)))))
        return bool(np.max(wrap) <= 4.0 * scale)

    def integrate(self, field: np.ndarray) -> float:
        field = np.asarray(field, dtype=float)
        if field.shape != self.shape:
            raise ConfigurationError(f"field shape {field.shape} does not match grid {self.shape}")
        return float(np.sum(self.weights * field))

    def smooth_random_field(self, components: int, rng: np.random.Generator,
                            max_mode: Optional[int] = None) -> np.ndarray:
        """k ≤ max_mode 的随机 Fourier 场，系数按 1/(1+k²) 衰减"""
        max_mode = config.random_max_mode if max_mode is None else max_mode
        field = np.zeros(self.shape + (components,))
        phases = [2.0 * np.pi * self.points[..., a] / self.lengths[a] for a in range(self.dim)]
        modes = np.arange(max_mode + 1)
        for wave in np.array(np.meshgrid(*([modes] * self.dim), indexing='ij')).reshape(self.dim, -1).T:
            k2 = float(np.sum(wave ** 2))
            angle = sum(w * p for w, p in zip(wave, phases))
            a, b = rng.standard_normal((2, components)) / (1.0 + k2)
            field += np.cos(angle)[..., None] * a
            if k2 > 0:
                field += np.sin(angle)[..., None] * b
        return field


def build_grid(domain: ChartManifold, n: int, lengths: Optional[Sequence[float]] = None) -> DomainGrid:
    if domain.periods is None:
        raise ConfigurationError(f"domain {domain.name} is not a periodic chart (use flat_torus)")
    if not isinstance(n, (int, np.integer)) or n < config.min_nodes or n % 2:
        raise ConfigurationError(f"n must be an even integer >= {config.min_nodes}, got {n!r}")
    lengths = domain.periods if lengths is None else np.asarray(lengths, dtype=float)
    if len(lengths) != domain.dim or np.any(np.asarray(lengths) <= 0):
        raise ConfigurationError(f"lengths must be {domain.dim} positive numbers")
    if not np.allclose(lengths, domain.periods):
        raise ConfigurationError(f"grid lengths {list(lengths)} differ from the periods of {domain.name}")
    return DomainGrid(domain, int(n), lengths)


def _write_rows(path: Path, grid: DomainGrid, prefix: str, values: np.ndarray) -> None:
    header = [f"i{a}" for a in range(grid.dim)] + [f"{prefix}{c}" for c in range(values.shape[-1])]
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for index in np.ndindex(*grid.shape):
            writer.writerow(list(index) + [repr(float(v)) for v in values[index]])


def _read_rows(path: Path, grid: DomainGrid, prefix: str, components: int) -> np.ndarray:
    values = np.full(grid.shape + (components,), np.nan)
    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        expected = [f"i{a}" for a in range(grid.dim)] + [f"{prefix}{c}" for c in range(components)]
        if reader.fieldnames != expected:
            raise ConfigurationError(f"{path}: header {reader.fieldnames} != {expected}")
        for row in reader:
            index = tuple(int(row[f"i{a}"]) for a in range(grid.dim))
            values[index] = [float(row[f"{prefix}{c}"]) for c in range(components)]
    if np.isnan(values).any():
        raise ConfigurationError(f"{path}: missing nodes for a grid of shape {grid.shape}")
    return values


class MapField:
    """
    离散映射 u: M → N

    u(x) = periodic(x) + slope · x，slope 描述沿坐标方向的绕行（环面恒等映射、φ 方向的大圆）。
    """

    def __init__(self, grid: DomainGrid, target: ChartManifold, periodic: np.ndarray,
                 slope: Optional[np.ndarray] = None):
        self.grid = grid
        self.target = target
        self.periodic = np.asarray(periodic, dtype=float)
        if self.periodic.shape != grid.shape + (target.dim,):
            raise ConfigurationError(f"map values shape {self.periodic.shape} != {grid.shape + (target.dim,)}")
        self.slope = np.zeros((target.dim, grid.dim)) if slope is None else np.asarray(slope, dtype=float)
        if self.slope.shape != (target.dim, grid.dim):
            raise ConfigurationError(f"slope shape {self.slope.shape} != {(target.dim, grid.dim)}")
        self.values = self.periodic + np.einsum('ga,...a->...g', self.slope, grid.points)
        target.box.require(self.values, what="map value")

    def with_periodic(self, periodic: np.ndarray) -> "MapField":
        return MapField(self.grid, self.target, periodic, self.slope)

    @property
    def dof(self) -> int:
        return self.grid.node_count * self.target.dim

    def derivative(self, axis: int) -> np.ndarray:
        return self.grid.partial(self.periodic, axis) + self.slope[:, axis]

    def forward(self, axis: int) -> np.ndarray:
        return self.grid.forward(self.periodic, axis) + self.slope[:, axis]

    def backward(self, axis: int) -> np.ndarray:
        return self.grid.backward(self.periodic, axis) + self.slope[:, axis]

    def second(self, axis: int) -> np.ndarray:
        return self.grid.second(self.periodic, axis)

    # 目标几何在 u(x) 处的取值，按需缓存
    @cached_property
    def metric(self) -> np.ndarray:
        return self.target.metric(self.values)

    @cached_property
    def metric_inverse(self) -> np.ndarray:
        return self.target.metric.inverse(self.values)

    @cached_property
    def metric_derivative(self) -> np.ndarray:
        return self.target.metric.derivative(self.values)

    @cached_property
    def metric_second_derivative(self) -> np.ndarray:
        """∂_m∂_l h_ab，由 Levi-Civita 联络的度量相容性 ∂_l h_ab = h_kb Γ^k_la + h_ak Γ^k_lb 求导得到"""
        lc = self.target.levi_civita_connection
        gamma = lc(self.values)
        d_gamma = lc.derivative(self.values)
        half = (np.einsum('...mkb,...kla->...mlab', self.metric_derivative, gamma)
                + np.einsum('...kb,...mkla->...mlab', self.metric, d_gamma))
        full = half + np.swapaxes(half, -1, -2)
        return 0.5 * (full + np.swapaxes(full, -4, -3))

    @cached_property
    def christoffel(self) -> np.ndarray:
        return self.target.connection(self.values)

    @cached_property
    def christoffel_derivative(self) -> np.ndarray:
        return self.target.connection.derivative(self.values)

    @cached_property
    def difference(self) -> np.ndarray:
        return difference_tensor(self.target, self.values)

    @cached_property
    def riemann(self) -> np.ndarray:
        connection = self.target.connection_for()
        if connection is self.target.connection:
            return riemann_from_christoffel(self.christoffel, self.christoffel_derivative)
        return riemann_from_christoffel(connection(self.values), connection.derivative(self.values))

    def to_csv(self, path: Union[str, Path]) -> None:
        _write_rows(Path(path), self.grid, "u", self.values)

    @classmethod
    def from_csv(cls, path: Union[str, Path], grid: DomainGrid, target: ChartManifold,
                 slope: Optional[np.ndarray] = None) -> "MapField":
        values = _read_rows(Path(path), grid, "u", target.dim)
        slope = np.zeros((target.dim, grid.dim)) if slope is None else np.asarray(slope, dtype=float)
        return cls(grid, target, values - np.einsum('ga,...a->...g', slope, grid.points), slope)


class Section:
    """u⁻¹TN 的截面，每个节点一个目标切向量（坐标分量）"""

    def __init__(self, u: MapField, values: np.ndarray):
        self.u = u
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != u.periodic.shape:
            raise ConfigurationError(f"section shape {self.values.shape} != {u.periodic.shape}")

    @classmethod
    def zeros(cls, u: MapField) -> "Section":
        return cls(u, np.zeros_like(u.periodic))

    @classmethod
    def from_flat(cls, u: MapField, flat: np.ndarray) -> "Section":
        return cls(u, np.asarray(flat, dtype=float).reshape(u.periodic.shape))

    def flatten(self) -> np.ndarray:
        return self.values.reshape(-1)

    def __add__(self, other: "Section") -> "Section":
        return Section(self.u, self.values + other.values)

    def __sub__(self, other: "Section") -> "Section":
        return Section(self.u, self.values - other.values)

    def __mul__(self, factor: float) -> "Section":
        return Section(self.u, factor * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "Section":
        return Section(self.u, -self.values)

    def pointwise_inner(self, other: "Section") -> np.ndarray:
        return np.einsum('...ab,...a,...b->...', self.u.metric, self.values, other.values)

    def pointwise_norm(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.pointwise_inner(self), 0.0))

    def inner(self, other: "Section") -> float:
        """∫ h(V, W) dμ_g"""
        return self.u.grid.integrate(self.pointwise_inner(other))

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def sup_norm(self) -> float:
        return float(np.max(self.pointwise_norm()))

    def to_csv(self, path: Union[str, Path]) -> None:
        _write_rows(Path(path), self.u.grid, "v", self.values)

    @classmethod
    def from_csv(cls, path: Union[str, Path], u: MapField) -> "Section":
        return cls(u, _read_rows(Path(path), u.grid, "v", u.target.dim))

