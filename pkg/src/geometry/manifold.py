"""
坐标卡上的统计流形

数组约定（批量维在前，分量在后）：
- 点 x: (..., d)
- 度量 g[..., i, j]，导数 dg[..., k, i, j] = ∂_k g_ij
- 联络 Γ[..., k, i, j] = Γ^k_ij，导数 dΓ[..., l, k, i, j] = ∂_l Γ^k_ij
- 曲率 R[..., l, i, j, k] = R^l_ijk，即 R(∂_i, ∂_j)∂_k 的第 l 分量
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ..config import config
from ..errors import DomainViolationError, StructuralError, ConfigurationError

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]

CURVATURE_SOURCES = ("connection", "levi_civita")


@dataclass(frozen=True)
class ValidityBox:
    """开区间盒子，可选单纯形约束 Σx < 1"""
    lower: np.ndarray
    upper: np.ndarray
    simplex: bool = False

    @classmethod
    def unbounded(cls, dim: int) -> "ValidityBox":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @property
    def dim(self) -> int:
        return len(self.lower)

    def extent(self, x: np.ndarray) -> np.ndarray:
        width = self.upper - self.lower
        return np.where(np.isfinite(width), width, np.maximum(1.0, np.abs(x)))

    def fd_step(self, x: np.ndarray) -> np.ndarray:
        return config.fd_relative_step * self.extent(x)

    def inside(self, x: np.ndarray, margin=0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        margin = np.broadcast_to(margin, x.shape)
        ok = np.all((x - margin > self.lower) & (x + margin < self.upper), axis=-1)
        if self.simplex:
            ok &= 1.0 - np.sum(x, axis=-1) > np.max(margin, axis=-1)
        return ok & np.all(np.isfinite(x), axis=-1)

    def require(self, x: np.ndarray, margin=0.0, what: str = "point") -> None:
        ok = self.inside(x, margin)
        if np.all(ok):
            return
        bad = np.argwhere(~np.atleast_1d(ok))[0]
        node = tuple(int(i) for i in bad) if np.ndim(ok) else None
        raise DomainViolationError(f"{what} leaves the validity box", node)


def central_derivative(func: ArrayFn, x: np.ndarray, box: ValidityBox) -> np.ndarray:
    """二阶中心差分，导数轴插在批量维之后"""
    x = np.asarray(x, dtype=float)
    step = box.fd_step(x)
    box.require(x, config.boundary_margin_steps * step, what="finite-difference stencil")
    batch = x.ndim - 1
    parts = []
    for k in range(x.shape[-1]):
        shift = np.zeros_like(x)
        shift[..., k] = step[..., k]
        diff = func(x + shift) - func(x - shift)
        scale = 2.0 * step[..., k]
        parts.append(diff / scale.reshape(scale.shape + (1,) * (diff.ndim - batch)))
    return np.stack(parts, axis=batch)


class MetricField:
    def __init__(self, evaluate: ArrayFn, box: ValidityBox,
                 inverse: Optional[ArrayFn] = None, derivative: Optional[ArrayFn] = None):
        self._evaluate = evaluate
        self._inverse = inverse
        self._derivative = derivative
        self.box = box

    @property
    def analytic_derivative(self) -> bool:
        return self._derivative is not None

    def __call__(self, x: np.ndarray, check: bool = True) -> np.ndarray:
        g = np.asarray(self._evaluate(np.asarray(x, dtype=float)), dtype=float)
        if check:
            self.validate(g)
        return g

    @staticmethod
    def validate(g: np.ndarray) -> None:
        scale = max(1.0, float(np.max(np.abs(g))))
        if np.max(np.abs(g - np.swapaxes(g, -1, -2))) > 1e-12 * scale:
            raise StructuralError("metric is not symmetric")
        if np.min(np.linalg.eigvalsh(g)) <= 0.0:
            raise StructuralError("metric is not positive definite")

    def inverse(self, x: np.ndarray) -> np.ndarray:
        if self._inverse is not None:
            return np.asarray(self._inverse(np.asarray(x, dtype=float)), dtype=float)
        return np.linalg.inv(self(x))

    def derivative(self, x: np.ndarray) -> np.ndarray:
        if self._derivative is not None:
            return np.asarray(self._derivative(np.asarray(x, dtype=float)), dtype=float)
        return central_derivative(lambda y: self(y, check=False), x, self.box)


class ConnectionField:
    def __init__(self, evaluate: ArrayFn, box: ValidityBox, derivative: Optional[ArrayFn] = None):
        self._evaluate = evaluate
        self._derivative = derivative
        self.box = box

    @property
    def analytic_derivative(self) -> bool:
        return self._derivative is not None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        gamma = np.asarray(self._evaluate(np.asarray(x, dtype=float)), dtype=float)
        # 无挠：下指标对称存储
        return 0.5 * (gamma + np.swapaxes(gamma, -1, -2))

    def derivative(self, x: np.ndarray) -> np.ndarray:
        if self._derivative is not None:
            d_gamma = np.asarray(self._derivative(np.asarray(x, dtype=float)), dtype=float)
            return 0.5 * (d_gamma + np.swapaxes(d_gamma, -1, -2))
        return central_derivative(self, x, self.box)


@dataclass(frozen=True)
class ChartManifold:
    name: str
    dim: int
    metric: MetricField
    connection: ConnectionField
    box: ValidityBox
    levi_civita_connection: ConnectionField
    is_levi_civita: bool = False
    cubic_form: Optional[ArrayFn] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    curvature_source: str = "connection"
    periods: Optional[np.ndarray] = None
    descriptor: dict = field(default_factory=dict)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.sampler is None:
            raise ConfigurationError(f"manifold {self.name} has no point sampler")
        return self.sampler(rng, count)

    def connection_for(self, source: Optional[str] = None) -> ConnectionField:
        source = source or self.curvature_source
        if source not in CURVATURE_SOURCES:
            raise ConfigurationError(f"unknown curvature source: {source}")
        return self.connection if source == "connection" else self.levi_civita_connection

    def check_point(self, x: np.ndarray, what: str = "point") -> None:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DomainViolationError(f"{what} has {x.shape[-1]} coordinates, {self.name} has dimension {self.dim}")
        self.box.require(x, what=what)


class CurvatureTensor:
    def __init__(self, manifold: ChartManifold, source: Optional[str] = None):
        self.manifold = manifold
        self.source = source or manifold.curvature_source

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return curvature(self.manifold, p, self.source)


def levi_civita(metric: MetricField, p: np.ndarray) -> np.ndarray:
    dg = metric.derivative(p)
    lowered = 0.5 * (np.einsum('...ijl->...lij', dg) + np.einsum('...jil->...lij', dg) - dg)
    return np.einsum('...kl,...lij->...kij', metric.inverse(p), lowered)


def difference_tensor(m: ChartManifold, p: np.ndarray) -> np.ndarray:
    return m.connection(p) - m.levi_civita_connection(p)


def dual_connection(m: ChartManifold, p: np.ndarray) -> np.ndarray:
    return 2.0 * m.levi_civita_connection(p) - m.connection(p)


def dual_manifold(m: ChartManifold) -> ChartManifold:
    """同一度量，联络换成 2Γ^LC − Γ"""
    derivative = None
    if m.connection.analytic_derivative and m.levi_civita_connection.analytic_derivative:
        def derivative(x):
            return 2.0 * m.levi_civita_connection.derivative(x) - m.connection.derivative(x)
    connection = ConnectionField(lambda x: dual_connection(m, x), m.box, derivative)
    cubic = None
    if m.cubic_form is not None:
        def cubic(x):
            return -m.cubic_form(x)
    return replace(m, name=f"{m.name}*", connection=connection, cubic_form=cubic)


def riemann_from_christoffel(gamma: np.ndarray, d_gamma: np.ndarray) -> np.ndarray:
    return (np.einsum('...iljk->...lijk', d_gamma)
            - np.einsum('...jlik->...lijk', d_gamma)
            + np.einsum('...lim,...mjk->...lijk', gamma, gamma)
            - np.einsum('...ljm,...mik->...lijk', gamma, gamma))


def curvature(m: ChartManifold, p: np.ndarray, source: Optional[str] = None) -> np.ndarray:
    connection = m.connection_for(source)
    return riemann_from_christoffel(connection(p), connection.derivative(p))


def lowered_curvature(m: ChartManifold, p: np.ndarray, source: Optional[str] = None) -> np.ndarray:
    """R_mijk = g_ml R^l_ijk"""
    return np.einsum('...ml,...lijk->...mijk', m.metric(p), curvature(m, p, source))


def curvature_norm(m: ChartManifold, p: np.ndarray, source: Optional[str] = None) -> np.ndarray:
    g = m.metric(p)
    g_inv = m.metric.inverse(p)
    riemann = curvature(m, p, source)
    lowered = np.einsum('...ml,...lijk->...mijk', g, riemann)
    raised = np.einsum('...ia,...jb,...kc,...labc->...lijk', g_inv, g_inv, g_inv, riemann)
    return np.sqrt(np.abs(np.einsum('...lijk,...lijk->...', lowered, raised)))


def curvature_form(m: ChartManifold, p: np.ndarray, U: np.ndarray, V: np.ndarray,
                   source: Optional[str] = None) -> np.ndarray:
    """h(R(U,V)V, U)"""
    return np.einsum('...ml,...lijk,...i,...j,...k,...m->...',
                     m.metric(p), curvature(m, p, source), U, V, V, U)


def sectional_curvature(m: ChartManifold, p: np.ndarray, U: np.ndarray, V: np.ndarray,
                        source: Optional[str] = None) -> np.ndarray:
    g = m.metric(p)
    uu = np.einsum('...ij,...i,...j->...', g, U, U)
    vv = np.einsum('...ij,...i,...j->...', g, V, V)
    uv = np.einsum('...ij,...i,...j->...', g, U, V)
    return curvature_form(m, p, U, V, source) / (uu * vv - uv ** 2)


def codazzi_tensor(m: ChartManifold, p: np.ndarray) -> np.ndarray:
    """C[k,i,j] = (∇_k g)_ij"""
    g = m.metric(p)
    gamma = m.connection(p)
    return (m.metric.derivative(p)
            - np.einsum('...lki,...lj->...kij', gamma, g)
            - np.einsum('...lkj,...il->...kij', gamma, g))


def codazzi_residual(m: ChartManifold, points: np.ndarray) -> float:
    c = codazzi_tensor(m, points)
    scale = max(1.0, float(np.max(np.abs(c))))
    return float(np.max(np.abs(c - np.swapaxes(c, -3, -2)))) / scale


def duality_residual(m: ChartManifold, points: np.ndarray) -> float:
    """∂_i g_jk − Γ^l_ij g_lk − g_jl Γ*^l_ik"""
    g = m.metric(points)
    dg = m.metric.derivative(points)
    residual = (dg
                - np.einsum('...lij,...lk->...ijk', m.connection(points), g)
                - np.einsum('...jl,...lik->...ijk', g, dual_connection(m, points)))
    scale = max(1.0, float(np.max(np.abs(dg))))
    return float(np.max(np.abs(residual))) / scale


def exponential_map(m: ChartManifold, x: np.ndarray, v: np.ndarray, substeps: int = 16) -> np.ndarray:
    """沿 m 的联络积分测地线方程到 t = 1（RK4）"""
    x = np.asarray(x, dtype=float)
    v = np.broadcast_to(np.asarray(v, dtype=float), x.shape)

    def rhs(pos, vel):
        return vel, -np.einsum('...kij,...i,...j->...k', m.connection(pos), vel, vel)

    pos, vel = x.copy(), v.copy()
    dt = 1.0 / substeps
    for _ in range(substeps):
        k1 = rhs(pos, vel)
        k2 = rhs(pos + 0.5 * dt * k1[0], vel + 0.5 * dt * k1[1])
        k3 = rhs(pos + 0.5 * dt * k2[0], vel + 0.5 * dt * k2[1])
        k4 = rhs(pos + dt * k3[0], vel + dt * k3[1])
        pos = pos + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        vel = vel + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        m.box.require(pos, what="geodesic")
    return pos


def trace_K_divergence(m: ChartManifold, grid) -> np.ndarray:
    """div^g(tr_g K)，逐节点；grid 需提供 points 与 partial"""
    points = grid.points
    g = m.metric(points)
    trace = np.einsum('...ij,...kij->...k', m.metric.inverse(points), difference_tensor(m, points))
    sqrt_det = np.sqrt(np.linalg.det(g))
    flux = sqrt_det[..., None] * trace
    divergence = sum(grid.partial(flux[..., k], k) for k in range(m.dim))
    return divergence / sqrt_det
