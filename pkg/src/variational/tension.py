"""
拉回联络、张力场、能量与双能量

离散能量 E_h = ¼ Σ_x Σ_i w_x g^{ii}(x) [h(u_x)(D⁺_i u, D⁺_i u) + h(u_x)(D⁻_i u, D⁻_i u)]。
张力场的 Levi-Civita 部分是 E_h 的精确离散 Euler–Lagrange 算子
τ^LC = −h⁻¹ ∇E_h / w，统计部分 κ = g^{ii} K^N(∂_i u, ∂_i u) − (tr_g K^M)^k ∂_k u 逐节点计算。
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..grid import MapField, Section

logger = logging.getLogger(__name__)


def _quadratic(h: np.ndarray, a: np.ndarray, b: Optional[np.ndarray] = None) -> np.ndarray:
    return np.einsum('...ab,...a,...b->...', h, a, a if b is None else b)


def pullback_derivative(u: MapField, V: Section, axis: int) -> Section:
    """(∇̃_i V)^γ = ∂_i V^γ + Γ^γ_{αβ}(u) ∂_i u^α V^β"""
    values = (u.grid.partial(V.values, axis)
              + np.einsum('...gab,...a,...b->...g', u.christoffel, u.derivative(axis), V.values))
    return Section(u, values)


def energy_and_gradient(u: MapField) -> Tuple[float, np.ndarray]:
    grid = u.grid
    h = u.metric
    dh = u.metric_derivative
    total = 0.0
    gradient = np.zeros_like(u.periodic)
    for i in range(grid.dim):
        c = grid.weights * grid.inverse_diagonal[..., i]
        d_plus = u.forward(i)
        d_minus = u.backward(i)
        total += 0.25 * float(np.sum(c * (_quadratic(h, d_plus) + _quadratic(h, d_minus))))

        ch = c[..., None, None] * h
        averaged = 0.5 * (ch + np.roll(ch, -1, axis=i))
        flux = np.einsum('...ab,...b->...a', averaged, d_plus)
        gradient -= (flux - np.roll(flux, 1, axis=i)) / grid.spacing[i]
        gradient += 0.25 * c[..., None] * (np.einsum('...gab,...a,...b->...g', dh, d_plus, d_plus)
                                           + np.einsum('...gab,...a,...b->...g', dh, d_minus, d_minus))
    return total, gradient


def energy_gradient_derivative(u: MapField, V: Section) -> np.ndarray:
    """∇E_h 沿 V 的方向导数，即 E_h 的坐标 Hessian 作用在 V 上；矩阵严格对称"""
    grid = u.grid
    h = u.metric
    dh = u.metric_derivative
    W = V.values
    dh_V = np.einsum('...gab,...g->...ab', dh, W)
    d2h_V = np.einsum('...lgab,...l->...gab', u.metric_second_derivative, W)
    result = np.zeros_like(W)
    for i in range(grid.dim):
        c = grid.weights * grid.inverse_diagonal[..., i]
        d_plus = u.forward(i)
        d_minus = u.backward(i)
        v_plus = grid.forward(W, i)
        v_minus = grid.backward(W, i)

        ch = c[..., None, None] * h
        c_dh = c[..., None, None] * dh_V
        averaged = 0.5 * (ch + np.roll(ch, -1, axis=i))
        averaged_dot = 0.5 * (c_dh + np.roll(c_dh, -1, axis=i))
        flux = (np.einsum('...ab,...b->...a', averaged_dot, d_plus)
                + np.einsum('...ab,...b->...a', averaged, v_plus))
        result -= (flux - np.roll(flux, 1, axis=i)) / grid.spacing[i]
        result += 0.25 * c[..., None] * (np.einsum('...gab,...a,...b->...g', d2h_V, d_plus, d_plus)
                                         + np.einsum('...gab,...a,...b->...g', d2h_V, d_minus, d_minus)
                                         + 2.0 * np.einsum('...gab,...a,...b->...g', dh, d_plus, v_plus)
                                         + 2.0 * np.einsum('...gab,...a,...b->...g', dh, d_minus, v_minus))
    return result


def energy(u: MapField) -> float:
    return energy_and_gradient(u)[0]


def levi_civita_tension(u: MapField, gradient: Optional[np.ndarray] = None) -> np.ndarray:
    if gradient is None:
        gradient = energy_and_gradient(u)[1]
    return -np.einsum('...ab,...b->...a', u.metric_inverse, gradient) / u.grid.weights[..., None]


def statistical_defect(u: MapField) -> Section:
    """κ(u)；两端都是 Levi-Civita 联络时为零"""
    grid = u.grid
    values = np.zeros_like(u.periodic)
    if u.target.is_levi_civita and grid.domain.is_levi_civita:
        return Section(u, values)
    derivatives = [u.derivative(i) for i in range(grid.dim)]
    if not u.target.is_levi_civita:
        for i, du in enumerate(derivatives):
            values += grid.inverse_diagonal[..., i, None] * np.einsum('...gab,...a,...b->...g',
                                                                       u.difference, du, du)
    if not grid.domain.is_levi_civita:
        for k, du in enumerate(derivatives):
            values -= grid.difference_trace[..., k, None] * du
    return Section(u, values)


def tension(u: MapField, gradient: Optional[np.ndarray] = None) -> Section:
    return Section(u, levi_civita_tension(u, gradient)) + statistical_defect(u)


def bienergy(u: MapField, tau: Optional[Section] = None) -> float:
    tau = tension(u) if tau is None else tau
    return 0.5 * tau.inner(tau)


@dataclass
class EnergyReport:
    E: float
    E2: float
    tension_sup: float
    tension: Section = field(repr=False)
    converged: Optional[bool] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "E": self.E,
            "E2": self.E2,
            "tension_sup": self.tension_sup,
            "converged": self.converged,
        }


def energy_report(u: MapField, converged: Optional[bool] = None) -> EnergyReport:
    value, gradient = energy_and_gradient(u)
    tau = tension(u, gradient)
    return EnergyReport(E=value, E2=bienergy(u, tau), tension_sup=tau.sup_norm(), tension=tau,
                        converged=converged)
