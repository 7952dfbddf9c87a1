"""
Jacobi 算子 J_u = Δ̄_u − ℜ^u 及其二次型

节点公式（对角区域度量）：
  ∇̃_i V      = D⁰V + Γ(∂_i u, V)
  ∇̃_i∇̃_i V  = δ²V + ∂Γ(∂_i u)(∂_i u, V) + Γ(δ²u, V) + Γ(∂_i u, D⁰V) + Γ(∂_i u, ∇̃_i V)
二阶项一律用窄三点差分，不复合两次中心差分。
两端都是 Levi-Civita 联络时改用离散能量 E_h 的协变 Hessian，Wt·J 精确对称。
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..config import config
from ..grid import MapField, Section
from ..variational import (
    energy, energy_and_gradient, energy_gradient_derivative, energy_report, pullback_derivative, random_section,
)

logger = logging.getLogger(__name__)


def rough_laplacian(u: MapField, V: Section) -> Section:
    """Δ̄V = −Σ_i g^{ii} (∇̃_i∇̃_i V − Γ^{M,k}_ii ∇̃_k V)"""
    grid = u.grid
    gamma = u.christoffel
    d_gamma = u.christoffel_derivative
    nabla = [pullback_derivative(u, V, i).values for i in range(grid.dim)]
    result = np.zeros_like(V.values)
    for i in range(grid.dim):
        du = u.derivative(i)
        second = (grid.second(V.values, i)
                  + np.einsum('...lgab,...l,...a,...b->...g', d_gamma, du, du, V.values)
                  + np.einsum('...gab,...a,...b->...g', gamma, u.second(i), V.values)
                  + np.einsum('...gab,...a,...b->...g', gamma, du, grid.partial(V.values, i))
                  + np.einsum('...gab,...a,...b->...g', gamma, du, nabla[i]))
        for k in range(grid.dim):
            second = second - grid.christoffel[..., k, i, i, None] * nabla[k]
        result -= grid.inverse_diagonal[..., i, None] * second
    return Section(u, result)


def curvature_term(u: MapField, V: Section) -> Section:
    """ℜ(V) = Σ_i g^{ii} R(V, ∂_i u) ∂_i u"""
    grid = u.grid
    result = np.zeros_like(V.values)
    for i in range(grid.dim):
        du = u.derivative(i)
        result += grid.inverse_diagonal[..., i, None] * np.einsum('...lajk,...a,...j,...k->...l',
                                                                  u.riemann, V.values, du, du)
    return Section(u, result)


def connection_jacobi_apply(u: MapField, V: Section) -> Section:
    return rough_laplacian(u, V) - curvature_term(u, V)


def is_variational(u: MapField) -> bool:
    """两端都是 Levi-Civita 联络时 J_u 是离散能量的协变 Hessian"""
    return bool(u.target.is_levi_civita and u.grid.domain.is_levi_civita)


def energy_hessian_apply(u: MapField, V: Section) -> Section:
    """
    J_u V = Wt⁻¹ ∇²E_h V，∇²E_h = ∂²E_h − Γ^k(·,·) ∂_k E_h

    Wt·J 精确对称；与节点公式相差 O(h²)。
    """
    _, gradient = energy_and_gradient(u)
    covector = (energy_gradient_derivative(u, V)
                - np.einsum('...kab,...a,...k->...b', u.target.levi_civita_connection(u.values), V.values, gradient))
    values = np.einsum('...ab,...b->...a', u.metric_inverse, covector) / u.grid.weights[..., None]
    return Section(u, values)


def jacobi_apply(u: MapField, V: Section) -> Section:
    if is_variational(u):
        return energy_hessian_apply(u, V)
    return connection_jacobi_apply(u, V)


def harmonicity(u: MapField) -> Dict[str, Any]:
    """‖τ‖_∞ < gate·max(1, E) 时 Hessian 语义成立"""
    report = energy_report(u)
    threshold = config.harmonicity_gate * max(1.0, report.E)
    harmonic = bool(report.tension_sup < threshold)
    if not harmonic:
        logger.warning(f"map is not harmonic (tension sup {report.tension_sup:.3e} >= {threshold:.3e}); "
                       f"Jacobi results are advisory")
    return {"tension_sup": report.tension_sup, "threshold": threshold, "harmonic": harmonic}


def hessian(u: MapField, V: Section, W: Section) -> float:
    """∫ h(J_u V, W) dμ_g"""
    return jacobi_apply(u, V).inner(W)


def finite_difference_hessian(u: MapField, V: Section, W: Section, step: float) -> float:
    def e(a: float, b: float) -> float:
        return energy(u.with_periodic(u.periodic + a * V.values + b * W.values))

    return (e(step, step) - e(step, -step) - e(-step, step) + e(-step, -step)) / (4.0 * step ** 2)


@dataclass
class HessianCheckReport:
    pairs: List[Dict[str, float]]
    max_residual: float
    passed: bool
    harmonic: bool
    tension_sup: float
    step: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pairs": self.pairs,
            "max_residual": self.max_residual,
            "passed": self.passed,
            "harmonic": self.harmonic,
            "tension_sup": self.tension_sup,
            "step": self.step,
        }


def hessian_check(u: MapField, pairs: Optional[int] = None, seed: int = 0,
                  step: Optional[float] = None, tolerance: Optional[float] = None,
                  jobs: int = 1) -> HessianCheckReport:
    """二阶变分公式：∂²E/∂s∂t 的中心差分对照 ∫h(J_u V, W)；方向按种子顺序抽取，结果与 jobs 无关"""
    pairs = config.hessian_pairs if pairs is None else pairs
    step = config.hessian_step if step is None else step
    tolerance = config.hessian_tolerance if tolerance is None else tolerance
    gate = harmonicity(u)
    rng = np.random.default_rng(seed)
    directions = [(random_section(u, rng), random_section(u, rng)) for _ in range(pairs)]

    def evaluate(pair: Tuple[Section, Section]) -> Tuple[float, float]:
        V, W = pair
        return finite_difference_hessian(u, V, W, step), hessian(u, V, W)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        evaluated = list(pool.map(evaluate, directions))

    results = []
    for idx, (fd, value) in enumerate(evaluated):
        residual = abs(fd - value)
        results.append({
            "finite_difference": fd,
            "operator": value,
            "residual": residual,
            "passed": bool(residual <= tolerance * (1.0 + abs(value))),
        })
        logger.debug(f"[{idx + 1}/{pairs}] hessian pair: fd {fd:.8e}, operator {value:.8e}")

    max_residual = max((r["residual"] for r in results), default=0.0)
    passed = all(r["passed"] for r in results)
    logger.info(f"hessian check: {sum(r['passed'] for r in results)}/{pairs} pairs within tolerance, "
                f"max residual {max_residual:.3e}")
    return HessianCheckReport(pairs=results, max_residual=max_residual, passed=passed,
                              harmonic=gate["harmonic"], tension_sup=gate["tension_sup"], step=step)


def quadratic_form_minimum(u: MapField, samples: Optional[int] = None, seed: int = 0, jobs: int = 1) -> float:
    """min over random V of ∫h(J_u V, V) / ‖V‖²"""
    samples = config.quadratic_form_samples if samples is None else samples
    rng = np.random.default_rng(seed)
    sections = [random_section(u, rng) for _ in range(samples)]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        values = list(pool.map(lambda V: hessian(u, V, V) / V.inner(V), sections))
    return float(min(values))


def integrated_curvature_check(u: MapField, samples: Optional[int] = None, seed: int = 0) -> float:
    """max over random V of ∫h(ℜ^u V, V) / ‖V‖²"""
    samples = config.quadratic_form_samples if samples is None else samples
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(samples):
        V = random_section(u, rng)
        values.append(curvature_term(u, V).inner(V) / V.inner(V))
    return float(max(values))
