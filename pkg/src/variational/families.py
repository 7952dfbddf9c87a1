import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from ..config import config
from ..errors import DomainViolationError, StructuralError
from ..geometry import exponential_map
from ..grid import MapField, Section
from .tension import energy, statistical_defect, tension

logger = logging.getLogger(__name__)

Generator = Callable[[float, float], np.ndarray]


def random_section(u: MapField, rng: np.random.Generator, max_mode: Optional[int] = None) -> Section:
    """光滑随机截面，按 ‖V‖_Wt = 1 归一化"""
    V = Section(u, u.grid.smooth_random_field(u.target.dim, rng, max_mode))
    return V * (1.0 / V.norm())


class VariationFamily:
    """
    两参数变分 u_{s,t}

    默认生成器为坐标线性族 u + sV + tW；生成器返回周期部分（slope 不变）。
    """

    def __init__(self, base: MapField, V: Section, W: Optional[Section] = None,
                 generator: Optional[Generator] = None, check_step: float = 1e-4):
        self.base = base
        self.V = V
        self.W = W if W is not None else Section.zeros(base)
        self.generator = generator or self.linear
        self.logger = logging.getLogger(__name__)
        self._check_velocities(check_step)

    def linear(self, s: float, t: float) -> np.ndarray:
        return self.base.periodic + s * self.V.values + t * self.W.values

    def at(self, s: float, t: float) -> MapField:
        return self.base.with_periodic(self.generator(s, t))

    def _check_velocities(self, step: float) -> None:
        if not np.array_equal(self.generator(0.0, 0.0), self.base.periodic):
            raise StructuralError("variation family does not pass through the base map")
        for name, direction, (a, b) in (("s", self.V, (1.0, 0.0)), ("t", self.W, (0.0, 1.0))):
            velocity = (self.generator(a * step, b * step) - self.generator(-a * step, -b * step)) / (2.0 * step)
            error = float(np.max(np.abs(velocity - direction.values)))
            if error > 1e-6 * (1.0 + float(np.max(np.abs(direction.values)))):
                raise StructuralError(f"variation family velocity along {name} differs from its direction by {error:.3e}")


def geodesic_family(base: MapField, V: Section, W: Optional[Section] = None, substeps: int = 16) -> VariationFamily:
    """u_{s,t}(x) = exp_{u(x)}(sV + tW)"""
    W = W if W is not None else Section.zeros(base)
    linear_part = base.values - base.periodic

    def generator(s: float, t: float) -> np.ndarray:
        if s == 0.0 and t == 0.0:
            return base.periodic
        velocity = s * V.values + t * W.values
        return exponential_map(base.target, base.values, velocity, substeps) - linear_part

    return VariationFamily(base, V, W, generator=generator)


@dataclass
class FirstVariationReport:
    steps: List[float]
    derivatives: List[float]
    prediction: float
    defect: float
    raw_residuals: List[float]
    residuals: List[float]
    relative_residuals: List[float]
    orders: List[Optional[float]]
    order: float
    passed: bool
    retries: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "steps": self.steps,
            "derivatives": self.derivatives,
            "prediction": self.prediction,
            "statistical_defect": self.defect,
            "corrected_prediction": self.prediction + self.defect,
            "raw_residuals": self.raw_residuals,
            "residuals": self.residuals,
            "relative_residuals": self.relative_residuals,
            "orders": self.orders,
            "order": self.order,
            "passed": self.passed,
            "retries": self.retries,
        }


def observed_orders(steps: Sequence[float], residuals: Sequence[float], floor: float):
    orders: List[Optional[float]] = [None]
    for j in range(1, len(steps)):
        r0, r1 = residuals[j - 1], residuals[j]
        if r0 > floor and r1 > floor:
            orders.append(math.log(r0 / r1) / math.log(steps[j - 1] / steps[j]))
        else:
            orders.append(None)
    return orders


def first_variation_check(fam: VariationFamily, steps: Optional[Sequence[float]] = None,
                          max_retries: int = 3) -> FirstVariationReport:
    """
    中心差分 d/ds E(u_{s,0}) 对照 −∫h(V, τ(u)) dμ_g

    统计缺陷 ∫h(V, κ(u)) 单独报告；通过判据比较修正后的预测 −∫h(V, τ − κ)。
    """
    steps = sorted(config.variation_steps if steps is None else steps, reverse=True)
    u = fam.base
    tau = tension(u)
    defect_field = statistical_defect(u)
    prediction = -fam.V.inner(tau)
    defect = fam.V.inner(defect_field)
    corrected = prediction + defect
    floor = config.variation_exact_floor * (1.0 + abs(corrected))

    retries = 0
    while True:
        try:
            derivatives = [(energy(fam.at(s, 0.0)) - energy(fam.at(-s, 0.0))) / (2.0 * s) for s in steps]
            break
        except DomainViolationError as e:
            if retries >= max_retries:
                raise
            retries += 1
            steps = [s / 4.0 for s in steps]
            logger.warning(f"variation left the validity box ({e}), retrying with steps {steps}")

    residuals = [abs(d - corrected) for d in derivatives]
    raw_residuals = [abs(d - prediction) for d in derivatives]
    relative = [r / (1.0 + abs(corrected)) for r in residuals]
    orders = observed_orders(steps, residuals, floor)
    finite = [o for o in orders if o is not None]

    if residuals[-1] <= floor:
        order = math.inf
        passed = True
    else:
        order = finite[-1] if finite else math.nan
        passed = bool(order >= config.variation_min_order and relative[-1] <= config.variation_tolerance)

    logger.info(f"first variation: prediction {prediction:.6e}, defect {defect:.3e}, "
                f"final residual {residuals[-1]:.3e}, order {order:.2f}, passed={passed}")
    return FirstVariationReport(
        steps=list(steps), derivatives=derivatives, prediction=prediction, defect=defect,
        raw_residuals=raw_residuals, residuals=residuals, relative_residuals=relative,
        orders=orders, order=order, passed=passed, retries=retries,
    )
