import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..config import config
from ..errors import ConfigurationError, FlowDivergenceError
from ..grid import DomainGrid, MapField
from .tension import energy_and_gradient, tension

logger = logging.getLogger(__name__)


@dataclass
class FlowResult:
    map: MapField = field(repr=False)
    converged: bool
    steps: int
    dt: float
    energy: float
    tension_sup: float
    monotone: Optional[bool]
    history: List[Dict[str, float]] = field(default_factory=list, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "converged": self.converged,
            "steps": self.steps,
            "dt": self.dt,
            "energy": self.energy,
            "tension_sup": self.tension_sup,
            "monotone": self.monotone,
        }


def stiffness(grid: DomainGrid) -> float:
    return float(2.0 * sum(np.max(grid.inverse_diagonal[..., i]) / grid.spacing[i] ** 2
                           for i in range(grid.dim)))


def default_dt(grid: DomainGrid) -> float:
    return float(config.flow_dt_factor * np.min(grid.spacing) ** 2 / np.max(grid.inverse_diagonal))


def harmonic_flow(u0: MapField, dt: Optional[float] = None, tol: Optional[float] = None,
                  max_steps: Optional[int] = None) -> FlowResult:
    """
    显式 Euler：u ← u + dt·τ(u)，直到 sup|τ|_h < tol

    能量连续上升 divergence_window 步视为发散；Levi-Civita 目标上额外检查能量单调。
    """
    grid = u0.grid
    dt = default_dt(grid) if dt is None else float(dt)
    tol = config.flow_tol if tol is None else float(tol)
    max_steps = config.flow_max_steps if max_steps is None else int(max_steps)
    if dt <= 0 or dt * stiffness(grid) >= 1.0:
        raise ConfigurationError(f"dt={dt:.3e} violates the explicit Euler bound 1/{stiffness(grid):.3e}")

    window = config.flow_divergence_window
    log_every = max(1, config.flow_log_every)
    record_every = max(1, log_every // 100)
    check_monotone = u0.target.is_levi_civita and u0.grid.domain.is_levi_civita
    monotone = True if check_monotone else None

    u = u0
    previous = None
    rising = 0
    history: List[Dict[str, float]] = []
    step = 0
    while True:
        value, gradient = energy_and_gradient(u)
        tau = tension(u, gradient)
        sup = tau.sup_norm()
        converged = sup < tol
        if step % record_every == 0 or converged or step == max_steps:
            history.append({"step": step, "energy": value, "tension_sup": sup})
        if step % log_every == 0:
            logger.info(f"flow step {step}: energy {value:.10e}, tension sup {sup:.3e}")

        if previous is not None:
            if value - previous > config.flow_monotonicity_tolerance * abs(previous):
                rising += 1
                if check_monotone:
                    if monotone:
                        logger.warning(f"flow energy increased at step {step}: {previous:.12e} -> {value:.12e}")
                    monotone = False
                if rising >= window:
                    raise FlowDivergenceError(f"energy increased for {rising} consecutive steps (step {step})")
            else:
                rising = 0
        previous = value

        if converged or step >= max_steps:
            break
        u = u.with_periodic(u.periodic + dt * tau.values)
        step += 1

    if converged:
        logger.info(f"flow converged after {step} steps: energy {value:.10e}, tension sup {sup:.3e}")
    else:
        logger.warning(f"flow stopped at max_steps={max_steps} with tension sup {sup:.3e}")
    return FlowResult(map=u, converged=converged, steps=step, dt=dt, energy=value, tension_sup=sup,
                      monotone=monotone, history=history)
