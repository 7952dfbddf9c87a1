import logging
from typing import Any, Dict, Optional

import numpy as np

from ..config import config
from .manifold import ChartManifold, curvature_form

logger = logging.getLogger(__name__)


def nonpositivity_certificate(m: ChartManifold, samples: Optional[int] = None, seed: int = 0,
                              source: Optional[str] = None) -> Dict[str, Any]:
    """
    Monte-Carlo 检验 h(R(U,V)V,U) ≤ 0

    随机取点与切向量对，返回归一化曲率 h(R(U,V)V,U)/(|U|²|V|²) 的最大值；
    这是抽样证据，不是证明。
    """
    samples = samples or config.certificate_samples
    rng = np.random.default_rng(seed)
    points = m.sample(rng, samples)
    U = rng.standard_normal((samples, m.dim))
    V = rng.standard_normal((samples, m.dim))

    g = m.metric(points)
    uu = np.einsum('...ij,...i,...j->...', g, U, U)
    vv = np.einsum('...ij,...i,...j->...', g, V, V)
    values = curvature_form(m, points, U, V, source) / (uu * vv)

    tolerance = config.certificate_tolerance
    worst = int(np.argmax(values))
    positive = np.argsort(values)[::-1][:5]
    witnesses = [
        {"point": points[i].tolist(), "value": float(values[i])}
        for i in positive if values[i] > tolerance
    ]
    verdict = bool(values[worst] <= tolerance)
    logger.info(f"{m.name}: max normalized curvature {values[worst]:.3e} over {samples} samples, "
                f"nonpositive={verdict}")
    return {
        "manifold": m.name,
        "samples": samples,
        "source": source or m.curvature_source,
        "max_normalized_curvature": float(values[worst]),
        "nonpositive": verdict,
        "witnesses": witnesses,
    }
