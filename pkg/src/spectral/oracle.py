import logging
from typing import Optional

import numpy as np
from scipy import linalg

from ..errors import NumericError

logger = logging.getLogger(__name__)


def gershgorin_lower_bound(C: np.ndarray) -> float:
    radius = np.sum(np.abs(C), axis=1) - np.abs(np.diag(C))
    return float(np.min(np.diag(C) - radius))


def rayleigh_ritz_oracle(B: np.ndarray, Wt: np.ndarray, k: int = 5, seed: int = 0,
                         max_iterations: int = 2000, tol: float = 1e-13,
                         subspace: Optional[int] = None) -> np.ndarray:
    """
    平移求逆子空间迭代 + Rayleigh–Ritz 投影，求 B x = λ Wt x 的 k 个最小特征值

    与稠密 eigh 路径相互独立：平移量取 L⁻¹BL⁻ᵀ 的 Gershgorin 下界减一，
    使 B − σWt 正定，可用 Cholesky 反复求解。
    """
    n = B.shape[0]
    p = min(n, subspace or 2 * k + 10)
    L = linalg.cholesky(Wt, lower=True)
    C = linalg.solve_triangular(L, linalg.solve_triangular(L, B, lower=True).T, lower=True).T
    sigma = gershgorin_lower_bound(C) - 1.0
    try:
        factor = linalg.cho_factor(B - sigma * Wt)
    except linalg.LinAlgError as e:
        raise NumericError(f"shifted pencil is not positive definite (sigma={sigma:.3e})") from e

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    previous = None
    for iteration in range(1, max_iterations + 1):
        Y, _ = linalg.qr(linalg.cho_solve(factor, Wt @ X), mode='economic')
        ritz, vectors = linalg.eigh(Y.T @ B @ Y, Y.T @ Wt @ Y)
        X = Y @ vectors
        current = ritz[:k]
        if previous is not None:
            change = float(np.max(np.abs(current - previous)))
            if change <= tol * max(1.0, float(np.max(np.abs(current)))):
                logger.debug(f"oracle converged after {iteration} iterations")
                return current
        previous = current
    logger.warning(f"oracle did not converge in {max_iterations} iterations")
    return previous
