"""
Jacobi 算子的稠密矩阵、谱与稳定性判定
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import linalg

from ..config import config
from ..errors import NumericError, SizeError
from ..geometry import nonpositivity_certificate
from ..grid import MapField, Section
from .jacobi import harmonicity, integrated_curvature_check, jacobi_apply, quadratic_form_minimum

logger = logging.getLogger(__name__)


def probe_period(n: int) -> int:
    """n 的不小于 3 的最小因子；同色探针的 ±1 邻域互不重叠"""
    for c in range(3, n + 1):
        if n % c == 0:
            return c
    return n


@dataclass
class JacobiAssembly:
    u: MapField = field(repr=False)
    A: np.ndarray = field(repr=False)
    Wt: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    asymmetry: float
    harmonic: bool
    tension_sup: float

    @property
    def dof(self) -> int:
        return self.A.shape[0]

    def apply(self, V: Section) -> Section:
        return Section.from_flat(self.u, self.A @ V.flatten())

    def consistency_residual(self, V: Section) -> float:
        direct = jacobi_apply(self.u, V).flatten()
        return float(np.max(np.abs(self.A @ V.flatten() - direct)))


def weight_matrix(u: MapField) -> np.ndarray:
    blocks = u.grid.weights[..., None, None] * u.metric
    d = u.target.dim
    return linalg.block_diag(*blocks.reshape(-1, d, d))


def assemble(u: MapField) -> JacobiAssembly:
    grid = u.grid
    d = u.target.dim
    dof = u.dof
    if dof > config.dof_cap:
        raise SizeError(f"N_dof={dof} exceeds the dense cap {config.dof_cap}")
    gate = harmonicity(u)

    period = probe_period(grid.n)
    A = np.zeros((dof, dof))
    offsets = list(itertools.product((-1, 0, 1), repeat=grid.dim))
    nodes = np.array(list(np.ndindex(*grid.shape)))
    for color in itertools.product(range(period), repeat=grid.dim):
        probes = nodes[np.all(nodes % period == np.array(color), axis=1)]
        probe_flat = np.ravel_multi_index(probes.T, grid.shape)
        for beta in range(d):
            values = np.zeros(grid.shape + (d,))
            values[tuple(probes.T) + (beta,)] = 1.0
            response = jacobi_apply(u, Section(u, values)).values
            for offset in offsets:
                targets = (probes + np.array(offset)) % grid.n
                target_flat = np.ravel_multi_index(targets.T, grid.shape)
                rows = target_flat[:, None] * d + np.arange(d)
                A[rows, (probe_flat * d + beta)[:, None]] = response[tuple(targets.T)]
    logger.debug(f"assembled {dof}x{dof} Jacobi matrix with {period ** grid.dim * d} probes")

    Wt = weight_matrix(u)
    WA = Wt @ A
    B = 0.5 * (WA + WA.T)
    norm = np.linalg.norm(WA)
    asymmetry = float(np.linalg.norm(WA - WA.T) / norm) if norm > 0 else 0.0
    if not u.target.is_levi_civita and asymmetry > 1e-8:
        logger.warning(f"Jacobi form asymmetry {asymmetry:.3e} for non-metric connection on {u.target.name}")
    return JacobiAssembly(u=u, A=A, Wt=Wt, B=B, asymmetry=asymmetry,
                          harmonic=gate["harmonic"], tension_sup=gate["tension_sup"])


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray = field(repr=False)
    index: int
    nullity: int
    tau_zero: float
    asymmetry: float
    harmonic: bool
    clusters: List[Dict[str, Any]] = field(default_factory=list, repr=False)

    @property
    def verdict(self) -> str:
        return "weakly_stable" if self.index == 0 else "unstable"

    @property
    def lowest(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def smallest_positive(self) -> Optional[float]:
        positive = self.eigenvalues[self.eigenvalues > self.tau_zero]
        return float(positive[0]) if len(positive) else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "index": self.index,
            "nullity": self.nullity,
            "tau_zero": self.tau_zero,
            "asymmetry": self.asymmetry,
            "verdict": self.verdict,
            "harmonicity_gate": self.harmonic,
            "lowest_eigenvalue": self.lowest,
            "smallest_positive_eigenvalue": self.smallest_positive,
            "clusters": self.clusters[:32],
        }


def eigenvalue_clusters(eigenvalues: np.ndarray, gap: float) -> List[Dict[str, Any]]:
    clusters: List[Dict[str, Any]] = []
    members = [eigenvalues[0]] if len(eigenvalues) else []
    for value in eigenvalues[1:]:
        if value - members[-1] <= gap:
            members.append(value)
        else:
            clusters.append({"eigenvalue": float(np.mean(members)), "multiplicity": len(members)})
            members = [value]
    if members:
        clusters.append({"eigenvalue": float(np.mean(members)), "multiplicity": len(members)})
    return clusters


def spectrum(asm: JacobiAssembly, tau_zero: Optional[float] = None) -> SpectrumReport:
    """B x = λ Wt x，稠密对称广义特征值问题"""
    try:
        eigenvalues = linalg.eigh(asm.B, asm.Wt, eigvals_only=True)
    except (linalg.LinAlgError, ValueError) as e:
        condition = float(np.linalg.cond(asm.Wt))
        raise NumericError(f"generalized eigensolver failed: {e} (cond(Wt)={condition:.3e})") from e
    eigenvalues = np.sort(eigenvalues)
    if tau_zero is None:
        tau_zero = config.zero_threshold_rel * max(1.0, float(np.max(np.abs(eigenvalues))))
    index = int(np.sum(eigenvalues < -tau_zero))
    nullity = int(np.sum(np.abs(eigenvalues) <= tau_zero))
    clusters = eigenvalue_clusters(eigenvalues, config.cluster_gap_factor * tau_zero)
    logger.info(f"spectrum of {asm.dof} dof: lowest {eigenvalues[0]:.6e}, index {index}, nullity {nullity}")
    return SpectrumReport(eigenvalues=eigenvalues, index=index, nullity=nullity, tau_zero=tau_zero,
                          asymmetry=asm.asymmetry, harmonic=asm.harmonic, clusters=clusters)


def stability_report(u: MapField, samples: Optional[int] = None, seed: int = 0,
                     certificate_samples: Optional[int] = None,
                     tau_zero: Optional[float] = None, jobs: int = 1) -> Dict[str, Any]:
    """
    稳定性判定

    路线优先级：截面曲率非正（Monte-Carlo 证书）→ 积分意义下非正 → 直接看谱。
    前两条路线下若 λ_1 < −τ_zero，则视为离散分辨率不足。
    """
    certificate = nonpositivity_certificate(u.target, certificate_samples, seed)
    integrated = integrated_curvature_check(u, samples, seed + 1)
    asm = assemble(u)
    report = spectrum(asm, tau_zero)
    q_min = quadratic_form_minimum(u, samples, seed + 2, jobs)

    if certificate["nonpositive"]:
        route = "nonpositive_curvature"
    elif integrated <= config.structural_tolerance:
        route = "nonpositive_in_integration"
    else:
        route = "spectrum"

    consistent = True
    advice = None
    verdict = report.verdict
    form_nonnegative = None
    if route != "spectrum":
        form_nonnegative = bool(q_min >= -config.quadratic_form_tolerance)
        if not form_nonnegative:
            logger.error(f"Jacobi quadratic form {q_min:.3e} below -{config.quadratic_form_tolerance:.0e} "
                         f"on {u.target.name} despite the curvature route")
        if report.lowest < -report.tau_zero:
            consistent = False
            advice = "lowest eigenvalue contradicts the curvature route; refine the grid (n -> 2n)"
            logger.error(f"stability contradiction on {u.target.name}: lambda_1={report.lowest:.3e}")
        else:
            verdict = "weakly_stable"

    return {
        "route": route,
        "verdict": verdict,
        "consistent": consistent,
        "advice": advice,
        "harmonic": asm.harmonic,
        "index": report.index,
        "nullity": report.nullity,
        "lowest_eigenvalue": report.lowest,
        "tau_zero": report.tau_zero,
        "certificate": certificate,
        "integrated_curvature_max": integrated,
        "quadratic_form_min": q_min,
        "quadratic_form_nonnegative": form_nonnegative,
        "spectrum": report,
    }
