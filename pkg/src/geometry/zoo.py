"""
内置流形：euclidean / flat_torus / sphere / normal_family / simplex

描述符为 JSON 对象，例如 {"type": "normal_family", "alpha": 0.0}，
可选 "connection": {"kind": "levi_civita" | "alpha" | "cubic", ...}
与 "curvature_source": "connection" | "levi_civita"。
"""

import logging
from typing import Any, Callable, Dict, Optional

import numpy as np

from ..config import config
from ..errors import ConfigurationError, StructuralError
from .manifold import (
    ChartManifold, ConnectionField, MetricField, ValidityBox, CURVATURE_SOURCES, codazzi_residual,
)

logger = logging.getLogger(__name__)

MANIFOLD_TYPES = ("euclidean", "flat_torus", "sphere", "normal_family", "simplex")
CONNECTION_KINDS = ("levi_civita", "alpha", "cubic")

TWO_PI = 2.0 * np.pi


def _eye(x: np.ndarray, d: int) -> np.ndarray:
    return np.broadcast_to(np.eye(d), x.shape[:-1] + (d, d)).copy()


def _zeros(x: np.ndarray, *shape: int) -> np.ndarray:
    return np.zeros(x.shape[:-1] + shape)


def _positive(descriptor: Dict[str, Any], key: str, default: float) -> float:
    value = descriptor.get(key, default)
    if not isinstance(value, (int, float)) or value <= 0:
        raise ConfigurationError(f"{descriptor.get('type')}: {key} must be positive, got {value!r}")
    return float(value)


def _dimension(descriptor: Dict[str, Any], default: int, maximum: int = 3) -> int:
    d = descriptor.get("dim", default)
    if not isinstance(d, int) or not 1 <= d <= maximum:
        raise ConfigurationError(f"{descriptor.get('type')}: dim must be an integer in [1, {maximum}], got {d!r}")
    return d


# ---------------------------------------------------------------- euclidean

def euclidean(descriptor: Dict[str, Any]) -> Dict[str, Any]:
    d = _dimension(descriptor, 2, maximum=6)
    box = ValidityBox.unbounded(d)
    metric = MetricField(lambda x: _eye(x, d), box, inverse=lambda x: _eye(x, d),
                         derivative=lambda x: _zeros(x, d, d, d))
    lc = ConnectionField(lambda x: _zeros(x, d, d, d), box, derivative=lambda x: _zeros(x, d, d, d, d))
    return dict(name=f"euclidean({d})", dim=d, metric=metric, levi_civita=lc, box=box,
                sampler=lambda rng, count: rng.uniform(-1.0, 1.0, size=(count, d)))


# ---------------------------------------------------------------- flat torus

def flat_torus(descriptor: Dict[str, Any]) -> Dict[str, Any]:
    d = _dimension(descriptor, 1, maximum=2)
    lengths = np.asarray(descriptor.get("lengths", [TWO_PI] * d), dtype=float)
    if lengths.shape != (d,) or np.any(lengths <= 0):
        raise ConfigurationError(f"flat_torus: lengths must be {d} positive numbers, got {descriptor.get('lengths')!r}")
    options = descriptor.get("metric", {}) or {}
    amplitude = float(options.get("conformal_amplitude", 0.0))
    scale = _positive(options, "scale", 1.0) if "scale" in options else 1.0
    omega = TWO_PI / lengths[0]
    box = ValidityBox.unbounded(d)

    # g = c² e^{2f} δ，f = ε sin(ω x_0)
    def f(x):
        return amplitude * np.sin(omega * x[..., 0])

    def grad_f(x):
        grad = _zeros(x, d)
        grad[..., 0] = amplitude * omega * np.cos(omega * x[..., 0])
        return grad

    def hess_f(x):
        hess = _zeros(x, d, d)
        hess[..., 0, 0] = -amplitude * omega ** 2 * np.sin(omega * x[..., 0])
        return hess

    def metric(x):
        return scale ** 2 * np.exp(2.0 * f(x))[..., None, None] * _eye(x, d)

    def inverse(x):
        return np.exp(-2.0 * f(x))[..., None, None] * _eye(x, d) / scale ** 2

    def derivative(x):
        return 2.0 * np.einsum('...k,...ij->...kij', grad_f(x), metric(x))

    delta = np.eye(d)

    def christoffel(x):
        df = grad_f(x)
        return (np.einsum('ki,...j->...kij', delta, df) + np.einsum('kj,...i->...kij', delta, df)
                - np.einsum('ij,...k->...kij', delta, df))

    def christoffel_derivative(x):
        ddf = hess_f(x)
        return (np.einsum('ki,...lj->...lkij', delta, ddf) + np.einsum('kj,...li->...lkij', delta, ddf)
                - np.einsum('ij,...lk->...lkij', delta, ddf))

    def sampler(rng, count):
        return rng.uniform(0.0, 1.0, size=(count, d)) * lengths

    return dict(name=f"flat_torus({d})", dim=d, box=box, periods=lengths,
                metric=MetricField(metric, box, inverse=inverse, derivative=derivative),
                levi_civita=ConnectionField(christoffel, box, derivative=christoffel_derivative),
                sampler=sampler)


# ---------------------------------------------------------------- sphere

def sphere(descriptor: Dict[str, Any]) -> Dict[str, Any]:
    radius = _positive(descriptor, "radius", 1.0)
    box = ValidityBox(np.array([0.0, -np.inf]), np.array([np.pi, np.inf]))

    def metric(x):
        g = _zeros(x, 2, 2)
        g[..., 0, 0] = radius ** 2
        g[..., 1, 1] = radius ** 2 * np.sin(x[..., 0]) ** 2
        return g

    def inverse(x):
        g = _zeros(x, 2, 2)
        g[..., 0, 0] = 1.0 / radius ** 2
        g[..., 1, 1] = 1.0 / (radius ** 2 * np.sin(x[..., 0]) ** 2)
        return g

    def derivative(x):
        dg = _zeros(x, 2, 2, 2)
        dg[..., 0, 1, 1] = radius ** 2 * np.sin(2.0 * x[..., 0])
        return dg

    def christoffel(x):
        theta = x[..., 0]
        gamma = _zeros(x, 2, 2, 2)
        gamma[..., 0, 1, 1] = -np.sin(theta) * np.cos(theta)
        gamma[..., 1, 0, 1] = gamma[..., 1, 1, 0] = np.cos(theta) / np.sin(theta)
        return gamma

    def christoffel_derivative(x):
        theta = x[..., 0]
        d_gamma = _zeros(x, 2, 2, 2, 2)
        d_gamma[..., 0, 0, 1, 1] = -np.cos(2.0 * theta)
        d_gamma[..., 0, 1, 0, 1] = d_gamma[..., 0, 1, 1, 0] = -1.0 / np.sin(theta) ** 2
        return d_gamma

    def sampler(rng, count):
        theta = rng.uniform(0.3, np.pi - 0.3, size=count)
        phi = rng.uniform(0.0, TWO_PI, size=count)
        return np.stack([theta, phi], axis=-1)

    return dict(name=f"sphere({radius:g})", dim=2, box=box,
                metric=MetricField(metric, box, inverse=inverse, derivative=derivative),
                levi_civita=ConnectionField(christoffel, box, derivative=christoffel_derivative),
                sampler=sampler)


# ---------------------------------------------------------------- normal family

def normal_cubic_form(x: np.ndarray) -> np.ndarray:
    """Amari–Chentsov 张量 T_ijk，坐标 (μ, σ)"""
    sigma = x[..., 1]
    t = _zeros(x, 2, 2, 2)
    t[..., 0, 0, 1] = t[..., 0, 1, 0] = t[..., 1, 0, 0] = 2.0 / sigma ** 3
    t[..., 1, 1, 1] = 8.0 / sigma ** 3
    return t


def _normal_alpha_coefficients(alpha: float) -> np.ndarray:
    c = np.zeros((2, 2, 2))
    c[0, 0, 1] = c[0, 1, 0] = -1.0 - alpha
    c[1, 0, 0] = (1.0 - alpha) / 2.0
    c[1, 1, 1] = -1.0 - 2.0 * alpha
    return c


def normal_alpha_connection(alpha: float, box: ValidityBox) -> ConnectionField:
    coefficients = _normal_alpha_coefficients(alpha)

    def christoffel(x):
        return coefficients / x[..., 1][..., None, None, None]

    def christoffel_derivative(x):
        d_gamma = _zeros(x, 2, 2, 2, 2)
        d_gamma[..., 1, :, :, :] = -coefficients / (x[..., 1] ** 2)[..., None, None, None]
        return d_gamma

    return ConnectionField(christoffel, box, derivative=christoffel_derivative)


def normal_family(descriptor: Dict[str, Any]) -> Dict[str, Any]:
    box = ValidityBox(np.array([-np.inf, 0.0]), np.array([np.inf, np.inf]))

    def metric(x):
        g = _zeros(x, 2, 2)
        g[..., 0, 0] = 1.0 / x[..., 1] ** 2
        g[..., 1, 1] = 2.0 / x[..., 1] ** 2
        return g

    def inverse(x):
        g = _zeros(x, 2, 2)
        g[..., 0, 0] = x[..., 1] ** 2
        g[..., 1, 1] = x[..., 1] ** 2 / 2.0
        return g

    def derivative(x):
        dg = _zeros(x, 2, 2, 2)
        dg[..., 1, 0, 0] = -2.0 / x[..., 1] ** 3
        dg[..., 1, 1, 1] = -4.0 / x[..., 1] ** 3
        return dg

    def sampler(rng, count):
        return np.stack([rng.uniform(-2.0, 2.0, size=count), rng.uniform(0.5, 2.0, size=count)], axis=-1)

    return dict(name="normal_family", dim=2, box=box,
                metric=MetricField(metric, box, inverse=inverse, derivative=derivative),
                levi_civita=normal_alpha_connection(0.0, box),
                alpha_connection=lambda alpha: normal_alpha_connection(alpha, box),
                cubic_form=normal_cubic_form, sampler=sampler)


# ---------------------------------------------------------------- simplex

def simplex(descriptor: Dict[str, Any]) -> Dict[str, Any]:
    d = _dimension(descriptor, 2)
    box = ValidityBox(np.zeros(d), np.ones(d), simplex=True)
    delta = np.eye(d)
    delta3 = np.einsum('ij,jk->ijk', delta, delta)
    delta4 = np.einsum('ijk,kl->ijkl', delta3, delta)

    def p0(x):
        return 1.0 - np.sum(x, axis=-1)

    def metric(x):
        return delta / x[..., None, :] + (1.0 / p0(x))[..., None, None]

    def inverse(x):
        return delta * x[..., None, :] - np.einsum('...i,...j->...ij', x, x)

    def derivative(x):
        return -delta3 / x[..., None, None, :] ** 2 + (1.0 / p0(x) ** 2)[..., None, None, None]

    def cubic_form(x):
        return -derivative(x)

    def alpha_connection(alpha: float) -> ConnectionField:
        c = -(1.0 + alpha) / 2.0

        # Γ^k_ij = c [δ_ij (δ_ki − p_k)/p_i − p_k/p_0]
        def christoffel(x):
            inv_p = 1.0 / x
            term = (np.einsum('ijk,...i->...kij', delta3, inv_p)
                    - np.einsum('ij,...i,...k->...kij', delta, inv_p, x))
            return c * (term - (x / p0(x)[..., None])[..., :, None, None])

        def christoffel_derivative(x):
            inv_p = 1.0 / x
            inv_p0 = 1.0 / p0(x)
            term = (-np.einsum('ijkl,...i->...lkij', delta4, inv_p ** 2)
                    - np.einsum('ij,kl,...i->...lkij', delta, delta, inv_p)
                    + np.einsum('ijl,...i,...k->...lkij', delta3, inv_p ** 2, x)
                    - np.einsum('kl,...->...lk', delta, inv_p0)[..., None, None] * np.ones((d, d))
                    - np.einsum('...k,...->...k', x, inv_p0 ** 2)[..., None, :, None, None])
            return c * term

        return ConnectionField(christoffel, box, derivative=christoffel_derivative)

    def sampler(rng, count):
        return rng.dirichlet(np.full(d + 1, 5.0), size=count)[:, :d]

    return dict(name=f"simplex({d})", dim=d, box=box,
                metric=MetricField(metric, box, inverse=inverse, derivative=derivative),
                levi_civita=alpha_connection(0.0), alpha_connection=alpha_connection,
                cubic_form=cubic_form, sampler=sampler)


# ---------------------------------------------------------------- overrides

def cubic_connection(base: ConnectionField, metric: MetricField, box: ValidityBox,
                     options: Dict[str, Any]) -> ConnectionField:
    """Γ = Γ^LC + g⁻¹T，T_ijk = constant + amplitude·sin(wavenumber·x_0)"""
    constant = float(options.get("constant", 0.0))
    amplitude = float(options.get("amplitude", 0.0))
    wavenumber = float(options.get("wavenumber", 1.0))

    def christoffel(x):
        t = constant + amplitude * np.sin(wavenumber * x[..., 0])
        d = x.shape[-1]
        raised = np.einsum('...kl->...k', metric.inverse(x))
        return base(x) + (t[..., None] * raised)[..., :, None, None] * np.ones((d, d))

    return ConnectionField(christoffel, box)


BUILDERS: Dict[str, Callable[[Dict[str, Any]], Dict[str, Any]]] = {
    "euclidean": euclidean,
    "flat_torus": flat_torus,
    "sphere": sphere,
    "normal_family": normal_family,
    "simplex": simplex,
}


def make_manifold(spec: Dict[str, Any], verify: bool = True) -> ChartManifold:
    if not isinstance(spec, dict):
        raise ConfigurationError(f"manifold descriptor must be an object, got {type(spec).__name__}")
    kind = spec.get("type")
    if kind not in BUILDERS:
        raise ConfigurationError(f"unknown manifold type: {kind!r}")
    parts = BUILDERS[kind](spec)
    box = parts["box"]
    metric = parts["metric"]
    lc = parts["levi_civita"]

    alpha = float(spec.get("alpha", 0.0))
    override = spec.get("connection") or {}
    connection_kind = override.get("kind")
    if connection_kind is not None and connection_kind not in CONNECTION_KINDS:
        raise ConfigurationError(f"unknown connection kind: {connection_kind!r}")
    if connection_kind == "alpha":
        alpha = float(override.get("alpha", alpha))
    elif connection_kind == "levi_civita":
        alpha = 0.0
    if (alpha != 0.0 or connection_kind == "alpha") and "alpha_connection" not in parts:
        raise ConfigurationError(f"{kind} has no alpha-connection family")

    cubic_form: Optional[Callable] = None
    if connection_kind == "cubic":
        connection = cubic_connection(lc, metric, box, override)
        is_levi_civita = False
    elif "alpha_connection" in parts and alpha != 0.0:
        connection = parts["alpha_connection"](alpha)
        is_levi_civita = False
        if parts.get("cubic_form") is not None:
            cubic_form = parts["cubic_form"]
    else:
        connection = lc
        is_levi_civita = True
        cubic_form = parts.get("cubic_form")

    source = spec.get("curvature_source", config.curvature_source)
    if source not in CURVATURE_SOURCES:
        raise ConfigurationError(f"unknown curvature source: {source!r}")

    name = parts["name"]
    if connection_kind == "cubic":
        name = f"{name}[cubic]"
    elif not is_levi_civita:
        name = f"{name}[alpha={alpha:g}]"

    manifold = ChartManifold(
        name=name, dim=parts["dim"], metric=metric, connection=connection, box=box,
        levi_civita_connection=lc, is_levi_civita=is_levi_civita, cubic_form=cubic_form,
        sampler=parts.get("sampler"), curvature_source=source, periods=parts.get("periods"),
        descriptor=dict(spec),
    )
    if verify:
        verify_statistical(manifold)
    return manifold


def verify_statistical(m: ChartManifold, samples: int = 8) -> float:
    points = m.sample(np.random.default_rng(0), samples)
    residual = codazzi_residual(m, points)
    tolerance = config.structural_tolerance if m.metric.analytic_derivative else config.codazzi_tolerance
    if residual > tolerance:
        raise StructuralError(f"{m.name}: Codazzi residual {residual:.3e} exceeds {tolerance:.1e}")
    logger.debug(f"{m.name}: Codazzi residual {residual:.3e}")
    return residual
