from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from ..errors import ConfigurationError
from ..geometry import ChartManifold
from ..grid import DomainGrid, MapField


def _vector(values, dim: int, what: str) -> np.ndarray:
    vector = np.asarray(values, dtype=float)
    if vector.shape != (dim,):
        raise ConfigurationError(f"{what} must have {dim} components, got {list(values)}")
    return vector


def build_map(descriptor: Dict[str, Any], grid: DomainGrid, target: ChartManifold,
              rng: Optional[np.random.Generator] = None, base_dir: Optional[Path] = None) -> MapField:
    """按描述符构造 MapField（周期部分 + 绕行斜率）"""
    kind = descriptor["type"]
    d = target.dim
    periodic = np.zeros(grid.shape + (d,))
    slope = np.zeros((d, grid.dim))
    phase = 2.0 * np.pi * grid.points[..., 0] / grid.lengths[0]

    if kind == "constant":
        periodic += _vector(descriptor["point"], d, "constant point")
    elif kind == "identity":
        if target.dim != grid.dim:
            raise ConfigurationError("identity map needs equal domain and target dimensions")
        slope = np.eye(d)
    elif kind == "circle_embed":
        k = descriptor.get("k", 1)
        radius = descriptor.get("radius", 1.0)
        center = _vector(descriptor.get("center", [0.0] * d), d, "circle center")
        periodic[..., 0] = radius * np.cos(k * phase)
        periodic[..., 1] = radius * np.sin(k * phase)
        periodic += center
    elif kind == "great_circle":
        periodic[..., 0] = np.pi / 2.0
        slope[1, 0] = 2.0 * np.pi * descriptor.get("k", 1) / grid.lengths[0]
    elif kind == "fourier":
        periodic += _vector(descriptor["base"], d, "fourier base")
        for mode in descriptor.get("modes", []):
            axis = mode.get("axis", 0)
            if axis >= grid.dim:
                raise ConfigurationError(f"fourier mode axis {axis} out of range")
            angle = 2.0 * np.pi * mode["k"] * grid.points[..., axis] / grid.lengths[axis]
            if "cos" in mode:
                periodic += np.cos(angle)[..., None] * _vector(mode["cos"], d, "mode cos")
            if "sin" in mode:
                periodic += np.sin(angle)[..., None] * _vector(mode["sin"], d, "mode sin")
    elif kind == "file":
        path = Path(descriptor["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        slope = np.asarray(descriptor.get("slope", np.zeros((d, grid.dim))), dtype=float)
        u = MapField.from_csv(path, grid, target, slope)
        periodic, slope = u.periodic, u.slope
    else:
        raise ConfigurationError(f"unknown map type: {kind!r}")

    perturbation = descriptor.get("perturbation")
    if perturbation:
        if rng is None:
            raise ConfigurationError("map perturbation needs a seeded generator")
        periodic = periodic + perturbation["amplitude"] * grid.smooth_random_field(
            d, rng, perturbation.get("max_mode"))
    return MapField(grid, target, periodic, slope)
