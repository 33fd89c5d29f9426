"""Acoustic-metric tensors built from a background, and ergosurface extraction.

Index 0 is time, indices 1..d are the spatial axes.  Per-cell tensors are
stored with the two tensor indices trailing: ``shape == (*grid.shape, d+1, d+1)``.
Cells where the background is masked or the sound speed vanishes hold NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from skimage.measure import find_contours

from .background import Background
from .errors import DimensionError
from .grid import Grid, write_dump

SOUND = "sound"
FIGURE1 = "figure1"


def _flow_and_speed(bg: Background):
    cs2 = np.where(bg.mask & (bg.cs2 > 0), bg.cs2, np.nan)
    u = np.moveaxis(bg.flow(), 0, -1)
    return u, cs2


def f_tensor_from_flow(u: np.ndarray, cs2: np.ndarray, V0: float) -> np.ndarray:
    """f^{00} = -1/V0, f^{0j} = u_j/V0, f^{ij} = (cs2 delta_ij - u_i u_j)/V0.

    ``u`` has its component axis last.
    """
    d = u.shape[-1]
    f = np.empty(cs2.shape + (d + 1, d + 1))
    f[..., 0, 0] = -1.0
    f[..., 0, 1:] = u
    f[..., 1:, 0] = u
    f[..., 1:, 1:] = cs2[..., None, None] * np.eye(d) - u[..., :, None] * u[..., None, :]
    f /= V0
    f[np.isnan(cs2) | np.any(np.isnan(u), axis=-1)] = np.nan
    return f


def build_f_tensor(bg: Background) -> np.ndarray:
    u, cs2 = _flow_and_speed(bg)
    return f_tensor_from_flow(u, cs2, bg.V0)


def f_determinant(cs2: np.ndarray, V0: float, d: int) -> np.ndarray:
    return -(cs2**d) / V0 ** (d + 1)


def sqrt_neg_g(cs2: np.ndarray, V0: float, d: int) -> np.ndarray:
    """Conformal factor from sqrt(-g) g^{mu nu} = f^{mu nu}; undefined for d = 1."""
    if d == 1:
        raise DimensionError("the conformal factor is undetermined in 1+1 dimensions; use the f-tensor")
    return (cs2**d / V0 ** (d + 1)) ** (1.0 / (d - 1))


@dataclass(frozen=True)
class AcsMetric:
    grid: Grid
    f: np.ndarray
    contravariant: np.ndarray
    covariant: np.ndarray
    sqrt_neg_g: np.ndarray
    cs: np.ndarray
    u: np.ndarray
    V0: float

    @property
    def d(self) -> int:
        return self.grid.ndim

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.sqrt_neg_g) & np.all(np.isfinite(self.f), axis=(-2, -1))

    def components(self) -> dict[str, np.ndarray]:
        """Independent components keyed ``g^mn``, ``g_mn``, ``f^mn`` plus ``sqrt_neg_g``."""
        out = {"sqrt_neg_g": self.sqrt_neg_g}
        n = self.d + 1
        for a in range(n):
            for b in range(a, n):
                out[f"f^{a}{b}"] = self.f[..., a, b]
                out[f"g^{a}{b}"] = self.contravariant[..., a, b]
                out[f"g_{a}{b}"] = self.covariant[..., a, b]
        return out

    def save(self, directory) -> list[Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        written = []
        for name, arr in self.components().items():
            fname = name.replace("^", "up").replace("_", "dn") if name != "sqrt_neg_g" else name
            written.append(write_dump(d / f"{fname}.grid", arr, self.grid))
        return written


def covariant_closed_form(u: np.ndarray, cs2: np.ndarray, root: np.ndarray, V0: float) -> np.ndarray:
    """Block form of the inverse: (root V0 / cs2) [[-cs2 + u.u, u], [u, I]]."""
    d = u.shape[-1]
    g = np.empty(cs2.shape + (d + 1, d + 1))
    g[..., 0, 0] = -cs2 + np.sum(u * u, axis=-1)
    g[..., 0, 1:] = u
    g[..., 1:, 0] = u
    g[..., 1:, 1:] = np.eye(d)
    return g * (root * V0 / cs2)[..., None, None]


def build_metric(bg: Background) -> AcsMetric:
    d = bg.grid.ndim
    if d == 1:
        raise DimensionError("1+1 dimensional backgrounds have no unique metric; use build_f_tensor")
    u, cs2 = _flow_and_speed(bg)
    f = f_tensor_from_flow(u, cs2, bg.V0)
    root = sqrt_neg_g(cs2, bg.V0, d)
    contra = f / root[..., None, None]
    cov = covariant_closed_form(u, cs2, root, bg.V0)
    return AcsMetric(bg.grid, f, contra, cov, root, np.sqrt(cs2), u, bg.V0)


def metric_residuals(metric: AcsMetric) -> dict[str, float]:
    """Worst-cell residuals of the defining identities over valid cells."""
    ok = metric.valid
    n = metric.d + 1
    contra, cov, f = metric.contravariant[ok], metric.covariant[ok], metric.f[ok]
    root = metric.sqrt_neg_g[ok]
    cs2 = metric.cs[ok] ** 2
    ident = np.einsum("...ij,...jk->...ik", contra, cov) - np.eye(n)
    det_f = np.linalg.det(f)
    det_ref = f_determinant(cs2, metric.V0, metric.d)
    eig = np.linalg.eigvalsh(cov)
    signature_ok = bool(np.all(eig[:, 0] < 0) and np.all(eig[:, 1:] > 0))
    return {
        "inverse": float(np.max(np.abs(ident))) if ident.size else 0.0,
        "det_f": float(np.max(np.abs(det_f - det_ref) / np.abs(det_ref))) if det_f.size else 0.0,
        "conformal": float(np.max(np.abs(root[:, None, None] * contra - f))) if f.size else 0.0,
        "numeric_inverse": float(np.max(np.abs(np.linalg.inv(contra) - cov) / np.abs(cov).max(axis=(1, 2))[:, None, None]))
        if f.size else 0.0,
        "signature": 0.0 if signature_ok else 1.0,
        "sqrt_neg_g_positive": 0.0 if bool(np.all(root > 0)) else 1.0,
    }


# --- ergosurface ----------------------------------------------------------------

@dataclass(frozen=True)
class Ergosurface:
    grid: Grid
    mask: np.ndarray
    speed2: np.ndarray
    threshold: np.ndarray | float
    polylines: list[np.ndarray]

    @property
    def area(self) -> float:
        return float(np.count_nonzero(self.mask)) * self.grid.cell_volume

    def polylines_csv(self) -> str:
        rows = ["x,y,segment_id"]
        for sid, line in enumerate(self.polylines):
            rows += [f"{x!r},{y!r},{sid}" for x, y in line]
        return "\n".join(rows) + "\n"


def ergosurface(bg: Background, velocity_unit: str = SOUND) -> Ergosurface:
    """Ergoregion mask and, in 2-D, its boundary polylines.

    ``velocity_unit='sound'`` marks cells with |u|^2 >= cs^2.  ``'figure1'``
    treats theta_H0 as unitless and marks |grad theta_H0|^2 >= 1/2.  Masked
    cells never belong to the ergoregion; for contouring they count as still
    fluid.
    """
    if velocity_unit == SOUND:
        u, cs2 = _flow_and_speed(bg)
        speed2 = np.sum(u * u, axis=-1)
        excess = speed2 - cs2
        threshold = cs2
    elif velocity_unit == FIGURE1:
        grad = bg.phase_gradient()
        speed2 = np.where(bg.mask, np.sum(grad * grad, axis=0), np.nan)
        excess = speed2 - 0.5
        threshold = 0.5
    else:
        raise ValueError(f"unknown velocity unit {velocity_unit!r}")
    mask = np.nan_to_num(excess, nan=-np.inf) >= 0
    polylines = []
    if bg.grid.ndim == 2:
        level = np.nan_to_num(excess, nan=-1.0, neginf=-1.0)
        h = np.array(bg.grid.spacing)
        o = np.array(bg.grid.origin)
        polylines = [o + c * h for c in find_contours(level, 0.0)]
    return Ergosurface(bg.grid, mask, speed2, threshold, polylines)
