"""Uniform rectangular grids, finite-difference stencils and the grid dump format.

Fields are plain numpy arrays whose trailing ``d`` axes are the spatial axes of
the grid (row-major, ``indexing='ij'``).  Leading axes are batch axes: an
imaginary-time axis, vector components, or both.  Vector fields carry their
component axis first, ``shape == (d, *grid.shape)``.

Masked cells are encoded as NaN.  Every stencil propagates NaN, so an output
cell whose stencil touches a masked cell is itself masked.

Units: hbar = m = 1 unless set explicitly; lengths are measured in healing
lengths, densities in a reference density, V0 is dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GridError, SizeError

PERIODIC = "periodic"
FIXED = "fixed"
NEUMANN = "neumann"
BOUNDARY_RULES = (PERIODIC, FIXED, NEUMANN)


@dataclass(frozen=True)
class Grid:
    """Uniform spatial grid with an optional periodic imaginary-time axis.

    ``shape`` and ``spacing`` list the spatial axes.  ``bc`` holds one boundary
    rule per axis.  When ``n_tau`` is set the grid also describes an imaginary
    time interval ``[0, beta_hbar)`` with ``n_tau`` points; that axis is always
    periodic.
    """

    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...] | None = None
    bc: tuple[str, ...] | None = None
    n_tau: int | None = None
    beta_hbar: float | None = None

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        spacing = tuple(float(h) for h in self.spacing)
        d = len(shape)
        if d not in (1, 2, 3):
            raise GridError(f"spatial dimension must be 1, 2 or 3, got {d}")
        if len(spacing) != d:
            raise GridError("one spacing per axis required")
        if any(h <= 0 or not np.isfinite(h) for h in spacing):
            raise GridError(f"spacings must be positive, got {spacing}")
        if any(n < 3 for n in shape):
            raise SizeError(f"every axis needs at least 3 points, got {shape}")
        origin = tuple(float(o) for o in self.origin) if self.origin is not None else (0.0,) * d
        bc = tuple(self.bc) if self.bc is not None else (PERIODIC,) * d
        if len(origin) != d or len(bc) != d:
            raise GridError("origin and bc need one entry per axis")
        for rule in bc:
            if rule not in BOUNDARY_RULES:
                raise GridError(f"unknown boundary rule {rule!r}")
        if (self.n_tau is None) != (self.beta_hbar is None):
            raise GridError("n_tau and beta_hbar must be given together")
        if self.n_tau is not None:
            if int(self.n_tau) < 2 or not self.beta_hbar > 0:
                raise GridError("imaginary-time axis needs n_tau >= 2 and beta_hbar > 0")
            object.__setattr__(self, "n_tau", int(self.n_tau))
            object.__setattr__(self, "beta_hbar", float(self.beta_hbar))
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "bc", bc)

    @classmethod
    def centered(cls, shape, extent, bc=None, **kw):
        """Grid whose nodes span ``[-extent_i, extent_i]`` on every axis."""
        shape = tuple(shape)
        extent = np.broadcast_to(np.asarray(extent, float), (len(shape),))
        spacing = tuple(2 * e / (n - 1) for e, n in zip(extent, shape))
        origin = tuple(-e for e in extent)
        return cls(shape, spacing, origin, bc, **kw)

    @classmethod
    def periodic_box(cls, shape, length, **kw):
        """Periodic grid of ``n`` cells per axis covering ``[0, length)``."""
        shape = tuple(shape)
        length = np.broadcast_to(np.asarray(length, float), (len(shape),))
        spacing = tuple(L / n for L, n in zip(length, shape))
        return cls(shape, spacing, None, (PERIODIC,) * len(shape), **kw)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return self.cell_volume * self.size

    @property
    def dtau(self) -> float | None:
        return None if self.n_tau is None else self.beta_hbar / self.n_tau

    @property
    def spacetime_shape(self) -> tuple[int, ...]:
        if self.n_tau is None:
            raise GridError("grid has no imaginary-time axis")
        return (self.n_tau,) + self.shape

    def axis_coords(self, axis: int) -> np.ndarray:
        n, h, o = self.shape[axis], self.spacing[axis], self.origin[axis]
        offset = np.arange(n) - 0.5 * (n - 1)
        centre = o + 0.5 * (n - 1) * h
        if abs(centre) <= 1e-12 * max(abs(o), h):
            # centred axis: exact mirror symmetry x[i] == -x[n-1-i]
            return h * offset
        return centre + h * offset

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays, one per axis, each of full grid shape."""
        axes = [self.axis_coords(i) for i in range(self.ndim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        for a in mesh:
            a.flags.writeable = False
        return tuple(mesh)

    @cached_property
    def radius(self) -> np.ndarray:
        r = np.sqrt(sum(x**2 for x in self.coords))
        r.flags.writeable = False
        return r

    def zeros(self, components: int | None = None, dtype=float) -> np.ndarray:
        shape = self.shape if components is None else (components,) + self.shape
        return np.zeros(shape, dtype=dtype)

    def check(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        f = np.asarray(f)
        if f.shape[f.ndim - self.ndim:] != self.shape:
            raise GridError(f"{name} has shape {f.shape}, grid is {self.shape}")
        return f

    def integrate(self, f: np.ndarray) -> float | complex:
        """Riemann sum over the spatial axes, skipping masked (NaN) cells."""
        f = self.check(f)
        axes = tuple(range(f.ndim - self.ndim, f.ndim))
        return np.nansum(f, axis=axes) * self.cell_volume

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """Discrete L2 inner product <f, g> = sum conj(f) g dV over unmasked cells."""
        return self.integrate(np.conj(self.check(f)) * self.check(g))

    def header(self) -> str:
        def fmt(values):
            return ",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in values)

        return (f"# GRID d={self.ndim} n={fmt(self.shape)} dx={fmt(self.spacing)} "
                f"origin={fmt(self.origin)} bc={','.join(self.bc)}")


def _require(grid: Grid, axis: int, npts: int):
    if grid.shape[axis] < npts:
        raise SizeError(f"axis {axis} has {grid.shape[axis]} points, stencil needs {npts}")


def _partial(f: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """Second-order first derivative along spatial ``axis`` of ``f``."""
    _require(grid, axis, 3)
    ax = f.ndim - grid.ndim + axis
    h = grid.spacing[axis]
    rule = grid.bc[axis]
    if rule == PERIODIC:
        return (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2 * h)
    out = np.empty_like(f)
    fm = np.moveaxis(f, ax, 0)
    om = np.moveaxis(out, ax, 0)
    om[1:-1] = (fm[2:] - fm[:-2]) / (2 * h)
    if rule == FIXED:
        om[0] = (-3 * fm[0] + 4 * fm[1] - fm[2]) / (2 * h)
        om[-1] = (3 * fm[-1] - 4 * fm[-2] + fm[-3]) / (2 * h)
    else:
        # mirror ghost node: the centered difference at the wall is zero
        om[0] = 0.0 * fm[0]
        om[-1] = 0.0 * fm[-1]
    return out


def gradient(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Central-difference gradient; returns shape ``(d, *f.shape)``."""
    f = grid.check(f)
    return np.stack([_partial(f, grid, i) for i in range(grid.ndim)])


def divergence(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Divergence of a vector field laid out as ``(d, ..., *grid.shape)``."""
    u = grid.check(u, "vector field")
    if u.shape[0] != grid.ndim:
        raise GridError(f"vector field has {u.shape[0]} components on a {grid.ndim}-D grid")
    return sum(_partial(u[i], grid, i) for i in range(grid.ndim))


def laplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    """``divergence(gradient(f))`` exactly, so summation by parts holds on periodic axes."""
    return divergence(gradient(f, grid), grid)


def laplacian_compact(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Three-point-per-axis Laplacian.

    Fixed-value axes use a one-sided second-order formula on the wall nodes and
    therefore need at least four points.
    """
    f = grid.check(f)
    out = np.zeros_like(f)
    for axis in range(grid.ndim):
        ax = f.ndim - grid.ndim + axis
        h2 = grid.spacing[axis] ** 2
        rule = grid.bc[axis]
        if rule == PERIODIC:
            out += (np.roll(f, -1, axis=ax) - 2 * f + np.roll(f, 1, axis=ax)) / h2
            continue
        fm = np.moveaxis(f, ax, 0)
        part = np.empty_like(fm)
        part[1:-1] = (fm[2:] - 2 * fm[1:-1] + fm[:-2]) / h2
        if rule == NEUMANN:
            part[0] = 2 * (fm[1] - fm[0]) / h2
            part[-1] = 2 * (fm[-2] - fm[-1]) / h2
        else:
            _require(grid, axis, 4)
            part[0] = (2 * fm[0] - 5 * fm[1] + 4 * fm[2] - fm[3]) / h2
            part[-1] = (2 * fm[-1] - 5 * fm[-2] + 4 * fm[-3] - fm[-4]) / h2
        out += np.moveaxis(part, 0, ax)
    return out


# --- sparse operators -------------------------------------------------------

def _kron_axis(op1d: sp.spmatrix, grid: Grid, axis: int) -> sp.csr_matrix:
    mats = [sp.identity(n, format="csr") for n in grid.shape]
    mats[axis] = op1d
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.csr_matrix(out)


def forward_difference_matrix(grid: Grid, axis: int, twist: float = 0.0):
    """Sparse forward difference ``(f[i+1] - f[i]) / h`` along ``axis``.

    Returns ``(D, b)`` with the difference equal to ``D @ f.ravel() + b``.
    ``b`` is nonzero only for a twisted periodic axis, where the field obeys
    ``f(x + L) = f(x) + twist``.  On non-periodic axes the last row (which
    would reach past the wall) is zero, so wall links simply do not exist.
    """
    n, h = grid.shape[axis], grid.spacing[axis]
    main = -np.ones(n)
    upper = np.ones(n - 1)
    d1 = sp.diags([main, upper], [0, 1], shape=(n, n), format="lil")
    offset = np.zeros(n)
    if grid.bc[axis] == PERIODIC:
        d1[n - 1, 0] = 1.0
        offset[n - 1] = twist
    else:
        d1[n - 1, n - 1] = 0.0
    D = _kron_axis(sp.csr_matrix(d1) / h, grid, axis)
    b = np.broadcast_to(
        np.expand_dims(offset / h, tuple(i for i in range(grid.ndim) if i != axis)),
        grid.shape).ravel().copy()
    return D, b


def central_difference_matrix(grid: Grid, axis: int, twist: float = 0.0):
    """Sparse central difference along ``axis``; same ``(D, b)`` convention.

    Non-periodic axes use the same wall rows as :func:`gradient`.
    """
    n, h = grid.shape[axis], grid.spacing[axis]
    d1 = sp.lil_matrix((n, n))
    offset = np.zeros(n)
    for i in range(1, n - 1):
        d1[i, i + 1] = 0.5
        d1[i, i - 1] = -0.5
    rule = grid.bc[axis]
    if rule == PERIODIC:
        d1[0, 1], d1[0, n - 1] = 0.5, -0.5
        d1[n - 1, 0], d1[n - 1, n - 2] = 0.5, -0.5
        offset[0] = 0.5 * twist
        offset[n - 1] = 0.5 * twist
    elif rule == FIXED:
        d1[0, 0], d1[0, 1], d1[0, 2] = -1.5, 2.0, -0.5
        d1[n - 1, n - 1], d1[n - 1, n - 2], d1[n - 1, n - 3] = 1.5, -2.0, 0.5
    D = _kron_axis(sp.csr_matrix(d1) / h, grid, axis)
    b = np.broadcast_to(
        np.expand_dims(offset / h, tuple(i for i in range(grid.ndim) if i != axis)),
        grid.shape).ravel().copy()
    return D, b


# --- grid dump format ---------------------------------------------------------

def _parse_header(line: str) -> Grid:
    if not line.startswith("# GRID"):
        raise GridError(f"not a grid dump header: {line!r}")
    items = dict(tok.split("=", 1) for tok in line[len("# GRID"):].split())
    d = int(items["d"])
    shape = tuple(int(v) for v in items["n"].split(","))
    spacing = tuple(float(v) for v in items["dx"].split(","))
    origin = tuple(float(v) for v in items["origin"].split(","))
    bc = tuple(items["bc"].split(","))
    if len(shape) != d:
        raise GridError("header dimension does not match axis count")
    return Grid(shape, spacing, origin, bc)


def format_value(x: float) -> str:
    return "nan" if np.isnan(x) else repr(float(x))


def write_dump(path, field: np.ndarray, grid: Grid) -> Path:
    """Write a real scalar field as a header line plus one value per line."""
    field = np.asarray(grid.check(field), dtype=float)
    if field.shape != grid.shape:
        raise GridError("dumps hold exactly one scalar component")
    path = Path(path)
    lines = [grid.header()]
    lines.extend(format_value(x) for x in field.ravel(order="C"))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_dump(path) -> tuple[np.ndarray, Grid]:
    text = Path(path).read_text().splitlines()
    grid = _parse_header(text[0])
    values = np.array([float(v) for v in text[1:] if v.strip()])
    if values.size != grid.size:
        raise GridError(f"{path}: expected {grid.size} values, found {values.size}")
    return values.reshape(grid.shape), grid
