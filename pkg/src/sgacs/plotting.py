"""Image output: plain-text graymaps and matplotlib figures.

Graymaps are ASCII PGM (``P2``).  Values map linearly from ``[lo, hi]`` to
gray levels ``0..255`` after clipping; masked (NaN) cells are written as 0.
Image rows run from the largest second coordinate down, so the picture has
the usual orientation with x1 to the right and x2 up.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

MAXVAL = 255
# no timestamps or version strings, so identical data gives identical bytes
PNG_METADATA = {"Software": None}


def to_gray(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    scaled = (np.clip(values, lo, hi) - lo) / (hi - lo)
    gray = np.rint(scaled * MAXVAL)
    return np.where(np.isfinite(gray), gray, 0).astype(int)


def write_pgm(path, values: np.ndarray, lo: float | None = None, hi: float | None = None,
              comment: str = "") -> Path:
    """Write a 2-D field (indexed ``[i1, i2]``) as an ASCII graymap."""
    values = np.asarray(values, float)
    if values.ndim != 2:
        raise ValueError("graymaps need a 2-D field")
    finite = values[np.isfinite(values)]
    lo = float(finite.min()) if lo is None and finite.size else (0.0 if lo is None else lo)
    hi = float(finite.max()) if hi is None and finite.size else (1.0 if hi is None else hi)
    img = to_gray(values, lo, hi).T[::-1]
    rows = [" ".join(map(str, r)) for r in img]
    header = ["P2", f"# linear map: {lo!r} -> 0, {hi!r} -> {MAXVAL}; masked -> 0"]
    if comment:
        header.append(f"# {comment}")
    header += [f"{img.shape[1]} {img.shape[0]}", str(MAXVAL)]
    p = Path(path)
    p.write_text("\n".join(header + rows) + "\n")
    return p


def read_pgm(path) -> np.ndarray:
    """Gray levels as an image array (rows top to bottom)."""
    tokens = [t for line in Path(path).read_text().splitlines() if not line.startswith("#") for t in line.split()]
    if tokens[0] != "P2":
        raise ValueError("not an ASCII graymap")
    w, h = int(tokens[1]), int(tokens[2])
    return np.array(tokens[4:4 + w * h], int).reshape(h, w)


def _save(fig, path) -> Path:
    p = Path(path)
    fig.savefig(p, dpi=100, metadata=PNG_METADATA)
    plt.close(fig)
    return p


def plot_field(path, grid, values: np.ndarray, title: str, vmin=None, vmax=None, cmap="viridis") -> Path:
    x1, x2 = grid.axis_coords(0), grid.axis_coords(1)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    mesh = ax.pcolormesh(x1, x2, np.asarray(values, float).T, shading="nearest", vmin=vmin, vmax=vmax, cmap=cmap)
    fig.colorbar(mesh, ax=ax)
    ax.set_aspect("equal")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title(title)
    return _save(fig, path)


def plot_velocity(path, grid, velocity: np.ndarray, magnitude: np.ndarray, polylines, title: str,
                  stride: int = 8, clip: float = 0.5) -> Path:
    """Clipped speed as background colour, arrows every ``stride`` cells, ergosurface in white."""
    x1, x2 = grid.axis_coords(0), grid.axis_coords(1)
    fig, ax = plt.subplots(figsize=(5.5, 4.8))
    mesh = ax.pcolormesh(x1, x2, np.asarray(magnitude).T, shading="nearest", vmin=0, vmax=clip, cmap="magma")
    fig.colorbar(mesh, ax=ax, label=f"|grad theta| (clipped at {clip:g})")
    s = slice(None, None, stride)
    X1, X2 = np.meshgrid(x1[s], x2[s], indexing="ij")
    V1 = np.nan_to_num(velocity[0][s, s])
    V2 = np.nan_to_num(velocity[1][s, s])
    ax.quiver(X1, X2, V1, V2, color="cyan", angles="xy")
    for line in polylines:
        ax.plot(line[:, 0], line[:, 1], color="white", lw=1)
    ax.set_aspect("equal")
    ax.set_xlim(x1[0], x1[-1])
    ax.set_ylim(x2[0], x2[-1])
    ax.set_title(title)
    return _save(fig, path)


def plot_timeseries(path, rows: list[dict], title: str) -> Path:
    t = np.array([r["t"] for r in rows])
    e = np.array([r["energy"] for r in rows])
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    ref = e[0] if e.size and e[0] != 0 else 1.0
    a1.plot(t, e / ref - 1)
    a1.set_ylabel("relative energy change")
    a2.plot(t, [r["min"] for r in rows], label="min")
    a2.plot(t, [r["max"] for r in rows], label="max")
    a2.set_ylabel("theta")
    a2.set_xlabel("t")
    a2.legend()
    a1.set_title(title)
    return _save(fig, path)


def plot_profile(path, x: np.ndarray, curves: dict[str, np.ndarray], title: str, xlabel: str = "x") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in curves.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.legend()
    ax.set_title(title)
    return _save(fig, path)
