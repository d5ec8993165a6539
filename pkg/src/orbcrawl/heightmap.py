"""Target-surface height map ``m(x, y)`` in the scenario's inertial frame."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_CLEARANCE = 0.05


class MapBoundsError(ValueError):
    pass


@dataclass(frozen=True)
class HeightMap:
    """Bilinear grid, or an analytic plane ``z = z0 + gx*x + gy*y`` when ``heights`` is None.

    ``heights[i, j]`` is the height at ``(origin_x + j*cell, origin_y + i*cell)``
    (rows run along y).
    """

    origin: tuple = (-10.0, -10.0)
    cell: float = 1.0
    heights: np.ndarray | None = None
    plane: tuple = (0.0, 0.0, 0.0)  # (z0, gx, gy)
    extent: tuple | None = None  # plane bounds (xmin, xmax, ymin, ymax)

    def __post_init__(self):
        if self.heights is not None:
            h = np.asarray(self.heights, dtype=float)
            if h.ndim != 2 or min(h.shape) < 2:
                raise ValueError("height grid needs at least 2x2 samples")
            if not np.all(np.isfinite(h)):
                raise ValueError("height grid has non-finite values")
            if self.cell <= 0.0:
                raise ValueError("cell size must be positive")
            object.__setattr__(self, "heights", h)

    @classmethod
    def flat(cls, z=0.0, extent=(-50.0, 50.0, -50.0, 50.0)):
        return cls(plane=(float(z), 0.0, 0.0), extent=extent)

    @classmethod
    def plane_map(cls, z0, gx, gy, extent=(-50.0, 50.0, -50.0, 50.0)):
        return cls(plane=(float(z0), float(gx), float(gy)), extent=extent)

    @property
    def is_grid(self):
        return self.heights is not None

    @property
    def bounds(self):
        if self.is_grid:
            ny, nx = self.heights.shape
            ox, oy = self.origin
            return (ox, ox + (nx - 1) * self.cell, oy, oy + (ny - 1) * self.cell)
        return self.extent if self.extent is not None else (-np.inf, np.inf, -np.inf, np.inf)

    def contains(self, x, y):
        xmin, xmax, ymin, ymax = self.bounds
        eps = 1e-12
        return bool(np.all((x >= xmin - eps) & (x <= xmax + eps) & (y >= ymin - eps) & (y <= ymax + eps)))

    def height_at(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not self.contains(x, y):
            raise MapBoundsError(f"query ({x}, {y}) outside map bounds {self.bounds}")
        if not self.is_grid:
            z0, gx, gy = self.plane
            out = z0 + gx * x + gy * y
        else:
            out = bilinear(self.heights, self.origin, self.cell, x, y, np)
        return float(out) if np.ndim(out) == 0 else out

    def clearance(self, p, delta=DEFAULT_CLEARANCE):
        """Signed margin ``p_z - m(p_x, p_y) - delta``; positive when clear."""
        p = np.asarray(p, dtype=float)
        return p[..., 2] - self.height_at(p[..., 0], p[..., 1]) - delta

    def to_config(self):
        if self.is_grid:
            return {"type": "grid", "origin": list(self.origin), "cell": self.cell, "heights": self.heights.tolist()}
        return {"type": "plane", "z0": self.plane[0], "gx": self.plane[1], "gy": self.plane[2],
                "extent": list(self.extent) if self.extent else None}

    @classmethod
    def from_config(cls, cfg, base_dir=None):
        kind = cfg.get("type", "plane")
        if kind == "flat":
            return cls.flat(cfg.get("z", 0.0))
        if kind == "plane":
            extent = cfg.get("extent") or (-50.0, 50.0, -50.0, 50.0)
            return cls.plane_map(cfg.get("z0", 0.0), cfg.get("gx", 0.0), cfg.get("gy", 0.0), tuple(extent))
        if kind == "grid":
            if "file" in cfg:
                path = Path(cfg["file"])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                return load_grid(path)
            return cls(origin=tuple(cfg["origin"]), cell=float(cfg["cell"]), heights=np.asarray(cfg["heights"]))
        raise ValueError(f"unknown map type {kind!r}")


def bilinear(heights, origin, cell, x, y, xp):
    """Bilinear interpolation usable with numpy or jax.numpy (``xp``)."""
    ny, nx = heights.shape
    fx = (x - origin[0]) / cell
    fy = (y - origin[1]) / cell
    j = xp.clip(xp.floor(fx), 0, nx - 2).astype(int)
    i = xp.clip(xp.floor(fy), 0, ny - 2).astype(int)
    tx = fx - j
    ty = fy - i
    h00 = heights[i, j]
    h01 = heights[i, j + 1]
    h10 = heights[i + 1, j]
    h11 = heights[i + 1, j + 1]
    return (1 - ty) * ((1 - tx) * h00 + tx * h01) + ty * ((1 - tx) * h10 + tx * h11)


def load_grid(path):
    """Read a grid file.

    Format: comment lines start with ``#``; the first data line is
    ``origin_x origin_y cell nx ny``; then ``ny`` rows of ``nx`` heights,
    row-major with rows along increasing y.
    """
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                rows.append([float(v) for v in line.split()])
    ox, oy, cell, nx, ny = rows[0]
    heights = np.array(rows[1:], dtype=float)
    if heights.shape != (int(ny), int(nx)):
        raise ValueError(f"grid file declares {int(ny)}x{int(nx)} but holds {heights.shape}")
    return HeightMap(origin=(ox, oy), cell=cell, heights=heights)


def save_grid(hmap: HeightMap, path):
    ny, nx = hmap.heights.shape
    with open(path, "w") as fh:
        fh.write("# origin_x origin_y cell nx ny, then ny rows of nx heights [m]\n")
        fh.write(f"{hmap.origin[0]!r} {hmap.origin[1]!r} {hmap.cell!r} {nx} {ny}\n")
        for row in hmap.heights:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
