"""Functions on a uniform (x, t) log-coordinate grid.

A torus- and S^1-invariant function on X x D^* depends only on x = log|z|^2
(n coordinates) and t = log|w| in [-T, 0].  Values are stored with shape
``(*x_shape, n_t)``.
"""
import csv
import hashlib
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


def make_grid(n=1, x_half=16.0, T=8.0, cells=256, nt_cells=None):
    """Uniform grid with ``cells`` intervals per x-axis and ``nt_cells`` (default
    ``cells``) in t; 256 cells give h_x = 1/8, h_t = 1/32 on the default box."""
    nt_cells = cells if nt_cells is None else nt_cells
    nx, nt = cells + 1, nt_cells + 1
    if T <= 0:
        raise ConfigError("truncation depth T must be positive")
    if nx < 5 or nt < 5:
        raise ConfigError("grids need at least 5 nodes per axis")
    x_axes = tuple(np.linspace(-x_half, x_half, nx) for _ in range(n))
    return x_axes, np.linspace(-T, 0.0, nt)


@dataclass
class GridFunction:
    x_axes: tuple
    t: np.ndarray
    values: np.ndarray
    level: object = None
    config_hash: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x_axes = tuple(np.asarray(a, dtype=float) for a in self.x_axes)
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        shape = tuple(len(a) for a in self.x_axes) + (len(self.t),)
        if self.values.shape != shape:
            raise ConfigError(f"values shape {self.values.shape} does not match grid {shape}")
        for a in self.x_axes + (self.t,):
            if np.any(np.diff(a) <= 0):
                raise ConfigError("grid axes must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("grid function has non-finite values")

    @property
    def n(self):
        return len(self.x_axes)

    @property
    def spacings(self):
        """(h_x1, ..., h_xn, h_t)."""
        return tuple(float(a[1] - a[0]) for a in self.x_axes) + (float(self.t[1] - self.t[0]),)

    @property
    def axes(self):
        return self.x_axes + (self.t,)

    def mesh(self):
        """Coordinate arrays, each of shape ``values.shape``."""
        return np.meshgrid(*self.axes, indexing="ij")

    def x_points(self):
        mesh = np.meshgrid(*self.x_axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def same_grid(self, other):
        return (len(self.x_axes) == len(other.x_axes)
                and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes)))

    def with_values(self, values, level=None, **meta):
        return GridFunction(self.x_axes, self.t, values,
                            self.level if level is None else level, self.config_hash, dict(meta))

    @classmethod
    def from_callable(cls, fun, x_axes, t, level=None):
        mesh = np.meshgrid(*x_axes, t, indexing="ij")
        return cls(x_axes, t, fun(*mesh), level)


def config_hash(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def fmt(value):
    return format(float(value), ".17g")


def write_csv(path, header, rows, chash=""):
    """CSV with a config-hash comment line and 17-significant-digit floats."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={chash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def grid_rows(gf, level):
    mesh = gf.mesh()
    cols = [m.ravel() for m in mesh] + [gf.values.ravel()]
    for row in zip(*cols):
        yield [float(v) for v in row] + [level]


def write_json(path, payload, chash=""):
    payload = dict(payload)
    payload["config_hash"] = chash
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)
