"""Run configuration: a TOML file with one table per concern.

See ``configs/`` for complete examples; every key below is optional except
``[weights]``.

    [run]          name, seed, output
    [polytope]     kind = "segment" | "simplex", dimension, or vertices = [[...], ...]
    [metric]       name, volume, bump_amplitude, bump_center, bump_width
    [weights]      combinator = "min" | "max", rounding = "ceil" | "floor",
                   pieces = [{coefficients = [...], constant = "p/q"}, ...],
                   table = "path.csv" (relative to the config file)
    [levels]       ks, k_cut, envelope = "ladder" | "full", k_max
    [grid]         x_half, T, resolutions (cells per axis; the last is the main grid)
    [tolerances]   quadrature, support, comparison, psh, identity, mass_slack
    [mass]         window = [t_min, t_max], levels
    [comparison]   draws
    [triangular]   k_max
    [moments]      t_samples, orders
    [regularity]   alphas, threshold
    [futaki]       k_samples
"""
import os
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .grid import config_hash, make_grid
from .toric import Polytope, ToricMetric
from .weights import WeightSystem

THREADS_ENV = "BERGMAN_RAYS_THREADS"


@dataclass
class RunConfig:
    name: str
    polytope: Polytope
    metric: ToricMetric
    weights: WeightSystem
    levels: list
    k_cut: int
    envelope_levels: list
    x_half: float = 16.0
    T: float = 8.0
    resolutions: list = field(default_factory=lambda: [128, 256])
    quadrature_tol: float = 1e-12
    support_tol: float = 1e-8
    comparison_tol: float = 1.0
    psh_tol: float = 1e-6
    identity_tol: float = 1e-12
    mass_slack: float = 0.10
    mass_window: tuple = (-4.0, 0.0)
    mass_levels: list = field(default_factory=lambda: [4, 8, 16, 32])
    draws: int = 100
    triangular_k_max: int = 16
    t_samples: tuple = (-0.5, -1.0, -2.0)
    orders: tuple = (1, 2, 3)
    alphas: tuple = (0.25, 0.5, 0.75, 0.9, 0.99)
    holder_threshold: float = 1.2
    futaki_samples: tuple = (2, 4, 6, 8)
    seed: int = 0
    output: str = "out"
    source: str = ""
    hash: str = ""

    def grid(self, cells=None):
        cells = self.resolutions[-1] if cells is None else cells
        return make_grid(self.polytope.dimension, self.x_half, self.T, cells)

    @property
    def all_levels(self):
        return sorted(set(self.levels) | set(self.envelope_levels) | set(self.mass_levels) | {1})


def _positive(name, value):
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return value


def _polytope(spec):
    kind = spec.get("kind", "segment")
    if "vertices" in spec:
        verts = [tuple(Fraction(str(c)) for c in v) for v in spec["vertices"]]
        return Polytope(len(verts[0]), tuple(verts), spec.get("label", "custom"))
    if kind == "segment":
        return Polytope.segment()
    if kind == "simplex":
        return Polytope.simplex(int(spec.get("dimension", 1)))
    raise ConfigError(f"unknown polytope kind {kind!r}")


def _weights(spec, polytope, base_dir):
    pieces = []
    for p in spec.get("pieces", []):
        if "coefficients" not in p or "constant" not in p:
            raise ConfigError("each weight piece needs 'coefficients' and 'constant'")
        pieces.append((tuple(str(c) for c in p["coefficients"]), str(p["constant"])))
    if not pieces and "table" not in spec:
        raise ConfigError("[weights] needs pieces or a table")
    combinator = spec.get("combinator", "min")
    with warnings.catch_warnings():
        # the convexity warning is re-issued once the config is fully parsed
        warnings.simplefilter("ignore")
        ws = WeightSystem(polytope, pieces=tuple(pieces), combinator=combinator,
                          label=spec.get("label", ""), rounding=spec.get("rounding", "ceil"))
    if "table" in spec:
        path = Path(spec["table"])
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"weight table {path} not found")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ws = WeightSystem.from_csv(polytope, path, base=ws if pieces else None)
    return ws


def _envelope_levels(k_cut, k_max, mode, levels):
    if mode == "ladder":
        out, k = [], k_cut
        while k <= k_max:
            out.append(k)
            k *= 2
    elif mode == "full":
        out = list(range(k_cut, k_max + 1))
    elif mode == "levels":
        out = [k for k in levels if k >= k_cut]
    else:
        raise ConfigError(f"envelope mode must be 'ladder', 'full' or 'levels', got {mode!r}")
    if len(out) < 3:
        raise ConfigError(f"envelope needs at least 3 levels >= k_cut={k_cut}")
    return out


def parse_config(text, base_dir=".", source="<string>"):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    base_dir = Path(base_dir)
    run = raw.get("run", {})
    polytope = _polytope(raw.get("polytope", {}))
    m = raw.get("metric", {})
    metric = ToricMetric(polytope, volume=m.get("volume"),
                         bump_amplitude=float(m.get("bump_amplitude", 0.0)),
                         bump_center=tuple(m["bump_center"]) if "bump_center" in m else None,
                         bump_width=float(m.get("bump_width", 1.0)),
                         name=m.get("name", "fubini_study"))
    if "weights" not in raw:
        raise ConfigError("config has no [weights] table")
    ws = _weights(raw["weights"], polytope, base_dir)
    lv = raw.get("levels", {})
    levels = [int(k) for k in lv.get("ks", [1, 2, 4, 8, 16, 32])]
    if levels != sorted(levels) or len(set(levels)) != len(levels):
        raise ConfigError("levels must be sorted ascending without repeats")
    if levels[0] < 1:
        raise ConfigError("levels must be >= 1")
    k_cut = int(lv.get("k_cut", 4))
    k_max = int(lv.get("k_max", levels[-1]))
    env_levels = _envelope_levels(k_cut, k_max, lv.get("envelope", "ladder"), levels)
    g = raw.get("grid", {})
    resolutions = [int(r) for r in g.get("resolutions", [128, 256])]
    if not resolutions:
        raise ConfigError("at least one grid resolution is required")
    tol = raw.get("tolerances", {})
    mass = raw.get("mass", {})
    window = tuple(float(v) for v in mass.get("window", (-4.0, 0.0)))
    if len(window) != 2 or window[0] >= window[1]:
        raise ConfigError("mass window must be [t_min, t_max] with t_min < t_max")
    cfg = RunConfig(
        name=run.get("name", Path(source).stem),
        polytope=polytope, metric=metric, weights=ws,
        levels=levels, k_cut=k_cut, envelope_levels=env_levels,
        x_half=_positive("grid.x_half", float(g.get("x_half", 16.0))),
        T=_positive("grid.T", float(g.get("T", 8.0))),
        resolutions=[_positive("grid.resolutions", r) for r in resolutions],
        quadrature_tol=_positive("tolerances.quadrature", float(tol.get("quadrature", 1e-12))),
        support_tol=_positive("tolerances.support", float(tol.get("support", 1e-8))),
        comparison_tol=_positive("tolerances.comparison", float(tol.get("comparison", 1.0))),
        psh_tol=_positive("tolerances.psh", float(tol.get("psh", 1e-6))),
        identity_tol=_positive("tolerances.identity", float(tol.get("identity", 1e-12))),
        mass_slack=_positive("tolerances.mass_slack", float(tol.get("mass_slack", 0.10))),
        mass_window=window,
        mass_levels=[int(k) for k in mass.get("levels", [4, 8, 16, 32])],
        draws=int(_positive("comparison.draws", raw.get("comparison", {}).get("draws", 100))),
        triangular_k_max=int(raw.get("triangular", {}).get("k_max", 16)),
        t_samples=tuple(float(t) for t in raw.get("moments", {}).get("t_samples",
                                                                     (-0.5, -1.0, -2.0))),
        orders=tuple(int(o) for o in raw.get("moments", {}).get("orders", (1, 2, 3))),
        alphas=tuple(float(a) for a in raw.get("regularity", {}).get(
            "alphas", (0.25, 0.5, 0.75, 0.9, 0.99))),
        holder_threshold=_positive("regularity.threshold",
                                   float(raw.get("regularity", {}).get("threshold", 1.2))),
        futaki_samples=tuple(int(k) for k in raw.get("futaki", {}).get("k_samples",
                                                                       (2, 4, 6, 8))),
        seed=int(run.get("seed", 0)),
        output=str(run.get("output", "out")),
        source=source,
        hash=config_hash(text),
    )
    if ws.combinator == "max" and len(set(ws.pieces)) > 1:
        warnings.warn(f"weight generator in {source} is a max of affine pieces "
                      "(convex, not concave)", stacklevel=2)
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent, source=str(path))


def default_threads():
    value = os.environ.get(THREADS_ENV, "1")
    try:
        threads = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {value!r}")
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return threads
