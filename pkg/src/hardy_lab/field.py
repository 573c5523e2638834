"""Cell-centered scalar fields on the rectangle.

Values live at cell centers ``((i + 1/2) hx, (j + 1/2) hy)`` and arrays are
indexed ``[i, j]`` with ``i`` along ``x1``.  Boundary behaviour is encoded by
ghost cells: across a Dirichlet face on ``x1 = 0`` the ghost value is ``-u``
(odd reflection, zero trace); across every other boundary face it is ``u``
(even reflection).

A left face may be only partly covered by Dirichlet pieces when the piece
endpoints fall inside a cell.  The ``dirichlet`` array stores the covered
fraction of each left face; energies blend the odd and even ghost terms
with that fraction, which reduces to the plain rule on aligned grids.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigurationError, GenerationError, QuadratureError
from .geometry import GeometryConfig, SegmentKind, build_partition, r2_field, strip_mask_pi2


@dataclass(frozen=True)
class Grid:
    a: float
    b: float
    nx: int
    ny: int
    min_cells: int = field(default=4, repr=False, compare=False)

    def __post_init__(self):
        if self.nx < self.min_cells or self.ny < self.min_cells:
            raise ConfigurationError(f"grid needs at least {self.min_cells} cells per axis, got {self.nx}x{self.ny}")
        if self.a <= 0 or self.b <= 0:
            raise ConfigurationError("grid extents must be positive")

    @classmethod
    def for_config(cls, config: GeometryConfig, nx: int, ny: int) -> "Grid":
        grid = cls(config.a, config.b, int(nx), int(ny))
        grid.check_alignment(config)
        return grid

    @property
    def hx(self) -> float:
        return self.a / self.nx

    @property
    def hy(self) -> float:
        return self.b / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def x1(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def x2(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    def mesh(self):
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def check_alignment(self, config: GeometryConfig) -> None:
        if not (np.isclose(self.a, config.a) and np.isclose(self.b, config.b)):
            raise ConfigurationError(
                f"grid extents {self.a}x{self.b} do not match geometry {config.a}x{config.b}"
            )
        if self.ny % config.N:
            raise ConfigurationError(f"ny={self.ny} must be a multiple of N={config.N}")

    def label(self) -> str:
        return f"{self.nx}x{self.ny}"


def dirichlet_fraction(grid: Grid, config: GeometryConfig) -> np.ndarray:
    """Covered fraction of each left boundary face by Dirichlet pieces."""
    lo = np.arange(grid.ny) * grid.hy
    hi = lo + grid.hy
    frac = np.zeros(grid.ny)
    for seg in build_partition(config):
        if seg.kind is SegmentKind.DIRICHLET:
            frac += np.clip(np.minimum(hi, seg.hi) - np.maximum(lo, seg.lo), 0.0, None)
    frac /= grid.hy
    # clean rounding so aligned grids give exact 0/1
    frac[np.isclose(frac, 1.0, rtol=0, atol=1e-9)] = 1.0
    frac[np.isclose(frac, 0.0, rtol=0, atol=1e-9)] = 0.0
    return frac


class ScalarField:
    """Immutable cell-centered field with its left-face Dirichlet fractions."""

    __slots__ = ("grid", "values", "dirichlet")

    def __init__(self, grid: Grid, values, dirichlet):
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        dirichlet = np.array(dirichlet, dtype=float)
        if dirichlet.shape != (grid.ny,):
            raise ValueError("dirichlet fractions need one entry per row")
        values.setflags(write=False)
        dirichlet.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dirichlet", dirichlet)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    @classmethod
    def from_function(cls, fn: Callable, grid: Grid, config: GeometryConfig) -> "ScalarField":
        X1, X2 = grid.mesh()
        vals = np.broadcast_to(np.asarray(fn(X1, X2), dtype=float), grid.shape)
        return cls(grid, vals, dirichlet_fraction(grid, config))

    @classmethod
    def zeros(cls, grid: Grid, config: GeometryConfig) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape), dirichlet_fraction(grid, config))

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values, self.dirichlet)

    @property
    def dirichlet_mask(self) -> np.ndarray:
        """Rows whose left face is (mostly) Dirichlet; used for reflections."""
        return self.dirichlet >= 0.5

    def __repr__(self):
        return f"ScalarField({self.grid.label()}, max|u|={np.abs(self.values).max():.3g})"


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    g1: np.ndarray
    g2: np.ndarray

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.g1, self.g2)


def gradient(u: ScalarField) -> VectorField:
    """Cell-center gradient: central differences inside, second-order one-sided
    differences next to the boundary, and the odd ghost across Dirichlet faces."""
    v = u.values
    grid = u.grid
    hx, hy = grid.hx, grid.hy
    g1 = np.empty_like(v)
    g2 = np.empty_like(v)

    g1[1:-1] = (v[2:] - v[:-2]) / (2 * hx)
    one_sided = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * hx)
    ghost = (v[1] + v[0]) / (2 * hx)
    g1[0] = np.where(u.dirichlet_mask, ghost, one_sided)
    g1[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * hx)

    g2[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * hy)
    g2[:, 0] = (-3 * v[:, 0] + 4 * v[:, 1] - v[:, 2]) / (2 * hy)
    g2[:, -1] = (3 * v[:, -1] - 4 * v[:, -2] + v[:, -3]) / (2 * hy)
    return VectorField(grid, g1, g2)


Weight = Union[None, float, np.ndarray, Callable]


def _weight_values(grid: Grid, w: Weight) -> np.ndarray:
    if w is None:
        return np.ones(grid.shape)
    if callable(w):
        X1, X2 = grid.mesh()
        return np.broadcast_to(np.asarray(w(X1, X2), dtype=float), grid.shape)
    return np.broadcast_to(np.asarray(w, dtype=float), grid.shape)


def integrate_weighted(f, grid: Optional[Grid] = None, w: Weight = None, region=None) -> float:
    """Midpoint rule ``sum w(center) f(center) hx hy`` over the cells of ``region``."""
    if isinstance(f, ScalarField):
        grid = f.grid
        f = f.values
    if grid is None:
        raise ValueError("a grid is required when integrating a raw array")
    vals = np.broadcast_to(np.asarray(f, dtype=float), grid.shape)
    weights = _weight_values(grid, w)
    mask = np.ones(grid.shape, dtype=bool) if region is None else np.broadcast_to(region, grid.shape)
    bad = mask & ~np.isfinite(weights)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise QuadratureError(
            f"non-finite weight {weights[i, j]} at cell ({i}, {j}) centered at "
            f"({(i + 0.5) * grid.hx:.6g}, {(j + 0.5) * grid.hy:.6g})"
        )
    return float(np.sum(np.where(mask, weights * vals, 0.0)) * grid.cell_area)


# --- p-energy ------------------------------------------------------------
#
# The discrete Dirichlet-type energy behind every quotient.  For each cell the
# four combinations of forward/backward differences are averaged:
#
#     e_c = 1/4 * sum_{sx, sy} (Dx^{sx} u ** 2 + Dy^{sy} u ** 2) ** (p / 2)
#
# so the stencil is compact (no checkerboard kernel) and reduces at p = 2 to
# the usual five-point finite-volume form.


def _differences(v: np.ndarray, hx: float, hy: float):
    ax_p = np.zeros_like(v)
    ax_p[:-1] = (v[1:] - v[:-1]) / hx
    ax_m = np.zeros_like(v)
    ax_m[1:] = ax_p[:-1]
    by_p = np.zeros_like(v)
    by_p[:, :-1] = (v[:, 1:] - v[:, :-1]) / hy
    by_m = np.zeros_like(v)
    by_m[:, 1:] = by_p[:, :-1]
    return ax_p, ax_m, by_p, by_m


def _pow_half(m2: np.ndarray, e: float) -> np.ndarray:
    """``m2 ** e`` with the convention ``0 ** e = 0`` for any ``e``."""
    out = np.zeros_like(m2)
    np.power(m2, e, out=out, where=m2 > 0)
    return out


def energy_density(v: np.ndarray, grid: Grid, dirichlet: np.ndarray, p: float) -> np.ndarray:
    hx, hy = grid.hx, grid.hy
    ax_p, ax_m, by_p, by_m = _differences(v, hx, hy)
    half = p / 2.0
    dens = np.zeros_like(v)
    for ax in (ax_p, ax_m):
        for by in (by_p, by_m):
            dens += _pow_half(ax * ax + by * by, half)
    # left column: replace the even-ghost backward terms by the blended ones
    f = np.asarray(dirichlet)
    if np.any(f > 0):
        a_d = 2.0 * v[0] / hx
        extra = np.zeros(grid.ny)
        for by in (by_p[0], by_m[0]):
            extra += _pow_half(a_d * a_d + by * by, half) - _pow_half(by * by, half)
        dens[0] += f * extra
    return 0.25 * dens


def p_energy(v: np.ndarray, grid: Grid, dirichlet: np.ndarray, p: float, weight=None) -> float:
    """Discrete ``sum_c w_c e_c hx hy`` approximating ``int w |grad u|^p``."""
    dens = energy_density(v, grid, dirichlet, p)
    if weight is not None:
        dens = dens * weight
    return float(dens.sum() * grid.cell_area)


def p_energy_gradient(v: np.ndarray, grid: Grid, dirichlet: np.ndarray, p: float, weight=None) -> np.ndarray:
    """Exact derivative of :func:`p_energy` with respect to the cell values."""
    hx, hy = grid.hx, grid.hy
    ax_p, ax_m, by_p, by_m = _differences(v, hx, hy)
    w = np.ones_like(v) if weight is None else np.asarray(weight, dtype=float)
    scale = 0.25 * p * grid.cell_area * w
    e = p / 2.0 - 1.0
    gx_p = np.zeros_like(v)
    gx_m = np.zeros_like(v)
    gy_p = np.zeros_like(v)
    gy_m = np.zeros_like(v)
    for ax, gx in ((ax_p, gx_p), (ax_m, gx_m)):
        for by, gy in ((by_p, gy_p), (by_m, gy_m)):
            c = scale * _pow_half(ax * ax + by * by, e)
            gx += c * ax
            gy += c * by
    # gx_p[i] multiplies d(ax_p[i])/du = (e_{i+1} - e_i) / hx, etc.
    grad = np.zeros_like(v)
    grad[1:] += gx_p[:-1] / hx
    grad[:-1] -= gx_p[:-1] / hx
    grad[1:] += gx_m[1:] / hx
    grad[:-1] -= gx_m[1:] / hx
    grad[:, 1:] += gy_p[:, :-1] / hy
    grad[:, :-1] -= gy_p[:, :-1] / hy
    grad[:, 1:] += gy_m[:, 1:] / hy
    grad[:, :-1] -= gy_m[:, 1:] / hy

    f = np.asarray(dirichlet)
    if np.any(f > 0):
        a_d = 2.0 * v[0] / hx
        s0 = scale[0]
        for by, by_idx in ((by_p[0], "p"), (by_m[0], "m")):
            m_d = a_d * a_d + by * by
            m_n = by * by
            c_d = s0 * _pow_half(m_d, e)
            c_n = s0 * _pow_half(m_n, e)
            # d/du0 of the Dirichlet x-term
            grad[0] += f * c_d * a_d * (2.0 / hx)
            # the y-difference also enters through the blended term
            dy = f * (c_d - c_n) * by / hy
            if by_idx == "p":
                grad[0, 1:] += dy[:-1]
                grad[0, :-1] -= dy[:-1]
            else:
                grad[0, 1:] += dy[1:]
                grad[0, :-1] -= dy[1:]
    return grad


# --- admissible test functions ---------------------------------------------


def _cutoff(r2: np.ndarray, h_cut: float) -> np.ndarray:
    # identically zero for r2 <= h_cut / 8, one beyond h_cut, C^2 in between
    h0 = h_cut / 8.0
    t = np.clip((r2 - h0) / (h_cut - h0), 0.0, 1.0)
    return t**3


def _smooth_modes(rng: np.random.Generator, X1, X2, a: float, b: float, modes: int) -> np.ndarray:
    t = X1 / a
    s = X2 / b
    out = np.zeros_like(X1)
    for k in range(modes):
        amp = rng.normal() / (1.0 + 0.5 * k)
        if rng.random() < 0.5:
            c = rng.normal(size=3)
            fx = c[0] + c[1] * t + c[2] * t * t
        else:
            fx = np.cos(np.pi * rng.integers(0, 4) * t + rng.uniform(0, 2 * np.pi))
        fy = np.cos(np.pi * rng.integers(0, 5) * s + rng.uniform(0, 2 * np.pi))
        out += amp * fx * fy
    return out


def generate_test_function(
    seed: int,
    grid: Grid,
    config: GeometryConfig,
    modes: int = 6,
    h_cut: Optional[float] = None,
) -> ScalarField:
    """Seeded smooth field vanishing in a neighbourhood of the Dirichlet pieces.

    The field is a random combination of separable polynomial/cosine modes
    multiplied by a cubic cutoff in the distance to the Dirichlet set.
    """
    if modes < 1:
        raise ValueError("modes must be >= 1")
    grid.check_alignment(config)
    if h_cut is None:
        h_cut = config.dirichlet_length / 2.0
    X1, X2 = grid.mesh()
    chi = _cutoff(r2_field(X1, X2, config), h_cut)
    for attempt in range(8):
        rng = np.random.default_rng([int(seed), attempt])
        vals = _smooth_modes(rng, X1, X2, config.a, config.b, modes) * chi
        if np.max(np.abs(vals)) > 1e-10:
            return ScalarField(grid, vals, dirichlet_fraction(grid, config))
    raise GenerationError(f"seed {seed}: 8 consecutive degenerate draws")


def pi2_mask(grid: Grid, config: GeometryConfig) -> np.ndarray:
    X1, X2 = grid.mesh()
    return strip_mask_pi2(X2, config)


# --- CSV exchange ----------------------------------------------------------


def write_field_csv(values, grid: Grid, path) -> None:
    X1, X2 = grid.mesh()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "value"])
        for x1, x2, v in zip(X1.ravel(), X2.ravel(), np.asarray(values).ravel()):
            writer.writerow([repr(float(x1)), repr(float(x2)), repr(float(v))])


def read_field_csv(path, config: GeometryConfig) -> ScalarField:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty field file")
    x1 = np.array([float(r["x1"]) for r in rows])
    x2 = np.array([float(r["x2"]) for r in rows])
    v = np.array([float(r["value"]) for r in rows])
    nx = len(np.unique(np.round(x1 / config.a, 12)))
    ny = len(np.unique(np.round(x2 / config.b, 12)))
    if nx * ny != len(rows):
        raise ValueError(f"{path}: {len(rows)} rows do not form a {nx}x{ny} grid")
    grid = Grid.for_config(config, nx, ny)
    i = np.rint(x1 / grid.hx - 0.5).astype(int)
    j = np.rint(x2 / grid.hy - 0.5).astype(int)
    vals = np.zeros(grid.shape)
    vals[i, j] = v
    return ScalarField(grid, vals, dirichlet_fraction(grid, config))
