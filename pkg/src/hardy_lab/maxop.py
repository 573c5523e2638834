"""Ball averages, restricted maximal functions and the order-one Riesz potential.

Balls may leave the rectangle; the field is then continued by repeated
reflection (odd across Dirichlet rows of ``x1 = 0``, even across every other
side).  Cells are weighted by their exact overlap area with the disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .errors import DegenerateInputError, PreconditionError, ResolutionError
from .field import Grid, ScalarField, integrate_weighted

SCHEDULE_RATIO = 2.0**0.25


# --- exact disk / rectangle overlap -------------------------------------------


@numba.njit(cache=True, nogil=True)
def _half_chord(t, r):
    # sqrt(r^2 - t^2) without the cancellation of r*r - t*t near tangency
    return math.sqrt(max((r - t) * (r + t), 0.0))


@numba.njit(cache=True, nogil=True)
def _segment_primitive(t, r):
    # integral of sqrt(r^2 - s^2) over [0, t], for 0 <= t <= r
    s = _half_chord(t, r)
    return 0.5 * (t * s + r * r * math.atan2(t, s))


@numba.njit(cache=True, nogil=True)
def _quadrant_area(x, y, r):
    # area of the disk {|z| <= r} inside [0, x] x [0, y], x, y >= 0
    if x <= 0.0 or y <= 0.0:
        return 0.0
    x = min(x, r)
    y = min(y, r)
    t_star = _half_chord(y, r)
    if x <= t_star:
        return x * y
    return y * t_star + _segment_primitive(x, r) - _segment_primitive(t_star, r)


@numba.njit(cache=True, nogil=True)
def _signed_area(x, y, r):
    sx = 1.0 if x >= 0.0 else -1.0
    sy = 1.0 if y >= 0.0 else -1.0
    return sx * sy * _quadrant_area(abs(x), abs(y), r)


@numba.njit(cache=True, nogil=True)
def disk_rect_area(cx, cy, r, x0, x1, y0, y1):
    """Exact area of ``B((cx, cy), r)`` intersected with ``[x0, x1] x [y0, y1]``."""
    X0 = x0 - cx
    X1 = x1 - cx
    Y0 = y0 - cy
    Y1 = y1 - cy
    a = _signed_area(X1, Y1, r) - _signed_area(X0, Y1, r) - _signed_area(X1, Y0, r) + _signed_area(X0, Y0, r)
    return max(a, 0.0)


@numba.njit(cache=True, nogil=True)
def _ball_integrals(ext, px, py, hx, hy, cx, cy, radii, mcx, mcy, mr, out):
    """Integrals of the cellwise field over B(c, r_k) for increasing radii.

    ``ext[I, J]`` covers ``[(I - px) hx, (I - px + 1) hx] x [(J - py) hy, ...]``.
    When ``mr >= 0`` only cells whose center lies in ``B((mcx, mcy), mr)`` count.
    """
    nk = radii.shape[0]
    for k in range(nk):
        out[k] = 0.0
    full = np.zeros(nk + 1)
    rmax = radii[nk - 1]
    xlo = cx - rmax
    xhi = cx + rmax
    ylo = cy - rmax
    yhi = cy + rmax
    if mr >= 0.0:
        xlo = max(xlo, mcx - mr - hx)
        xhi = min(xhi, mcx + mr + hx)
        ylo = max(ylo, mcy - mr - hy)
        yhi = min(yhi, mcy + mr + hy)
    i0 = max(int(math.floor(xlo / hx)) + px, 0)
    i1 = min(int(math.floor(xhi / hx)) + px, ext.shape[0] - 1)
    j0 = max(int(math.floor(ylo / hy)) + py, 0)
    j1 = min(int(math.floor(yhi / hy)) + py, ext.shape[1] - 1)
    area = hx * hy
    for I in range(i0, i1 + 1):
        x0 = (I - px) * hx
        x1 = (I - px + 1) * hx  # shared edges bit-identical, so tangent slivers telescope
        dx_near = max(x0 - cx, 0.0, cx - x1)
        dx_far = max(abs(x0 - cx), abs(x1 - cx))
        for J in range(j0, j1 + 1):
            v = ext[I, J]
            if v == 0.0:
                continue
            y0 = (J - py) * hy
            y1 = (J - py + 1) * hy
            if mr >= 0.0:
                ccx = x0 + 0.5 * hx - mcx
                ccy = y0 + 0.5 * hy - mcy
                if ccx * ccx + ccy * ccy > mr * mr * (1.0 + 1e-12):
                    continue
            dy_near = max(y0 - cy, 0.0, cy - y1)
            dy_far = max(abs(y0 - cy), abs(y1 - cy))
            dnear = math.sqrt(dx_near * dx_near + dy_near * dy_near)
            dfar = math.sqrt(dx_far * dx_far + dy_far * dy_far)
            if dnear >= rmax:
                continue
            k = 0
            while k < nk and radii[k] <= dnear:
                k += 1
            while k < nk and radii[k] < dfar:
                out[k] += v * disk_rect_area(cx, cy, radii[k], x0, x1, y0, y1)
                k += 1
            full[k] += v * area
    acc = 0.0
    for k in range(nk):
        acc += full[k]
        out[k] += acc


@numba.njit(cache=True, nogil=True)
def _riesz(ext, px, py, hx, hy, bx, by, r, sx, sy):
    # int_{B((bx, by), r)} |f(z)| / |s - z| dz; the cell holding s is replaced
    # by an equal-area disk around s, scaled by its overlap with the ball
    i_c = int(math.floor(sx / hx)) + px
    j_c = int(math.floor(sy / hy)) + py
    i0 = max(int(math.floor((bx - r) / hx)) + px, 0)
    i1 = min(int(math.floor((bx + r) / hx)) + px, ext.shape[0] - 1)
    j0 = max(int(math.floor((by - r) / hy)) + py, 0)
    j1 = min(int(math.floor((by + r) / hy)) + py, ext.shape[1] - 1)
    total = 0.0
    for I in range(i0, i1 + 1):
        x0 = (I - px) * hx
        for J in range(j0, j1 + 1):
            v = abs(ext[I, J])
            if v == 0.0 or (I == i_c and J == j_c):
                continue
            y0 = (J - py) * hy
            a = disk_rect_area(bx, by, r, x0, (I - px + 1) * hx, y0, (J - py + 1) * hy)
            if a > 0.0:
                dx = x0 + 0.5 * hx - sx
                dy = y0 + 0.5 * hy - sy
                total += v * a / math.sqrt(dx * dx + dy * dy)
    if 0 <= i_c < ext.shape[0] and 0 <= j_c < ext.shape[1]:
        x0 = (i_c - px) * hx
        y0 = (j_c - py) * hy
        frac = disk_rect_area(bx, by, r, x0, (i_c - px + 1) * hx, y0, (j_c - py + 1) * hy) / (hx * hy)
        r_eq = math.sqrt(hx * hy / math.pi)
        total += abs(ext[i_c, j_c]) * 2.0 * math.pi * min(r, r_eq) * min(frac / min(1.0, (r / r_eq) ** 2), 1.0)
    return total


@numba.njit(cache=True, nogil=True)
def _geometric_radii(r0, rmax, ratio):
    n = 1
    r = r0
    while r < rmax * (1.0 - 1e-12):
        n += 1
        r *= ratio
    radii = np.empty(n)
    r = r0
    for k in range(n - 1):
        radii[k] = r
        r *= ratio
    radii[n - 1] = rmax
    return radii


@numba.njit(cache=True, nogil=True)
def _offset_tables(hx, hy, dx_max, dy_max, radii):
    # For a disk centered on a cell center, everything about the cell at index
    # offset (di, dj) depends on the offset only: nearest/farthest distance,
    # the first radius reaching it, the first radius covering it, and the
    # partial overlaps in between.
    nk = radii.shape[0]
    na = 2 * dx_max + 1
    nb = 2 * dy_max + 1
    tab = np.zeros((na, nb, nk))
    dnear = np.empty((na, nb))
    dfar = np.empty((na, nb))
    kstart = np.empty((na, nb), dtype=np.int64)
    kfull = np.empty((na, nb), dtype=np.int64)
    for a in range(na):
        x0 = (a - dx_max - 0.5) * hx
        x1 = (a - dx_max + 0.5) * hx
        dxn = max(x0, 0.0, -x1)
        dxf = max(abs(x0), abs(x1))
        for b in range(nb):
            y0 = (b - dy_max - 0.5) * hy
            y1 = (b - dy_max + 0.5) * hy
            dyn = max(y0, 0.0, -y1)
            dyf = max(abs(y0), abs(y1))
            dn = math.sqrt(dxn * dxn + dyn * dyn)
            df = math.sqrt(dxf * dxf + dyf * dyf)
            dnear[a, b] = dn
            dfar[a, b] = df
            k = 0
            while k < nk and radii[k] <= dn:
                k += 1
            kstart[a, b] = k
            while k < nk and radii[k] < df:
                tab[a, b, k] = disk_rect_area(0.0, 0.0, radii[k], x0, x1, y0, y1)
                k += 1
            kfull[a, b] = k
    return tab, dnear, dfar, kstart, kfull


@numba.njit(cache=True, nogil=True)
def _pointwise_maximal(ext, px, py, hx, hy, nx, ny, rho_eps, radii, tables, dx_max, dy_max):
    # M_R(|g| chi_{B(xbar, R)})(x) at every cell center, R = rho_eps(x), xbar = (0, x2).
    # Radii: the shared geometric radii below R, then R itself.
    tab, dnear, dfar, kstart, kfull = tables
    nk_all = radii.shape[0]
    out = np.zeros((nx, ny))
    full = np.zeros(nk_all + 1)
    part = np.zeros(nk_all + 1)
    area = hx * hy
    for i in range(nx):
        cx = (i + 0.5) * hx
        for j in range(ny):
            cy = (j + 0.5) * hy
            R = rho_eps[i, j]
            nk = 0
            while nk < nk_all and radii[nk] < R * (1.0 - 1e-12):
                nk += 1
            for k in range(nk + 1):
                full[k] = 0.0
                part[k] = 0.0
            end_part = 0.0
            end_full = 0.0
            R2 = R * R * (1.0 + 1e-12)
            i0 = max(int(math.floor(max(cx - R, -R) / hx)) + px, 0)
            i1 = min(int(math.floor(min(cx + R, R) / hx)) + px, ext.shape[0] - 1)
            for I in range(i0, i1 + 1):
                x0 = (I - px) * hx
                xc = x0 + 0.5 * hx
                # centers inside the mask disk, cells touching the ball
                hm = R2 - xc * xc
                if hm < 0.0:
                    continue
                hm = math.sqrt(hm)
                a_idx = I - px - i + dx_max
                dxn = max(x0 - cx, 0.0, cx - x0 - hx)
                hb = R * R - dxn * dxn
                if hb < 0.0:
                    continue
                hb = math.sqrt(hb)
                ylo = max(cy - hm, cy - hb - hy)
                yhi = min(cy + hm, cy + hb + hy)
                j0 = max(int(math.floor(ylo / hy)) + py, 0)
                j1 = min(int(math.floor(yhi / hy)) + py, ext.shape[1] - 1)
                for J in range(j0, j1 + 1):
                    v = ext[I, J]
                    if v == 0.0:
                        continue
                    ccy = (J - py + 0.5) * hy
                    if xc * xc + (ccy - cy) * (ccy - cy) > R2:
                        continue
                    b_idx = J - py - j + dy_max
                    if dnear[a_idx, b_idx] >= R:
                        continue
                    k1 = min(kfull[a_idx, b_idx], nk)
                    for k in range(kstart[a_idx, b_idx], k1):
                        part[k] += v * tab[a_idx, b_idx, k]
                    full[k1] += v
                    if dfar[a_idx, b_idx] <= R:
                        end_full += v
                    else:
                        y0 = (J - py) * hy
                        end_part += v * disk_rect_area(cx, cy, R, x0, (I - px + 1) * hx, y0, (J - py + 1) * hy)
            best = (end_full * area + end_part) / (math.pi * R * R)
            acc = 0.0
            for k in range(nk):
                acc += full[k]
                avg = (acc * area + part[k]) / (math.pi * radii[k] * radii[k])
                if avg > best:
                    best = avg
            out[i, j] = best
    return out


@numba.njit(cache=True, nogil=True)
def _maximal_map(ext, px, py, hx, hy, nx, ny, radii):
    out = np.zeros((nx, ny))
    ints = np.empty(radii.shape[0])
    for i in range(nx):
        cx = (i + 0.5) * hx
        for j in range(ny):
            cy = (j + 0.5) * hy
            _ball_integrals(ext, px, py, hx, hy, cx, cy, radii, 0.0, 0.0, -1.0, ints)
            best = 0.0
            for k in range(radii.shape[0]):
                avg = ints[k] / (math.pi * radii[k] * radii[k])
                if avg > best:
                    best = avg
            out[i, j] = best
    return out


# --- reflection extension ------------------------------------------------------


def _x_source(i: np.ndarray, n: int):
    """Source column and whether the left (odd) reflection was crossed an odd number of times."""
    m = np.mod(i, 4 * n)
    src = np.select([m < n, m < 2 * n, m < 3 * n], [m, 2 * n - 1 - m, m - 2 * n], 4 * n - 1 - m)
    odd = m >= 2 * n
    return src, odd


def _y_source(j: np.ndarray, n: int):
    m = np.mod(j, 2 * n)
    return np.where(m < n, m, 2 * n - 1 - m)


def extend(u: ScalarField, px: int, py: int) -> np.ndarray:
    """Values on the grid padded by ``px`` / ``py`` reflected cells per side."""
    nx, ny = u.grid.shape
    isrc, odd = _x_source(np.arange(-px, nx + px), nx)
    jsrc = _y_source(np.arange(-py, ny + py), ny)
    sign_row = np.where(u.dirichlet_mask, -1.0, 1.0)[jsrc]
    sign = np.where(odd[:, None], sign_row[None, :], 1.0)
    return np.ascontiguousarray(u.values[np.ix_(isrc, jsrc)] * sign)


def _padding(grid: Grid, reach: float):
    return int(math.ceil(reach / grid.hx)) + 2, int(math.ceil(reach / grid.hy)) + 2


# --- public API --------------------------------------------------------------------


@dataclass(frozen=True)
class RadiusSchedule:
    radii: tuple
    r_max: float

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.size == 0 or np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise PreconditionError("radii must be a non-empty increasing list of positive reals")
        if r[-1] > self.r_max * (1 + 1e-12) or not math.isclose(r[-1], self.r_max, rel_tol=1e-12):
            raise PreconditionError("the schedule must end at r_max")

    @classmethod
    def geometric(cls, grid: Grid, r_max: float, ratio: float = SCHEDULE_RATIO, r_min: Optional[float] = None):
        r0 = max(grid.hx, grid.hy) if r_min is None else r_min
        radii = _geometric_radii(min(r0, r_max), float(r_max), float(ratio))
        return cls(tuple(float(x) for x in radii), float(r_max))

    def array(self) -> np.ndarray:
        return np.asarray(self.radii, dtype=float)


def _check_radius(grid: Grid, r: float) -> None:
    if not r >= min(grid.hx, grid.hy) / 4.0:
        raise ResolutionError(f"radius {r:.3g} is below a quarter cell ({min(grid.hx, grid.hy) / 4:.3g})")


def ball_average(f: ScalarField, center, r: float) -> float:
    """Mean of ``f`` over the disk ``B(center, r)``."""
    _check_radius(f.grid, r)
    g = f.grid
    px, py = _padding(g, r)
    ext = extend(f, px, py)
    out = np.empty(1)
    _ball_integrals(ext, px, py, g.hx, g.hy, float(center[0]), float(center[1]), np.array([float(r)]), 0.0, 0.0, -1.0, out)
    return float(out[0] / (math.pi * r * r))


def ball_averages(f: ScalarField, center, schedule: RadiusSchedule, absolute: bool = True) -> np.ndarray:
    radii = schedule.array()
    _check_radius(f.grid, radii[0])
    g = f.grid
    px, py = _padding(g, radii[-1])
    ext = extend(f, px, py)
    if absolute:
        ext = np.abs(ext)
    out = np.empty(radii.size)
    _ball_integrals(ext, px, py, g.hx, g.hy, float(center[0]), float(center[1]), radii, 0.0, 0.0, -1.0, out)
    return out / (np.pi * radii**2)


def maximal_fn(f: ScalarField, x, schedule: RadiusSchedule) -> float:
    """``M_R |f|(x)``: largest ball average of ``|f|`` over the scheduled radii."""
    return float(ball_averages(f, x, schedule).max())


def maximal_map(f: ScalarField, schedule: RadiusSchedule) -> np.ndarray:
    """Maximal function of ``|f|`` at every cell center."""
    radii = schedule.array()
    _check_radius(f.grid, radii[0])
    g = f.grid
    px, py = _padding(g, radii[-1])
    ext = np.abs(extend(f, px, py))
    return _maximal_map(ext, px, py, g.hx, g.hy, g.nx, g.ny, radii)


def masked_pointwise_maximal(g_field: ScalarField, rho_eps: np.ndarray, ratio: float = SCHEDULE_RATIO) -> np.ndarray:
    """``M_R(|g| chi_B(xbar, R))(x)`` with ``R = rho_eps(x)`` and ``xbar = (0, x2)``, per cell.

    The mask keeps cells whose center lies in ``B(xbar, R)``.  Radii follow the
    geometric schedule from ``max(hx, hy)`` and always include ``R``.
    """
    grid = g_field.grid
    rho_eps = np.ascontiguousarray(rho_eps, dtype=float)
    r_top = float(np.max(rho_eps))
    px, py = _padding(grid, r_top)
    ext = np.abs(extend(g_field, px, py))
    radii = _geometric_radii(max(grid.hx, grid.hy), r_top, ratio)[:-1]
    dx_max = int(math.ceil(r_top / grid.hx)) + 1
    dy_max = int(math.ceil(r_top / grid.hy)) + 1
    tables = _offset_tables(grid.hx, grid.hy, dx_max, dy_max, radii)
    return _pointwise_maximal(ext, px, py, grid.hx, grid.hy, grid.nx, grid.ny, rho_eps, radii, tables, dx_max, dy_max)


def riesz_potential(f: ScalarField, x, r: float, source=None) -> float:
    """``int_{B(x, r)} |f(z)| / |y - z| dz`` with ``y = source`` (default ``x``).

    The cell holding the singular point ``y`` is integrated with an
    equal-area disk model, exact for a constant density.
    """
    _check_radius(f.grid, r)
    g = f.grid
    px, py = _padding(g, r)
    ext = extend(f, px, py)
    y = x if source is None else source
    return float(_riesz(ext, px, py, g.hx, g.hy, float(x[0]), float(x[1]), float(r), float(y[0]), float(y[1])))


def hl_ratio(f: ScalarField, p: float, schedule: RadiusSchedule) -> float:
    """Discrete ``||M_R f||_p / ||f||_p``."""
    if not p > 1:
        raise PreconditionError(f"p must exceed 1, got {p}")
    denom = integrate_weighted(np.abs(f.values) ** p, f.grid)
    if denom <= 0:
        raise DegenerateInputError("||f||_p vanishes")
    M = maximal_map(f, schedule)
    return float((integrate_weighted(M**p, f.grid) / denom) ** (1.0 / p))
