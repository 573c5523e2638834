"""Brute-force reference values for tiny grids.

Everything here is rebuilt from scratch rather than shared with the
production path: cell weights come from the pointwise distance API, face
coverage from the boundary partition, the energy from a ghost-padded array,
and derivatives from dense polarization (p = 2) or automatic
differentiation (other p).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import AssemblyError, SizeGuardError
from .field import Grid
from .geometry import GeometryConfig, SegmentKind, StripClass, build_partition, distances
from .ineq import QuotientKind, WeightSpec
from .sharp import ConstantEstimate

MAX_CELLS_PER_SIDE = 12
ORACLE_STARTS = 32
POLISH_DIRECTIONS = 64


class OracleProblem:
    """Cell weights and face coverage for one quotient, computed point by point."""

    def __init__(self, kind, config: GeometryConfig, w: WeightSpec, grid: Grid):
        kind = QuotientKind(kind)
        if grid.nx > MAX_CELLS_PER_SIDE or grid.ny > MAX_CELLS_PER_SIDE:
            raise SizeGuardError(f"oracle grids are capped at {MAX_CELLS_PER_SIDE}x{MAX_CELLS_PER_SIDE}, got {grid.label()}")
        self.grid, self.p = grid, w.p
        num = np.zeros(grid.shape)
        ew = np.ones(grid.shape)
        for i, x1 in enumerate(grid.x1):
            for j, x2 in enumerate(grid.x2):
                d = distances((x1, x2), config)
                if kind is QuotientKind.FRIEDRICHS:
                    num[i, j] = 1.0 if d.strip is StripClass.PI2 else 0.0
                else:
                    r = d.rho_eps if kind is QuotientKind.HARDY_EPS else d.rho
                    num[i, j] = r ** (w.alpha - w.p)
                    ew[i, j] = r**w.alpha
        cover = np.zeros(grid.shape)
        for j in range(grid.ny):
            lo, hi = j * grid.hy, (j + 1) * grid.hy
            for s in build_partition(config):
                if s.kind is SegmentKind.DIRICHLET:
                    cover[0, j] += max(0.0, min(hi, s.hi) - max(lo, s.lo)) / grid.hy
        self.num, self.ew, self.cover = num, ew, cover

    def energy(self, u) -> float:
        return float(np.sum(self.ew * 0.25 * quadrant_sum(np, u, self.cover, self.p, self.grid.hx, self.grid.hy)) * self.grid.cell_area)

    def mass(self, u) -> float:
        return float(np.sum(self.num * np.abs(u) ** self.p) * self.grid.cell_area)

    def quotient(self, u) -> float:
        return self.mass(u) / self.energy(u)


def quadrant_sum(xp, u, cover, p, hx, hy):
    """Sum over the four one-sided gradient pairs of ``|grad u|^p`` per cell.

    Ghost cells copy their neighbour (free faces); the left ghost is mixed
    with its negative in proportion to Dirichlet coverage.
    """
    U = xp.pad(u, 1, mode="edge")
    c = U[1:-1, 1:-1]
    east = (U[2:, 1:-1] - c) / hx
    west_even = (c - U[:-2, 1:-1]) / hx
    west_odd = 2.0 * c / hx
    north = (U[1:-1, 2:] - c) / hy
    south = (c - U[1:-1, :-2]) / hy
    total = 0.0
    for gy in (north, south):
        total = total + _power(xp, east * east + gy * gy, p / 2)
        total = total + (1.0 - cover) * _power(xp, west_even * west_even + gy * gy, p / 2)
        total = total + cover * _power(xp, west_odd * west_odd + gy * gy, p / 2)
    return total


def _power(xp, m2, e):
    # double where keeps the derivative finite at a vanishing gradient
    return xp.where(m2 > 0, xp.where(m2 > 0, m2, 1.0) ** e, 0.0)


def _dense_p2(prob: OracleProblem):
    g = prob.grid
    n = g.nx * g.ny
    e = np.eye(n)
    diag = np.array([prob.energy(e[k].reshape(g.shape)) for k in range(n)])
    A = np.diag(diag)
    for k in range(n):
        for m in range(k + 1, n):
            v = prob.energy((e[k] + e[m]).reshape(g.shape))
            A[k, m] = A[m, k] = 0.5 * (v - diag[k] - diag[m])
    B = np.diag(prob.num.ravel() * g.cell_area)
    try:
        vals, vecs = scipy.linalg.eigh(B, A)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError(f"stiffness form is not positive definite: {exc}") from exc
    u = vecs[:, -1].reshape(g.shape)
    return prob.quotient(u), u


def _jax_objective(prob: OracleProblem):
    """Negative quotient and its gradient, differentiated by jax."""
    import jax
    import jax.numpy as jnp

    jax.config.update("jax_enable_x64", True)
    ew, num, cover = (jnp.asarray(x) for x in (prob.ew, prob.num, prob.cover))
    g, p = prob.grid, prob.p

    def neg_quotient(x):
        u = x.reshape(g.shape)
        energy = jnp.sum(ew * 0.25 * quadrant_sum(jnp, u, cover, p, g.hx, g.hy))
        return -jnp.sum(num * jnp.abs(u) ** p) / energy

    value_and_grad = jax.jit(jax.value_and_grad(neg_quotient))

    def fun(x):
        v, grad = value_and_grad(x)
        return float(v), np.asarray(grad, dtype=float)

    return fun


def _polish(prob: OracleProblem, u, rng, fun):
    q = prob.quotient(u)
    scale = np.linalg.norm(u)
    improved = False
    for _ in range(POLISH_DIRECTIONS):
        d = rng.standard_normal(u.shape)
        d *= scale / np.linalg.norm(d)
        for t in (1e-2, -1e-2, 1e-3, -1e-3, 1e-4, -1e-4):
            trial = u + t * d
            qt = prob.quotient(trial)
            if qt > q:
                u, q, improved = trial, qt, True
                break
    if improved:
        res = scipy.optimize.minimize(fun, u.ravel(), jac=True, method="L-BFGS-B", options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-12})
        cand = res.x.reshape(u.shape)
        if prob.quotient(cand) > q:
            u, q = cand, prob.quotient(cand)
    return q, u


def oracle_sharp(kind, config: GeometryConfig, w: WeightSpec, grid: Grid, seed: int = 0, starts: int = ORACLE_STARTS) -> ConstantEstimate:
    """Sharp constant by dense eigensolve (``p = 2``) or multistart ascent."""
    prob = OracleProblem(kind, config, w, grid)
    meta = dict(variant=QuotientKind(kind).value, p=w.p, alpha=w.alpha, delta=config.delta, N=config.N, grid=grid.label())
    if w.p == 2:
        q, u = _dense_p2(prob)
        return ConstantEstimate(q, 1, 0.0, method="Oracle", vector=u, **meta)
    fun = _jax_objective(prob)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0AC1E]))
    best_q, best_u, its = -np.inf, None, 0
    for _ in range(starts):
        x0 = np.abs(rng.standard_normal(grid.shape)) + 0.1
        res = scipy.optimize.minimize(fun, x0.ravel(), jac=True, method="L-BFGS-B", options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-12})
        its += res.nit
        u = res.x.reshape(grid.shape)
        q = prob.quotient(u)
        if q > best_q:
            best_q, best_u = q, u
    q, u = _polish(prob, best_u, rng, fun)
    return ConstantEstimate(q, its, 0.0, method="Oracle", vector=u, **meta)
