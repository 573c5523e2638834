"""Sharp constants of the discrete Friedrichs and Hardy inequalities.

The sharp constant is the supremum of the discrete quotient over all cell
vectors.  For ``p = 2`` it is the largest eigenvalue of ``B u = mu A u`` with
``A`` the weighted five-point stiffness and ``B`` the diagonal numerator
form.  For other ``p`` the quotient is maximized by preconditioned ascent.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, ConvergenceError, PreconditionError
from .field import Grid, generate_test_function
from .geometry import GeometryConfig
from .ineq import DiscreteQuotient, QuotientKind, WeightSpec, make_quotient

log = logging.getLogger(__name__)

N_STARTS = 4


@dataclass
class ConstantEstimate:
    value: float
    iterations: int
    residual: float
    grid: str
    method: str
    variant: str = ""
    p: float = 2.0
    alpha: float = 0.0
    delta: float = 1.0
    N: int = 1
    vector: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def row(self) -> dict:
        d = asdict(self)
        d.pop("vector")
        return d


CSV_FIELDS = ["variant", "p", "alpha", "delta", "N", "grid", "value", "iterations", "residual", "method"]


def write_estimates_csv(estimates, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for e in estimates:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in e.row().items()})


def stiffness_matrix(quot: DiscreteQuotient) -> sp.csc_matrix:
    """Sparse ``A`` with ``u @ A @ u == p_energy(u, p=2)`` for the quotient's weight."""
    g = quot.grid
    nx, ny = g.shape
    w = np.ones(g.shape) if quot.energy_weight is None else quot.energy_weight
    idx = np.arange(nx * ny).reshape(nx, ny)
    area = g.cell_area
    rows, cols, vals = [], [], []

    def couple(a, b, k):
        rows.extend([a, b, a, b])
        cols.extend([a, b, b, a])
        vals.extend([k, k, -k, -k])

    kx = 0.5 * (w[1:, :] + w[:-1, :]) * area / g.hx**2
    couple(idx[:-1, :].ravel(), idx[1:, :].ravel(), kx.ravel())
    ky = 0.5 * (w[:, 1:] + w[:, :-1]) * area / g.hy**2
    couple(idx[:, :-1].ravel(), idx[:, 1:].ravel(), ky.ravel())
    kd = 2.0 * w[0, :] * quot.dirichlet * area / g.hx**2
    rows.append(idx[0, :])
    cols.append(idx[0, :])
    vals.append(kd)
    A = sp.coo_matrix(
        (np.concatenate([np.ravel(v) for v in vals]), (np.concatenate([np.ravel(r) for r in rows]), np.concatenate([np.ravel(c) for c in cols]))),
        shape=(nx * ny, nx * ny),
    )
    return A.tocsc()


def _factor(A):
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise AssemblyError(f"stiffness factorization failed: {exc}") from exc
    diag = lu.U.diagonal()
    if np.any(diag == 0) or not np.all(np.isfinite(diag)):
        raise AssemblyError("stiffness form is singular on the constrained space")
    return lu


def _eig2(quot: DiscreteQuotient, tol: float, max_iter: int):
    A = stiffness_matrix(quot)
    lu = _factor(A)
    b = (quot.num_weight * quot.grid.cell_area).ravel()
    if not np.any(b > 0):
        raise AssemblyError("numerator form vanishes identically")
    s = np.sqrt(b)
    n = b.size
    calls = [0]

    def matvec(x):
        calls[0] += 1
        return s * lu.solve(s * np.ravel(x))

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    v0 = s.copy()
    try:
        mu, vec = spla.eigsh(op, k=1, which="LA", tol=tol * 1e-2, maxiter=max_iter, v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"Lanczos did not converge in {max_iter} restarts") from exc
    u = lu.solve(s * vec[:, 0])
    if np.sum(u) < 0:
        u = -u
    u = u.reshape(quot.grid.shape)
    value = quot.value(u)
    Au = A @ u.ravel()
    resid = float(np.linalg.norm(value * Au - b * u.ravel()) / np.linalg.norm(b * u.ravel()))
    return value, u, calls[0], resid


def _pnorm_normalize(u, p, area):
    return u / (np.sum(np.abs(u) ** p) * area) ** (1.0 / p)


def ascend(quot: DiscreteQuotient, u0, tol: float, max_iter: int, precond=None, check_monotone: bool = True):
    """Maximize the quotient from ``u0``.

    Nonlinear conjugate gradients on the quotient's first variation, in the
    metric of ``precond`` (a solver for the weighted ``p = 2`` stiffness),
    with an Armijo backtracking line search and p-norm renormalization after
    each step.  Returns ``(value, iterate, iterations, last relative change)``.
    """
    p = quot.p
    area = quot.grid.cell_area
    solve = precond or (lambda g: g)
    u = _pnorm_normalize(np.asarray(u0, dtype=float), p, area)
    q, g = quot.first_variation(u)
    d_prev = s_prev = g_prev = None
    t = None
    rel = np.inf
    quiet = 0
    for it in range(1, max_iter + 1):
        s = solve(g)
        d = s
        if g_prev is not None:
            beta = max(0.0, float(np.vdot(g - g_prev, s)) / float(np.vdot(g_prev, s_prev)))
            d = s + beta * d_prev
            if np.vdot(g, d) <= 0:
                d = s
        slope = float(np.vdot(g, d))
        if slope <= 0 or not np.isfinite(slope):
            return q, u, it, 0.0
        if t is None:
            t = 0.1 * np.linalg.norm(u) / max(np.linalg.norm(d), 1e-300)
        else:
            t *= 2.0
        accepted = False
        for _ in range(60):
            trial = u + t * d
            try:
                qt = quot.value(trial)
            except Exception:
                qt = -np.inf
            if qt >= q + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return q, u, it, 0.0
        u_new = _pnorm_normalize(trial, p, area)
        q_new, g_new = quot.first_variation(u_new)
        if check_monotone and q_new < q * (1 - 1e-12):
            raise AssertionError(f"ascent step decreased the quotient: {q} -> {q_new}")
        rel = (q_new - q) / abs(q_new)
        g_prev, s_prev, d_prev = g, s, d
        u, q, g = u_new, q_new, g_new
        quiet = quiet + 1 if rel < tol else 0
        if quiet >= 3:
            return q, u, it, rel
    raise ConvergenceError(f"ascent did not converge in {max_iter} iterations", best=(q, u, max_iter, rel))


def _preconditioner(quot: DiscreteQuotient):
    lu = _factor(stiffness_matrix(quot))
    shape = quot.grid.shape
    return lambda g: lu.solve(np.ravel(g)).reshape(shape)


def start_fields(config: GeometryConfig, grid: Grid, seed: int, count: int):
    """Nonnegative seeded starts (``Q(|u|) >= Q(u)``, so sign changes never help)."""
    return [np.abs(generate_test_function(seed * 1009 + k, grid, config).values) for k in range(count)]


def estimate_sharp(
    kind,
    config: GeometryConfig,
    w: WeightSpec,
    grid: Grid,
    tol: Optional[float] = None,
    max_iter: int = 20000,
    method: str = "auto",
    seed: int = 0,
    starts: int = N_STARTS,
) -> ConstantEstimate:
    """Best constant of the discrete quotient ``kind`` on ``grid``."""
    kind = QuotientKind(kind)
    if tol is not None and not tol > 0:
        raise PreconditionError("tol must be positive")
    grid.check_alignment(config)
    quot = make_quotient(kind, config, grid, w)
    if method == "auto":
        method = "eig2" if w.p == 2 else "ascent"
    meta = dict(variant=kind.value, p=w.p, alpha=w.alpha, delta=config.delta, N=config.N, grid=grid.label())
    if method == "eig2":
        if w.p != 2:
            raise PreconditionError("the eigenvalue route requires p = 2")
        value, u, its, resid = _eig2(quot, tol or 1e-8, max_iter)
        return ConstantEstimate(value, its, resid, method="Eig2", vector=u, **meta)
    if method != "ascent":
        raise ValueError(f"unknown method {method!r}")
    tol = tol or 1e-6
    precond = _preconditioner(quot)
    best = None
    total = 0
    for u0 in start_fields(config, grid, seed, starts):
        try:
            q, u, its, rel = ascend(quot, u0, tol, max_iter, precond)
        except ConvergenceError as exc:
            if best is None or exc.best[0] > best[0]:
                best = exc.best
            raise ConvergenceError(str(exc), best=ConstantEstimate(best[0], best[2], best[3], method="GradAscent", vector=best[1], **meta))
        total += its
        log.debug("start finished at %.10g after %d iterations", q, its)
        if best is None or q > best[0]:
            best = (q, u, its, rel)
    q, u, _, rel = best
    return ConstantEstimate(quot.value(u), total, abs(rel), method="GradAscent", vector=u, **meta)
