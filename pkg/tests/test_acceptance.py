"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line (see the terminal summary) before it
asserts, so a failing criterion still reports its measured numbers.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest
from conftest import record
from scipy.linalg import eigh
from scipy.optimize import minimize
from test_maxop import exhaustive_maximal

from hardy_lab.cli import main
from hardy_lab.config import CorpusSpec
from hardy_lab.field import Grid, ScalarField, generate_test_function, gradient, integrate_weighted, pi2_mask
from hardy_lab.geometry import GeometryConfig, rho_eps_field
from hardy_lab.ineq import (
    POINTWISE_CORRECTED,
    QuotientKind,
    WeightSpec,
    friedrichs_constant,
    friedrichs_quotient,
    hardy_quotient,
    make_quotient,
    mazya_B,
    pointwise_ratio,
    riesz_vs_maximal,
)
from hardy_lab.maxop import RadiusSchedule, maximal_fn, riesz_potential
from hardy_lab.oracle import oracle_sharp
from hardy_lab.sharp import estimate_sharp

CORPUS = CorpusSpec()
GEOMETRIES = [GeometryConfig(1, 1, N, d) for N, d in itertools.product((4, 8), (0.25, 0.5, 0.75))]
PS = (1.5, 2.0, 3.0)


def corpus_field(k, geometry, n):
    return generate_test_function(CORPUS.field_seed(k), Grid.for_config(geometry, n, n), geometry)


def round_robin():
    """The 100-field corpus dealt over the six geometries, as the verify command does."""
    return [(k, GEOMETRIES[k % len(GEOMETRIES)]) for k in range(CORPUS.count)]


# --- 1 -------------------------------------------------------------------------------


def test_c01_friedrichs_bound():
    t0 = time.perf_counter()
    worst_slack = math.inf
    maxima = {}
    for geometry in GEOMETRIES:
        for n in (32, 64, 128):
            fields = [corpus_field(k, geometry, n) for k in range(CORPUS.count)]
            for p in PS:
                ratios = [friedrichs_quotient(u, geometry, p).ratio for u in fields]
                maxima[(geometry, p, n)] = max(ratios)
                if n == 128:
                    K = friedrichs_constant(geometry, p)
                    worst_slack = min(worst_slack, K * 1.05 - max(ratios))
    monotone = all(
        maxima[(g, p, 32)] > maxima[(g, p, 64)] > maxima[(g, p, 128)] for g in GEOMETRIES for p in PS
    )
    elapsed = time.perf_counter() - t0
    ok = worst_slack >= 0 and monotone and elapsed <= 600
    record(1, ok, f"min(1.05 K - max ratio) = {worst_slack:.4g}, max decreasing 32->64->128: {monotone}, {elapsed:.0f}s")
    assert ok


# --- 2 -------------------------------------------------------------------------------


def one_dimensional_oracle(nx, p):
    """Sharp constant of the cell-centered 1-D Hardy quotient on [0, 1], u(0) = 0 by odd reflection."""
    h = 1.0 / nx
    x = (np.arange(nx) + 0.5) * h
    w = x**-p
    if p == 2:
        # tridiagonal stiffness: interior differences plus the ghost face 2 u0^2 / h
        A = np.diag(np.full(nx, 2.0)) - np.diag(np.ones(nx - 1), 1) - np.diag(np.ones(nx - 1), -1)
        A[-1, -1] = 1.0
        A[0, 0] = 1.0 + 2.0
        A /= h
        lam = eigh(np.diag(w * h), A, eigvals_only=True)
        return float(lam[-1])

    def neg_q(u):
        d = np.diff(u) / h
        t = 2 * u[0] / h
        E = np.sum(np.abs(d) ** p) * h + abs(t) ** p * h / 2
        N = np.sum(w * np.abs(u) ** p) * h
        gE = np.zeros(nx)
        gd = p * np.abs(d) ** (p - 1) * np.sign(d)
        gE[1:] += gd
        gE[:-1] -= gd
        gE[0] += p * abs(t) ** (p - 1) * np.sign(t)
        gN = p * w * np.abs(u) ** (p - 1) * np.sign(u) * h
        q = N / E
        return -q, -(gN - q * gE) / E

    best = 0.0
    for expo in (0.5, 1 - 1 / p, 0.8):
        res = minimize(neg_q, x**expo, jac=True, method="L-BFGS-B", options={"maxiter": 20000, "ftol": 1e-15, "gtol": 1e-12})
        best = max(best, -res.fun)
    return best


def test_c02_classical_anchor():
    t0 = time.perf_counter()
    cfg = GeometryConfig(1, 1, 8, 1.0)
    grids = [(64, 8), (128, 16), (256, 32)]
    lines, ok = [], True
    for p, (lo, hi) in [(2.0, (3.2, 4.0)), (3.0, (2.6, 3.375))]:
        vals = []
        for nx, ny in grids:
            est = estimate_sharp(QuotientKind.HARDY_RHO, cfg, WeightSpec(p), Grid.for_config(cfg, nx, ny)).value
            ref = one_dimensional_oracle(nx, p)
            # the estimate is the discrete constant, not an artifact of the solver
            assert est == pytest.approx(ref, rel=1e-6 if p == 2 else 1e-3)
            vals.append(est)
        inc = all(a < b for a, b in zip(vals, vals[1:]))
        inside = all(lo <= v < hi for v in vals)
        ok &= inc and inside
        lines.append(f"p={p:g}: {', '.join(f'{v:.4f}' for v in vals)} in [{lo}, {hi})={inside} increasing={inc}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 300
    record(2, ok, "; ".join(lines) + f", {elapsed:.0f}s")
    assert ok


# --- 3 -------------------------------------------------------------------------------


@pytest.mark.slow
def test_c03_oracle_equivalence():
    t0 = time.perf_counter()
    worst = {2.0: 0.0, 1.5: 0.0, 3.0: 0.0}
    for p, kind, delta, alpha in itertools.product(PS, QuotientKind, (0.5, 1.0), (0.0, 0.25)):
        if kind is QuotientKind.FRIEDRICHS and (alpha > 0 or delta == 1.0):
            continue  # no weight in the Friedrichs quotient; no free part at delta = 1
        # N = 4 keeps a free strip on an 8x8 grid (with N = 8 every row faces a Dirichlet piece)
        cfg = GeometryConfig(1, 1, 4, delta)
        grid = Grid.for_config(cfg, 8, 8)
        w = WeightSpec(p, alpha)
        est = estimate_sharp(kind, cfg, w, grid).value
        ref = oracle_sharp(kind, cfg, w, grid).value
        worst[p] = max(worst[p], abs(est - ref) / ref)
    elapsed = time.perf_counter() - t0
    ok = worst[2.0] <= 1e-6 and worst[1.5] <= 1e-3 and worst[3.0] <= 1e-3 and elapsed <= 120
    record(3, ok, f"max rel diff p=2 {worst[2.0]:.2e}, p=1.5 {worst[1.5]:.2e}, p=3 {worst[3.0]:.2e}, {elapsed:.0f}s")
    assert ok


# --- 4 -------------------------------------------------------------------------------


def test_c04_first_variation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    cfg = GeometryConfig(1, 1, 4, 0.5)
    grid = Grid.for_config(cfg, 32, 32)
    worst = 0.0
    for p in PS:
        for k in range(20):
            kind = (QuotientKind.HARDY_EPS, QuotientKind.HARDY_RHO)[k % 2]
            quot = make_quotient(kind, cfg, grid, WeightSpec(p, 0.25 * (k % 3 == 0)))
            u = corpus_field(k, cfg, 32).values + 0.1 * rng.normal(size=grid.shape)
            d = rng.normal(size=grid.shape)
            h = 1e-6
            fd = (quot.value(u + h * d) - quot.value(u - h * d)) / (2 * h)
            _, grad = quot.first_variation(u)
            worst = max(worst, abs(np.sum(grad * d) - fd) / abs(fd))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-5 and elapsed <= 60
    record(4, ok, f"max rel error {worst:.2e} over 60 pairs, {elapsed:.1f}s")
    assert ok


# --- 5 -------------------------------------------------------------------------------

# regression pin from the first accepted run; the argmax sits in the top free
# segment, where no Dirichlet piece lies within (1 - delta) eps / 2
POINTWISE_MAX = 19.59005199215288


@pytest.mark.slow
def test_c05_pointwise():
    t0 = time.perf_counter()
    best, where = 0.0, None
    for k, geometry in round_robin():
        rep = pointwise_ratio(corpus_field(k, geometry, 128), geometry)
        if rep.max_ratio > best:
            best, where = rep.max_ratio, (k, geometry.N, geometry.delta)
    elapsed = time.perf_counter() - t0
    ok = best <= POINTWISE_CORRECTED * 1.05
    pinned = best == pytest.approx(POINTWISE_MAX, rel=1e-9)
    ok &= pinned
    record(
        5,
        ok,
        f"max ratio {best:.6g} (field {where[0]}, N={where[1]}, delta={where[2]}) vs 16pi*1.05 = "
        f"{POINTWISE_CORRECTED * 1.05:.4g}; printed 4: {best <= 4}, proof 8: {best <= 8}; {elapsed:.0f}s",
    )
    assert ok


# --- 6 -------------------------------------------------------------------------------


def test_c06_maximal_and_riesz():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    cfg = GeometryConfig(1, 1, 4, 0.5)
    grid = Grid.for_config(cfg, 16, 16)
    radii = tuple(float(r) for r in np.geomspace(grid.hx, 0.45, 8))
    sched = RadiusSchedule(radii, radii[-1])
    max_dev = 0.0
    for _ in range(10):
        u = ScalarField(grid, rng.normal(size=grid.shape), np.zeros(16))
        x = tuple(rng.uniform(0, 1, size=2))
        ref = exhaustive_maximal(u.values, grid, x, radii)
        max_dev = max(max_dev, abs(maximal_fn(u, x, sched) - ref) / ref)

    big = Grid(1, 1, 128, 128)
    one = ScalarField(big, np.ones(big.shape), np.zeros(128))
    const_dev = 0.0
    for x, r in [((0.5, 0.5), 0.2), ((0.3, 0.6), 0.1), ((0.5, 0.5), 0.45), ((0.7, 0.2), 0.15)]:
        const_dev = max(const_dev, abs(riesz_potential(one, x, r) / (2 * math.pi * r) - 1))

    worst = 0.0
    for k, geometry in round_robin():
        u = corpus_field(k, geometry, 128)
        g = u.with_values(gradient(u).magnitude())
        for x in [(0.1, 0.1), (0.5, 0.5), (0.8, 0.3), (0.03, 0.6)]:
            for r in (0.05, 0.1, 0.3):
                riesz, bound = riesz_vs_maximal(g, x, r)
                worst = max(worst, riesz / bound)
    elapsed = time.perf_counter() - t0
    ok = max_dev <= 1e-11 and const_dev <= 0.03 and worst <= 1.05
    record(
        6,
        ok,
        f"maximal vs exhaustive {max_dev:.1e}; Riesz(1)/2pi r off by {const_dev:.2%}; "
        f"max Riesz/(4 pi r M) {worst:.3f}; {elapsed:.0f}s",
    )
    assert ok


# --- 7 -------------------------------------------------------------------------------


def test_c07_degenerations():
    cfg = GeometryConfig(1, 1, 8, 1.0)
    grid = Grid.for_config(cfg, 64, 64)
    X1, X2 = grid.mesh()
    rho_exact = np.array_equal(rho_eps_field(X1, X2, cfg), X1)
    worst = 0.0
    pi2_zero = True
    for k in range(10):
        u = generate_test_function(CORPUS.field_seed(k), grid, cfg)
        for p, alpha in itertools.product(PS, (0.0, 0.25)):
            w = WeightSpec(p, alpha)
            e = hardy_quotient(u, cfg, w, "eps").ratio
            r = hardy_quotient(u, cfg, w, "rho").ratio
            worst = max(worst, abs(e - r) / r)
            pi2_zero &= friedrichs_quotient(u, cfg, p).numerator == 0.0
        pi2_zero &= integrate_weighted(u.values**2, grid, region=pi2_mask(grid, cfg)) == 0.0
    k_zero = all(friedrichs_constant(cfg, p) == 0.0 for p in PS)
    ok = rho_exact and worst <= 1e-14 and k_zero and pi2_zero
    record(7, ok, f"rho_eps == rho exact: {rho_exact}; eps/rho quotient rel diff {worst:.1e}; K = 0: {k_zero}; "
                  f"Pi2 integrals 0: {pi2_zero}")  # fmt: skip
    assert ok


# --- 8 -------------------------------------------------------------------------------


def test_c08_monotone_in_delta():
    vals = []
    for d in (0.25, 0.5, 0.75, 1.0):
        cfg = GeometryConfig(1, 1, 8, d)
        vals.append(estimate_sharp(QuotientKind.HARDY_RHO, cfg, WeightSpec(2.0), Grid.for_config(cfg, 128, 16)).value)
    ok = all(b <= a + 1e-10 for a, b in zip(vals, vals[1:]))
    record(8, ok, "HardyRho p=2 at 128x16: " + ", ".join(f"{v:.5g}" for v in vals))
    assert ok


# --- 9 -------------------------------------------------------------------------------


def test_c09_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"corpus": {"seed": 11, "count": 6}}))
    codes = [main(["verify", "--config", str(cfg), "--out", str(tmp_path / run)]) for run in ("a", "b")]
    a = (tmp_path / "a" / "verify.csv").read_bytes()
    b = (tmp_path / "b" / "verify.csv").read_bytes()
    ok = a == b and codes[0] == codes[1]
    record(9, ok, f"two verify runs, {len(a.splitlines()) - 1} rows each, byte-identical: {a == b}, exit {codes}")
    assert ok


# --- 10 ------------------------------------------------------------------------------


def test_c10_mazya():
    grid = Grid(1, 1, 128, 128)
    one = ScalarField(grid, np.ones(grid.shape), np.zeros(128))
    r_max = 0.5
    sched = RadiusSchedule((0.1, 0.2, 0.3, 0.4, r_max), r_max)
    const = mazya_B(one, 1.0, 1.0, [(0.5, 0.5)], sched)
    const_dev = abs(const / (math.pi * r_max) - 1)

    X1, X2 = grid.mesh()
    V = one.with_values(((X1 - 0.3) ** 2 + (X2 - 0.6) ** 2 < 0.2**2).astype(float))
    centers = [(0.5, 0.5), (0.3, 0.6), (0.1, 0.9)]
    sched = RadiusSchedule((0.05, 0.1, 0.2, 0.3), 0.3)
    p, q = 1.5, 2.0
    got = mazya_B(V, p, q, centers, sched)
    fine = (np.arange(2048) + 0.5) / 2048
    F1, F2 = np.meshgrid(fine, fine, indexing="ij")
    inside = (F1 - 0.3) ** 2 + (F2 - 0.6) ** 2 < 0.2**2
    ref = 0.0
    for c in centers:
        d2 = (F1 - c[0]) ** 2 + (F2 - c[1]) ** 2
        for r in sched.radii:
            mass = np.sum(inside & (d2 < r * r)) / 2048**2
            ref = max(ref, r ** (1 - 2 / p) * mass ** (1 / q))
    ind_dev = abs(got / ref - 1)
    ok = const_dev <= 0.01 and ind_dev <= 0.03
    record(10, ok, f"V=1: {const:.6g} vs pi R_max {math.pi * r_max:.6g} ({const_dev:.1e}); indicator vs brute force {ind_dev:.2%}")
    assert ok
