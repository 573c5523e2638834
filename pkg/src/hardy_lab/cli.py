"""``hardy-lab verify|estimate|sweep``: corpus checks, sharp constants, parameter sweeps.

Exit status: 0 all assertions pass, 1 an assertion failed, 2 configuration
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List

from .config import RunConfig, default_document, load, parse_resolution
from .errors import AssemblyError, ConfigurationError, ConvergenceError, HardyLabError
from .field import Grid, generate_test_function, gradient
from .geometry import GeometryConfig
from .ineq import (
    DEFAULT_C_HL,
    POINTWISE_CORRECTED,
    POINTWISE_PROOF,
    POINTWISE_STATEMENT,
    QuotientKind,
    WeightSpec,
    bound_slack,
    friedrichs_quotient,
    hardy_quotient,
    lemma_checks,
    paper_constants,
    pointwise_ratio,
    riesz_vs_maximal,
)
from .maxop import RadiusSchedule
from .oracle import MAX_CELLS_PER_SIDE, oracle_sharp
from .sharp import CSV_FIELDS, estimate_sharp

log = logging.getLogger("hardy_lab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3

VERIFY_FIELDS = [
    "config_hash", "N", "delta", "grid", "seed", "check", "variant", "p", "alpha",
    "numerator", "denominator", "ratio", "bound", "slack", "status", "paper_admissible",
]  # fmt: skip
ESTIMATE_FIELDS = ["config_hash"] + CSV_FIELDS + ["paper_admissible", "oracle_rel_diff", "status"]

# relative sample positions and radii for the mean-oscillation checks
LEMMA_POINTS = ((0.5, 0.5), (0.25, 0.3), (0.05, 0.55))
LEMMA_RADII = (0.04, 0.08, 0.16)


def thread_count() -> int:
    raw = os.environ.get("HARDY_LAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"HARDY_LAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError(f"HARDY_LAB_THREADS must be a positive integer, got {raw!r}")
    return n


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in fields})


def _write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _map(fn, tasks):
    n = thread_count()
    if n == 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, tasks))


# --- verify --------------------------------------------------------------------------


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _verify_field(cfg: RunConfig, geometry: GeometryConfig, grid: Grid, k: int) -> List[dict]:
    seed = cfg.corpus.field_seed(k)
    u = generate_test_function(seed, grid, geometry, modes=cfg.corpus.modes, h_cut=cfg.corpus.h_cut)
    slack = bound_slack(grid, cfg.tolerance["bound_slack"])
    c_hl = cfg.c_hl if cfg.c_hl is not None else DEFAULT_C_HL
    base = {"config_hash": cfg.config_hash, "N": geometry.N, "delta": geometry.delta, "grid": grid.label(), "seed": seed}
    rows = []

    def add(**kw):
        row = dict(base)
        row.update(kw)
        if row.get("bound") is not None and row.get("ratio") is not None:
            row["slack"] = row["bound"] - row["ratio"]
        rows.append(row)

    for p in sorted({w.p for w in cfg.weights}):
        rep = friedrichs_quotient(u, geometry, p)
        bound = rep.bound * (1.0 + slack)
        vacuous = geometry.delta == 1.0
        add(check="friedrichs", variant="-", p=p, alpha=0.0, numerator=rep.numerator, denominator=rep.denominator,
            ratio=rep.ratio, bound=bound, status="vacuous" if vacuous else _status(rep.ratio <= bound),
            paper_admissible=True)  # fmt: skip

    for w in cfg.weights:
        pc = paper_constants(geometry, w, c_hl)
        admissible = pc.C_hardy is not None
        for variant, constant in (("eps", pc.C_hardy), ("rho", pc.C1_thm5)):
            rep = hardy_quotient(u, geometry, w, variant=variant)
            bound = None if constant is None else constant * (1.0 + slack)
            add(check="hardy", variant=variant, p=w.p, alpha=w.alpha, numerator=rep.numerator,
                denominator=rep.denominator, ratio=rep.ratio, bound=bound,
                status=_status(rep.ratio <= bound) if admissible else "info", paper_admissible=admissible)  # fmt: skip

    pw = pointwise_ratio(u, geometry)
    add(check="pointwise", variant="corrected", ratio=pw.max_ratio, bound=POINTWISE_CORRECTED * (1.0 + slack),
        status=_status(pw.against(POINTWISE_CORRECTED, slack)))  # fmt: skip
    add(check="pointwise", variant="statement", ratio=pw.max_ratio, bound=POINTWISE_STATEMENT, status="info")
    add(check="pointwise", variant="proof", ratio=pw.max_ratio, bound=POINTWISE_PROOF, status="info")

    scale = min(geometry.a, geometry.b)
    points = [(fx * geometry.a, fy * geometry.b) for fx, fy in LEMMA_POINTS]
    radii = tuple(r * scale for r in LEMMA_RADII)
    lemma_tol = cfg.tolerance["lemma"]
    checks = lemma_checks(u, points, RadiusSchedule(radii, radii[-1]), tol=lemma_tol)

    def osc(c):
        if c.riesz_bound > 0:
            return c.deviation / c.riesz_bound
        return math.inf if c.deviation > 0 else 0.0

    worst = max(checks, key=osc)
    ratio2 = osc(worst)
    add(check="mean_oscillation", variant="-", numerator=worst.deviation, denominator=worst.riesz_bound, ratio=ratio2,
        bound=1.0 + lemma_tol, status=_status(all(c.oscillation_holds for c in checks)))  # fmt: skip
    boundary = [c for c in checks if c.riesz_boundary_inf is not None and c.riesz_center > 0]
    if boundary:
        worst3 = max(boundary, key=lambda c: c.riesz_boundary_inf / c.riesz_center)
        add(check="boundary_riesz", variant="-", numerator=worst3.riesz_boundary_inf, denominator=worst3.riesz_center,
            ratio=worst3.riesz_boundary_inf / worst3.riesz_center, bound=1.0, status="info")  # fmt: skip

    gmag = u.with_values(gradient(u).magnitude())
    worst_rm = (0.0, 0.0, 0.0)
    for x in points:
        for r in radii:
            rz, bound = riesz_vs_maximal(gmag, x, r)
            if bound > 0 and rz / bound > worst_rm[0]:
                worst_rm = (rz / bound, rz, bound)
    add(check="riesz_maximal", variant="-", numerator=worst_rm[1], denominator=worst_rm[2], ratio=worst_rm[0],
        bound=1.0 + lemma_tol, status=_status(worst_rm[0] <= 1.0 + lemma_tol))  # fmt: skip
    return rows


def _row_key(row):
    nx, ny = parse_resolution(row["grid"])
    return (row["N"], row["delta"], nx, ny, row.get("seed", 0), row.get("check", ""), row.get("variant", ""),
            row.get("p") if row.get("p") is not None else -1.0, row.get("alpha") if row.get("alpha") is not None else -1.0,
            row.get("method", ""))  # fmt: skip


def run_verify(cfg: RunConfig, out: Path) -> int:
    geoms = cfg.geometries()
    tasks = []
    for k in range(cfg.corpus.count):
        # fields are dealt round-robin over the geometry points
        geometry = geoms[k % len(geoms)]
        for grid in cfg.grids(geometry):
            tasks.append((geometry, grid, k))
    t0 = time.perf_counter()
    chunks = _map(lambda t: _verify_field(cfg, *t), tasks)
    rows = sorted((r for chunk in chunks for r in chunk), key=_row_key)
    log.info("verify: %d fields, %d rows in %.1fs", cfg.corpus.count, len(rows), time.perf_counter() - t0)
    failures = [r for r in rows if r["status"] == "fail"]
    _write_csv(out / "verify.csv", VERIFY_FIELDS, rows)
    summary = {}
    for r in rows:
        key = f"{r['check']}/{r['variant']}"
        s = summary.setdefault(key, {"rows": 0, "failures": 0, "max_ratio": 0.0})
        s["rows"] += 1
        s["failures"] += r["status"] == "fail"
        s["max_ratio"] = max(s["max_ratio"], r["ratio"])
    _write_json(out / "verify.json", {
        "command": "verify",
        "config_hash": cfg.config_hash,
        "config": cfg.raw,
        "c_hl": cfg.c_hl if cfg.c_hl is not None else DEFAULT_C_HL,
        "summary": summary,
        "failures": [{k: r.get(k) for k in VERIFY_FIELDS} for r in failures],
        "passed": not failures,
    })  # fmt: skip
    for r in failures:
        print(f"FAIL {r['check']}/{r['variant']} seed={r['seed']} N={r['N']} delta={r['delta']} grid={r['grid']} "
              f"p={r['p']} alpha={r['alpha']}: ratio {r['ratio']:.6g} > bound {r['bound']:.6g}", file=sys.stderr)  # fmt: skip
    return EXIT_FAIL if failures else EXIT_OK


# --- estimate / sweep ----------------------------------------------------------------


def _estimate_points(cfg: RunConfig, geometries, weights):
    points = []
    for geometry in geometries:
        for kind in cfg.variants:
            if kind is QuotientKind.FRIEDRICHS:
                if geometry.delta == 1.0:
                    log.info("skipping friedrichs at delta=1: the free set is empty")
                    continue
                ws = [WeightSpec(p) for p in sorted({w.p for w in weights})]
            else:
                ws = weights
            for w in ws:
                for grid in cfg.grids(geometry):
                    points.append((geometry, kind, w, grid))
    return points


def _estimate_point(cfg: RunConfig, geometry, kind, w, grid) -> List[dict]:
    c_hl = cfg.c_hl if cfg.c_hl is not None else DEFAULT_C_HL
    admissible = kind is QuotientKind.FRIEDRICHS or w.alpha < paper_constants(geometry, w, c_hl).alpha_max
    extra = {"config_hash": cfg.config_hash, "paper_admissible": admissible}
    try:
        est = estimate_sharp(kind, geometry, w, grid, tol=cfg.tolerance["sharp"], max_iter=cfg.tolerance["max_iter"],
                             seed=cfg.corpus.seed)  # fmt: skip
        status = "ok"
    except ConvergenceError as exc:
        log.error("%s", exc)
        est, status = exc.best, "not_converged"
    row = {**est.row(), **extra, "status": status}
    rows = [row]
    if grid.nx <= MAX_CELLS_PER_SIDE and grid.ny <= MAX_CELLS_PER_SIDE:
        orc = oracle_sharp(kind, geometry, w, grid, seed=cfg.corpus.seed)
        rel = abs(orc.value - est.value) / abs(orc.value)
        tol = cfg.tolerance["oracle_p2"] if w.p == 2 else cfg.tolerance["oracle_general"]
        row["oracle_rel_diff"] = rel
        if status == "ok":
            row["status"] = _status(rel <= tol)
        rows.append({**orc.row(), **extra, "status": "reference"})
    return rows


def _run_estimates(cfg: RunConfig, out: Path, name: str, geometries, weights) -> int:
    points = _estimate_points(cfg, geometries, weights)
    t0 = time.perf_counter()
    chunks = _map(lambda t: _estimate_point(cfg, *t), points)
    rows = sorted((r for chunk in chunks for r in chunk), key=lambda r: (r["variant"],) + _row_key(r))
    log.info("%s: %d points in %.1fs", name, len(points), time.perf_counter() - t0)
    _write_csv(out / f"{name}.csv", ESTIMATE_FIELDS, rows)
    bad = [r for r in rows if r["status"] in ("fail", "not_converged")]
    _write_json(out / f"{name}.json", {
        "command": name,
        "config_hash": cfg.config_hash,
        "config": cfg.raw,
        "rows": [{k: r.get(k) for k in ESTIMATE_FIELDS} for r in rows],
        "passed": not bad,
    })  # fmt: skip
    for r in bad:
        print(f"FAIL {r['variant']} p={r['p']} alpha={r['alpha']} delta={r['delta']} N={r['N']} grid={r['grid']}: "
              f"{r['status']} (oracle rel diff {r.get('oracle_rel_diff')})", file=sys.stderr)  # fmt: skip
    return EXIT_FAIL if bad else EXIT_OK


def run_estimate(cfg: RunConfig, out: Path) -> int:
    return _run_estimates(cfg, out, "estimate", [cfg.geometry], cfg.weights)


def run_sweep(cfg: RunConfig, out: Path) -> int:
    return _run_estimates(cfg, out, "sweep", cfg.geometries(), cfg.weight_points())


COMMANDS = {"verify": run_verify, "estimate": run_estimate, "sweep": run_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hardy-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--print-default-config", action="store_true", help="dump the default JSON config and exit")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("command", nargs="?", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="JSON config (defaults are used for missing keys)")
    ap.add_argument("--out", type=Path, help="output directory (default: output.dir of the config)")
    ap.add_argument("--seed", type=int, help="corpus seed override (unsigned 64-bit)")
    ap.add_argument("--resolution", nargs="+", metavar="NXxNY", help="grid resolutions override")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    if args.print_default_config:
        json.dump(default_document(), sys.stdout, indent=2)
        sys.stdout.write("\n")
        return EXIT_OK
    if args.command is None:
        ap.print_usage(sys.stderr)
        print("hardy-lab: error: a command is required", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {}
    if args.seed is not None:
        overrides["corpus.seed"] = args.seed
    if args.resolution:
        overrides["resolutions"] = list(args.resolution)
    try:
        cfg = load(args.config, overrides)
        thread_count()
    except ConfigurationError as exc:
        print(f"hardy-lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (HardyLabError, AssemblyError, ArithmeticError, ValueError, OSError) as exc:
        print(f"hardy-lab: internal error during {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - the exit-status contract covers every failure
        log.exception("unexpected failure")
        print(f"hardy-lab: internal error during {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
