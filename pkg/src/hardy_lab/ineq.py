"""Both sides of each inequality, the closed-form constants, and their slack."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, PreconditionError
from .field import Grid, ScalarField, dirichlet_fraction, gradient, p_energy, p_energy_gradient, pi2_mask
from .geometry import GeometryConfig, rho_eps_field
from .maxop import (
    SCHEDULE_RATIO,
    RadiusSchedule,
    ball_average,
    ball_averages,
    _ball_integrals,
    masked_pointwise_maximal,
    riesz_potential,
)

#: Empirical Hardy-Littlewood envelope used when no override is given.
#: The largest p = 2 ratio ||M u||/||u|| seen on 36 corpus fields at 64x64
#: (fields and their gradient magnitudes, R_max = 1) was 1.177; rounded up.
DEFAULT_C_HL = 1.2

POINTWISE_STATEMENT = 4.0
POINTWISE_PROOF = 8.0
POINTWISE_CORRECTED = 16.0 * math.pi


class QuotientKind(str, enum.Enum):
    FRIEDRICHS = "friedrichs"
    HARDY_EPS = "hardy_eps"
    HARDY_RHO = "hardy_rho"


@dataclass(frozen=True)
class WeightSpec:
    p: float
    alpha: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 1):
            raise PreconditionError(f"p must exceed 1, got {self.p}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise PreconditionError(f"alpha must be >= 0, got {self.alpha}")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def sigma(self) -> float:
        return self.alpha / self.p


@dataclass
class QuotientReport:
    numerator: float
    denominator: float
    ratio: float
    bound: Optional[float] = None
    slack: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class PaperConstants:
    K: float
    C_pw_stmt: float
    C_pw_proof: float
    C_pw_corrected: float
    C: float
    C2: float
    alpha_max: float
    C_hardy: Optional[float]
    C1_thm5: Optional[float]
    C2_thm5: Optional[float]


def friedrichs_constant(config: GeometryConfig, p: float) -> float:
    """``2^p (p+1) (a^(p/q+1) (1-delta)/delta + eps^(p/q+1) (1-delta)^(p/q+1))``."""
    q = p / (p - 1.0)
    e = p / q + 1.0
    d = config.delta
    return 2.0**p * (p + 1.0) * (config.a**e * (1.0 - d) / d + config.epsilon**e * (1.0 - d) ** e)


def alpha_max(c2: float, p: float) -> float:
    """Largest admissible weight exponent: ``1 - C2 (alpha/p)^p > 0`` iff ``alpha < p C2^(-1/p)``."""
    return p * c2 ** (-1.0 / p)


def paper_constants(config: GeometryConfig, w: WeightSpec, c_hl: float = DEFAULT_C_HL, cot_gamma: Optional[float] = None) -> PaperConstants:
    p, alpha = w.p, w.alpha
    C = 8.0**p * c_hl**p
    C2 = C * 2.0**p * (p / 2.0 + 1.0)
    a_max = alpha_max(C2, p)
    if alpha == 0:
        c_hardy = C
    elif alpha < a_max:
        c_hardy = C2 / (1.0 - C2 * w.sigma**p)
    else:
        c_hardy = None
    c1 = None
    c2 = None
    if c_hardy is not None:
        c1 = 2.0 ** (alpha / 2) * (1.0 - config.delta) ** (alpha / 2) * config.epsilon ** (alpha / 2) * c_hardy
        if cot_gamma is not None:
            c2 = c1 * (1.0 + (1.0 - config.delta) * config.epsilon / 2.0 * cot_gamma) ** (p - alpha)
    return PaperConstants(
        K=friedrichs_constant(config, p),
        C_pw_stmt=POINTWISE_STATEMENT,
        C_pw_proof=POINTWISE_PROOF,
        C_pw_corrected=POINTWISE_CORRECTED,
        C=C,
        C2=C2,
        alpha_max=a_max,
        C_hardy=c_hardy,
        C1_thm5=c1,
        C2_thm5=c2,
    )


def bound_slack(grid: Grid, base: float = 0.05) -> float:
    """Relative slack on continuum bounds: ``base`` at 128x128, first order in h."""
    return base * 128.0 / math.sqrt(grid.nx * grid.ny)


# --- discrete quotients ----------------------------------------------------------


class DiscreteQuotient:
    """``Q(u) = sum W |u|^p hx hy / E_p(u; w)`` on a fixed grid.

    ``W`` is the cellwise numerator weight (zero outside the integration
    region) and ``w`` the energy weight; both are evaluated at cell centers.
    """

    def __init__(self, grid: Grid, dirichlet, p: float, num_weight, energy_weight=None):
        self.grid = grid
        self.dirichlet = np.asarray(dirichlet, dtype=float)
        self.p = float(p)
        self.num_weight = np.asarray(num_weight, dtype=float)
        self.energy_weight = None if energy_weight is None else np.asarray(energy_weight, dtype=float)

    def numerator(self, v) -> float:
        return float(np.sum(self.num_weight * np.abs(v) ** self.p) * self.grid.cell_area)

    def denominator(self, v) -> float:
        return p_energy(v, self.grid, self.dirichlet, self.p, self.energy_weight)

    def value(self, v) -> float:
        d = self.denominator(v)
        if d <= 0:
            raise DegenerateInputError("gradient energy vanishes")
        return self.numerator(v) / d

    def first_variation(self, v):
        """Value and gradient of the quotient with respect to the cell values."""
        v = np.asarray(v, dtype=float)
        num = self.numerator(v)
        den = self.denominator(v)
        if den <= 0:
            raise DegenerateInputError("gradient energy vanishes")
        q = num / den
        g_num = self.p * self.num_weight * np.abs(v) ** (self.p - 1) * np.sign(v) * self.grid.cell_area
        g_den = p_energy_gradient(v, self.grid, self.dirichlet, self.p, self.energy_weight)
        return q, (g_num - q * g_den) / den


def distance_weights(grid: Grid, config: GeometryConfig, kind: QuotientKind) -> np.ndarray:
    X1, X2 = grid.mesh()
    if kind is QuotientKind.HARDY_EPS:
        return rho_eps_field(X1, X2, config)
    return X1.copy()


def make_quotient(kind: QuotientKind, config: GeometryConfig, grid: Grid, w: WeightSpec) -> DiscreteQuotient:
    kind = QuotientKind(kind)
    grid.check_alignment(config)
    dirichlet = dirichlet_fraction(grid, config)
    if kind is QuotientKind.FRIEDRICHS:
        return DiscreteQuotient(grid, dirichlet, w.p, pi2_mask(grid, config).astype(float))
    d = distance_weights(grid, config, kind)
    energy_w = None if w.alpha == 0 else d**w.alpha
    return DiscreteQuotient(grid, dirichlet, w.p, d ** (w.alpha - w.p), energy_w)


def _report(quot: DiscreteQuotient, u: ScalarField, bound=None, meta=None) -> QuotientReport:
    num = quot.numerator(u.values)
    den = quot.denominator(u.values)
    if den <= 0:
        raise DegenerateInputError("gradient energy vanishes; the quotient is undefined")
    ratio = num / den
    return QuotientReport(num, den, ratio, bound, None if bound is None else bound - ratio, dict(meta or {}))


def friedrichs_quotient(u: ScalarField, config: GeometryConfig, p: float, meta=None) -> QuotientReport:
    w = WeightSpec(p)
    quot = make_quotient(QuotientKind.FRIEDRICHS, config, u.grid, w)
    m = {"check": "friedrichs", "p": p, "alpha": 0.0, "variant": "-"}
    m.update(meta or {})
    return _report(quot, u, friedrichs_constant(config, p), m)


def hardy_quotient(
    u: ScalarField,
    config: GeometryConfig,
    w: WeightSpec,
    variant: str = "eps",
    alpha_max: Optional[float] = None,
    meta=None,
) -> QuotientReport:
    """Weighted Hardy quotient with ``d = rho_eps`` (``variant="eps"``) or ``d = rho``."""
    variant = variant.lower()
    if variant not in ("eps", "rho"):
        raise ValueError(f"variant must be 'eps' or 'rho', got {variant!r}")
    if alpha_max is not None and w.alpha >= alpha_max:
        raise PreconditionError(f"alpha={w.alpha} is not below the admissible bound {alpha_max:.6g}")
    kind = QuotientKind.HARDY_EPS if variant == "eps" else QuotientKind.HARDY_RHO
    quot = make_quotient(kind, config, u.grid, w)
    m = {"check": "hardy", "p": w.p, "alpha": w.alpha, "variant": variant}
    m.update(meta or {})
    return _report(quot, u, None, m)


# --- pointwise inequality --------------------------------------------------------


@dataclass
class PointwiseReport:
    max_ratio: float
    argmax_cell: tuple
    ratios: np.ndarray = field(repr=False)
    holds: dict = field(default_factory=dict)

    def against(self, constant: float, tol: float = 0.0) -> bool:
        return self.max_ratio <= constant * (1.0 + tol)


def pointwise_ratio(u: ScalarField, config: GeometryConfig, ratio: float = SCHEDULE_RATIO) -> PointwiseReport:
    """``|u(x)| / (rho_eps(x) M_{rho_eps(x)}(|grad u| chi_{B(xbar, rho_eps(x))})(x))`` over all cells.

    Cells where the restricted maximal function vanishes are skipped.
    """
    g = gradient(u).magnitude()
    if not np.any(g > 0):
        raise DegenerateInputError("|grad u| vanishes identically")
    X1, X2 = u.grid.mesh()
    re = rho_eps_field(X1, X2, config)
    M = masked_pointwise_maximal(u.with_values(g), re, ratio)
    if not np.any(M > 0):
        raise DegenerateInputError("all restricted maximal values vanish")
    r = np.zeros_like(M)
    pos = M > 0
    r[pos] = np.abs(u.values[pos]) / (re[pos] * M[pos])
    idx = np.unravel_index(int(np.argmax(r)), r.shape)
    mx = float(r[idx])
    holds = {
        "statement_4": mx <= POINTWISE_STATEMENT,
        "proof_8": mx <= POINTWISE_PROOF,
        "corrected_16pi": mx <= POINTWISE_CORRECTED,
    }
    return PointwiseReport(mx, (int(idx[0]), int(idx[1])), r, holds)


# --- auxiliary lemmas -------------------------------------------------------------


@dataclass
class LemmaCheck:
    point: tuple
    radius: float
    deviation: float  # |u(x) - u_B|
    riesz_bound: float  # 2 * int_B |grad u| / |x - z|
    oscillation_holds: bool
    riesz_center: float
    riesz_boundary_inf: Optional[float]  # None when B does not meet x1 = 0
    boundary_holds: Optional[bool]


def _cell_value(u: ScalarField, x) -> float:
    i = min(int(x[0] / u.grid.hx), u.grid.nx - 1)
    j = min(int(x[1] / u.grid.hy), u.grid.ny - 1)
    return float(u.values[i, j])


def lemma_checks(
    u: ScalarField,
    sample_points: Sequence,
    schedule: RadiusSchedule,
    tol: float = 0.0,
    boundary_samples: int = 9,
) -> List[LemmaCheck]:
    """Mean-oscillation bound and the boundary-infimum comparison at each point and radius."""
    gmag = u.with_values(gradient(u).magnitude())
    out = []
    for x in sample_points:
        ux = _cell_value(u, x)
        for r in schedule.radii:
            u_b = ball_average(u, x, r)
            center = riesz_potential(gmag, x, r)
            dev = abs(ux - u_b)
            bound = 2.0 * center
            inf_b = None
            boundary_ok = None
            if r > x[0]:
                half = math.sqrt(r * r - x[0] * x[0])
                lo = max(x[1] - half, 0.0)
                hi = min(x[1] + half, u.grid.b)
                if hi > lo:
                    ys = np.linspace(lo, hi, boundary_samples)
                    inf_b = min(riesz_potential(gmag, x, r, source=(0.0, float(y))) for y in ys)
                    boundary_ok = inf_b <= center * (1.0 + tol)
            out.append(LemmaCheck(tuple(map(float, x)), float(r), dev, bound, dev <= bound * (1.0 + tol) + 1e-14, center, inf_b, boundary_ok))
    return out


def riesz_vs_maximal(f: ScalarField, x, r: float, ratio: float = SCHEDULE_RATIO):
    """Riesz potential at radius ``r`` against ``4 pi r M_r f(x)``."""
    sched = RadiusSchedule.geometric(f.grid, r, ratio=ratio, r_min=min(max(f.grid.hx, f.grid.hy), r))
    m = float(ball_averages(f, x, sched).max())
    return riesz_potential(f, x, r), 4.0 * math.pi * r * m


# --- Maz'ya functional ------------------------------------------------------------


def mazya_B(V: ScalarField, p: float, q: float, centers: Sequence, radii: RadiusSchedule) -> float:
    """Grid lower estimate of ``sup_x sup_R R^(1 - 2/p) (int_{B_R(x)} V)^(1/q)``.

    ``V`` lives on the window covered by its grid and is taken as zero outside.
    """
    ok = (p == 1 and q >= 1) or (1 < p < 2 and p < q)
    if not ok:
        raise PreconditionError(f"(p, q) = ({p}, {q}) is outside 1 < p < q, p < 2 or 1 = p <= q")
    vals = V.values
    if np.any(vals < 0):
        raise PreconditionError("V must be nonnegative")
    g = V.grid
    rs = radii.array()
    px = int(math.ceil(rs[-1] / g.hx)) + 2
    py = int(math.ceil(rs[-1] / g.hy)) + 2
    ext = np.zeros((g.nx + 2 * px, g.ny + 2 * py))
    ext[px : px + g.nx, py : py + g.ny] = vals
    ints = np.empty(rs.size)
    best = 0.0
    for c in centers:
        _ball_integrals(ext, px, py, g.hx, g.hy, float(c[0]), float(c[1]), rs, 0.0, 0.0, -1.0, ints)
        vals_c = rs ** (1.0 - 2.0 / p) * np.maximum(ints, 0.0) ** (1.0 / q)
        best = max(best, float(vals_c.max()))
    return best
