"""Run configuration: one JSON document, every default spelled out."""

from __future__ import annotations

import copy
import hashlib
import itertools
import json
import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .errors import ConfigurationError
from .field import Grid
from .geometry import GeometryConfig
from .ineq import QuotientKind, WeightSpec

DEFAULTS = {
    "geometry": {"a": 1.0, "b": 1.0, "N": 8, "delta": 0.5},
    "weights": [{"p": p, "alpha": alpha} for p in (1.5, 2.0, 3.0) for alpha in (0.0, 0.25)],
    "resolutions": ["128x128"],
    "corpus": {"seed": 0, "count": 100, "modes": 6, "h_cut": None},
    "variants": ["friedrichs", "hardy_eps", "hardy_rho"],
    "sweep": {"delta": [], "N": [], "alpha": []},
    "tolerance": {
        "sharp": None,
        "max_iter": 20000,
        "bound_slack": 0.05,
        "lemma": 0.05,
        "oracle_p2": 1e-6,
        "oracle_general": 1e-3,
    },
    "c_hl": None,
    "output": {"dir": "reports"},
}

_RES = re.compile(r"^\s*(\d+)\s*[xX]\s*(\d+)\s*$")


def parse_resolution(text: str) -> Tuple[int, int]:
    m = _RES.match(str(text))
    if not m:
        raise ConfigurationError(f"resolution {text!r} is not of the form NXxNY")
    return int(m.group(1)), int(m.group(2))


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 0
    count: int = 100
    modes: int = 6
    h_cut: Optional[float] = None  # cutoff width; None means half a Dirichlet piece

    def field_seed(self, k: int) -> int:
        return self.seed * 1_000_003 + k


@dataclass
class RunConfig:
    geometry: GeometryConfig
    weights: List[WeightSpec]
    resolutions: List[Tuple[int, int]]
    corpus: CorpusSpec
    variants: List[QuotientKind]
    sweep: dict
    tolerance: dict
    c_hl: Optional[float]
    output_dir: str
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def grids(self, geometry: Optional[GeometryConfig] = None) -> List[Grid]:
        g = geometry or self.geometry
        return [Grid.for_config(g, nx, ny) for nx, ny in self.resolutions]

    def geometries(self) -> List[GeometryConfig]:
        """Geometry points spanned by the delta and N sweep axes (base values when empty)."""
        deltas = self.sweep["delta"] or [self.geometry.delta]
        ns = self.sweep["N"] or [self.geometry.N]
        return [GeometryConfig(self.geometry.a, self.geometry.b, n, d) for n in ns for d in deltas]

    def weight_points(self) -> List[WeightSpec]:
        if not self.sweep["alpha"]:
            return list(self.weights)
        ps = sorted({w.p for w in self.weights})
        return [WeightSpec(p, a) for p, a in itertools.product(ps, self.sweep["alpha"])]


def default_document() -> dict:
    return copy.deepcopy(DEFAULTS)


def _merge(base: dict, doc: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in doc.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigurationError(f"unknown key '{where}'")
        if isinstance(base[key], dict) and key != "geometry":
            if not isinstance(value, dict):
                raise ConfigurationError(f"'{where}' must be an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _number(value, where: str, integer: bool = False):
    ok = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok:
        raise ConfigurationError(f"'{where}' must be {'an integer' if integer else 'a number'}, got {value!r}")
    return value


def build(doc: dict) -> RunConfig:
    """Validate a merged document; errors name the offending key."""
    try:
        geo = doc["geometry"]
        if not isinstance(geo, dict):
            raise ConfigurationError("'geometry' must be an object")
        for k in geo:
            if k not in DEFAULTS["geometry"]:
                raise ConfigurationError(f"unknown key 'geometry.{k}'")
        geo = {**DEFAULTS["geometry"], **geo}
        geometry = GeometryConfig(
            a=float(_number(geo["a"], "geometry.a")),
            b=float(_number(geo["b"], "geometry.b")),
            N=_number(geo["N"], "geometry.N", integer=True),
            delta=float(_number(geo["delta"], "geometry.delta")),
        )
    except ConfigurationError as exc:
        msg = str(exc)
        raise ConfigurationError(msg if "'" in msg else f"geometry: {msg}") from None

    if not isinstance(doc["weights"], list) or not doc["weights"]:
        raise ConfigurationError("'weights' must be a non-empty list")
    weights = []
    for i, w in enumerate(doc["weights"]):
        if not isinstance(w, dict) or set(w) - {"p", "alpha"} or "p" not in w:
            raise ConfigurationError(f"'weights[{i}]' must be an object with keys p and optional alpha")
        p = float(_number(w["p"], f"weights[{i}].p"))
        alpha = float(_number(w.get("alpha", 0.0), f"weights[{i}].alpha"))
        if not p > 1:
            raise ConfigurationError(f"'weights[{i}].p' must exceed 1, got {p}")
        _check_alpha(alpha, p, f"weights[{i}].alpha")
        weights.append(WeightSpec(p, alpha))

    if not isinstance(doc["resolutions"], list) or not doc["resolutions"]:
        raise ConfigurationError("'resolutions' must be a non-empty list")
    resolutions = []
    for i, r in enumerate(doc["resolutions"]):
        try:
            resolutions.append(parse_resolution(r))
        except ConfigurationError as exc:
            raise ConfigurationError(f"'resolutions[{i}]': {exc}") from None

    c = doc["corpus"]
    corpus = CorpusSpec(
        seed=_number(c["seed"], "corpus.seed", integer=True),
        count=_number(c["count"], "corpus.count", integer=True),
        modes=_number(c["modes"], "corpus.modes", integer=True),
        h_cut=None if c["h_cut"] is None else float(_number(c["h_cut"], "corpus.h_cut")),
    )
    if corpus.seed < 0 or corpus.seed >= 2**64:
        raise ConfigurationError("'corpus.seed' must be an unsigned 64-bit integer")
    if corpus.count < 1:
        raise ConfigurationError("'corpus.count' must be at least 1")
    if corpus.modes < 1:
        raise ConfigurationError("'corpus.modes' must be at least 1")
    if corpus.h_cut is not None and not corpus.h_cut > 0:
        raise ConfigurationError("'corpus.h_cut' must be positive")

    if not isinstance(doc["variants"], list) or not doc["variants"]:
        raise ConfigurationError("'variants' must be a non-empty list")
    variants = []
    for i, v in enumerate(doc["variants"]):
        try:
            variants.append(QuotientKind(v))
        except ValueError:
            raise ConfigurationError(f"'variants[{i}]' must be one of {[k.value for k in QuotientKind]}, got {v!r}") from None

    sweep = {}
    for axis in ("delta", "N", "alpha"):
        values = doc["sweep"][axis]
        if not isinstance(values, list):
            raise ConfigurationError(f"'sweep.{axis}' must be a list")
        sweep[axis] = [_number(v, f"sweep.{axis}[{i}]", integer=axis == "N") for i, v in enumerate(values)]
    for i, d in enumerate(sweep["delta"]):
        if not 0 < d <= 1:
            raise ConfigurationError(f"'sweep.delta[{i}]' must lie in (0, 1]")
    for i, n in enumerate(sweep["N"]):
        if n < 1:
            raise ConfigurationError(f"'sweep.N[{i}]' must be at least 1")
    for i, alpha in enumerate(sweep["alpha"]):
        for w in weights:
            _check_alpha(float(alpha), w.p, f"sweep.alpha[{i}]")

    tol = doc["tolerance"]
    if tol["sharp"] is not None and not (_number(tol["sharp"], "tolerance.sharp") > 0):
        raise ConfigurationError("'tolerance.sharp' must be positive")
    if _number(tol["max_iter"], "tolerance.max_iter", integer=True) < 1:
        raise ConfigurationError("'tolerance.max_iter' must be at least 1")
    for key in ("bound_slack", "lemma", "oracle_p2", "oracle_general"):
        if _number(tol[key], f"tolerance.{key}") < 0:
            raise ConfigurationError(f"'tolerance.{key}' must be non-negative")

    c_hl = doc["c_hl"]
    if c_hl is not None and not _number(c_hl, "c_hl") >= 1:
        raise ConfigurationError("'c_hl' must be at least 1 (the maximal function dominates |f|)")

    out = doc["output"]["dir"]
    if not isinstance(out, str) or not out:
        raise ConfigurationError("'output.dir' must be a non-empty string")

    cfg = RunConfig(geometry, weights, resolutions, corpus, variants, sweep, dict(tol), c_hl, out, raw=doc)
    for g in cfg.geometries():
        for nx, ny in resolutions:
            try:
                Grid.for_config(g, nx, ny)
            except Exception as exc:
                raise ConfigurationError(f"'resolutions': {nx}x{ny} does not fit N={g.N}: {exc}") from None
    return cfg


def _check_alpha(alpha: float, p: float, where: str) -> None:
    # the weighted Hardy quotient is finite only for alpha < p - 1
    if not 0 <= alpha < p - 1:
        raise ConfigurationError(f"'{where}' must satisfy 0 <= alpha < p - 1 = {p - 1:g}, got {alpha}")


def load(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Read, merge with defaults, apply command-line overrides, validate."""
    doc = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"malformed JSON in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
        if not isinstance(doc, dict):
            raise ConfigurationError("the config document must be a JSON object")
    merged = _merge(DEFAULTS, doc)
    for dotted, value in (overrides or {}).items():
        node = merged
        *head, last = dotted.split(".")
        for k in head:
            node = node[k]
        node[last] = value
    return build(merged)
