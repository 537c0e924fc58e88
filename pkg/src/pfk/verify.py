"""Inequality harness: evaluates spectral, capacitary and Sobolev-type
inequalities on a domain catalog and records each instance as a report.

Margins are relative signed slacks: for ``lhs >= rhs`` the margin is
``(lhs - rhs) / |rhs|``, for ``lhs <= rhs`` it is ``(rhs - lhs) / |rhs|`` and
for ``lhs ~ rhs`` it is ``-|lhs - rhs| / |rhs|``.  A check passes when
``margin >= -tolerance``.  Reported (non-asserted) checks carry the same
fields but never count as failures.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .capacity import (
    CondenserProblem,
    ball_capacity,
    cap1_convex,
    cheeger_constant,
    concentric_capacity,
    condenser_capacity,
    mazya_estimate,
    point_capacity,
)
from .discretize import (
    GridField,
    distance_transform,
    grad_p_integral,
    lp_integral,
    rasterize,
    superlevel_mask,
)
from .errors import InvalidCondenserError, InvalidInputError, PFKError, UnsupportedDomainError
from .geometry import Ball, domain_to_record, schwarz_ball, unit_ball_volume
from .spectral import SolverOptions, eigen_grid, eigen_radial_shoot, gamma_fn

__all__ = [
    "CheckReport",
    "CheckSuite",
    "VerifyConfig",
    "DEFAULT_TOLERANCES",
    "Evaluator",
    "RadialFunction",
    "kappa3",
    "bhattacharya_bound",
    "default_corpus",
    "mollified_disk_indicator",
    "check_faber_krahn",
    "check_cheeger_bound",
    "check_bhattacharya",
    "check_mazya_sandwich",
    "check_limit_p1",
    "check_limit_pinf",
    "prop1_bound",
    "check_prop1",
    "check_sharp_p1_triad",
    "check_sobolev_p",
    "check_moser_trudinger",
    "check_moser_concentric",
    "check_p_gt_n",
    "radial_sobolev_corpus",
    "moser_functional",
    "point_capacity_constant",
    "prop1_case",
    "fingerprint",
    "run_suite",
    "MOSER_PAIRS",
    "CSV_HEADER",
]

RELATIONS = (">=", "<=", "~")
CSV_HEADER = "name,paper_ref,lhs,rhs,relation,tolerance,margin,pass"

DEFAULT_TOLERANCES = {
    "faber_krahn": 0.01,
    "faber_krahn_scaled": 0.01,
    "cheeger_bound": 0.05,
    "cheeger_p1": 1e-10,
    "bhattacharya": 1e-8,
    "mazya_lower": 0.05,
    "mazya_upper": 0.0,
    "limit_p1_monotone": 0.0,
    "limit_p1": 0.15,
    "limit_pinf": 0.10,
    "limit_pinf_geometric": 0.01,
    "prop1": 0.005,
    "prop1_refinement": 0.0,
    "p1_faber_krahn": 0.01,
    "p1_isocapacitary": 1e-10,
    "p1_sobolev": 0.01,
    "p1_near_sharp": 0.05,
    "sobolev_p": 1e-6,
    "sobolev_p_faber_krahn": 1e-6,
    "moser_functional": 1e-12,
    "moser_concentric": 1e-12,
    "moser_grid": 0.01,
    "moser_faber_krahn": 0.0,
    "p_gt_n_faber_krahn": 0.02,
    "p_gt_n_capacity": 0.02,
    "p_gt_n_sobolev": 0.02,
}


# Reports -------------------------------------------------------------------------


def _margin(lhs, rhs, relation):
    scale = abs(rhs) if rhs != 0 else 1.0
    if relation == ">=":
        return (lhs - rhs) / scale
    if relation == "<=":
        return (rhs - lhs) / scale
    return -abs(lhs - rhs) / scale


@dataclass(frozen=True)
class CheckReport:
    name: str
    paper_ref: str
    lhs: float
    rhs: float
    relation: str
    tolerance: float
    margin: float
    passed: bool
    context: dict = field(default_factory=dict)
    asserted: bool = True
    error: str | None = None

    @classmethod
    def make(cls, name, ref, lhs, rhs, relation, tolerance, context=None, asserted=True):
        if relation not in RELATIONS:
            raise InvalidInputError(f"unknown relation {relation!r}")
        lhs, rhs, tolerance = float(lhs), float(rhs), float(tolerance)
        margin = _margin(lhs, rhs, relation)
        ok = bool(np.isfinite(margin) and margin >= -tolerance)
        return cls(name, ref, lhs, rhs, relation, tolerance, margin, ok, dict(context or {}), asserted)

    @classmethod
    def errored(cls, name, ref, exc, context=None):
        return cls(name, ref, math.nan, math.nan, "~", 0.0, math.nan, False, dict(context or {}), True,
                   f"{type(exc).__name__}: {exc}")

    @property
    def failed(self):
        return self.asserted and not self.passed

    def to_record(self):
        return {
            "name": self.name,
            "paper_ref": self.paper_ref,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "relation": self.relation,
            "tolerance": self.tolerance,
            "margin": self.margin,
            "pass": self.passed,
            "asserted": self.asserted,
            "error": self.error,
            "context": self.context,
        }


@dataclass(frozen=True)
class CheckSuite:
    reports: tuple
    fingerprint: str = ""
    config: dict = field(default_factory=dict)

    @property
    def summary(self):
        asserted = [r for r in self.reports if r.asserted]
        return {
            "total": len(self.reports),
            "asserted": len(asserted),
            "passed": sum(r.passed for r in asserted),
            "failed": sum(r.failed for r in self.reports),
            "errored": sum(r.error is not None for r in self.reports),
            "reported": len(self.reports) - len(asserted),
        }

    @property
    def ok(self):
        return self.summary["failed"] == 0

    def failures(self):
        return [r for r in self.reports if r.failed]

    def to_json(self):
        doc = {
            "fingerprint": self.fingerprint,
            "config": self.config,
            "summary": self.summary,
            "checks": [r.to_record() for r in self.reports],
        }
        return json.dumps(doc, indent=2, sort_keys=False, default=_json_default) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for r in self.reports:
            writer.writerow([r.name, r.paper_ref, repr(r.lhs), repr(r.rhs), r.relation,
                             repr(r.tolerance), repr(r.margin), "true" if r.passed else "false"])
        return buf.getvalue()

    def to_text(self):
        lines = [f"{'check':<34} {'relation':<8} {'lhs':>14} {'rhs':>14} {'margin':>10} {'tol':>8}  result"]
        for r in self.reports:
            status = "PASS" if r.passed else ("FAIL" if r.asserted else "note")
            if r.error:
                status = "ERROR " + r.error
            where = _context_label(r.context)
            lines.append(f"{r.name:<34} {r.relation:<8} {r.lhs:>14.7g} {r.rhs:>14.7g} "
                         f"{r.margin:>10.3g} {r.tolerance:>8.2g}  {status}  {where}")
        s = self.summary
        lines.append(f"{s['total']} checks, {s['asserted']} asserted, {s['failed']} failed, "
                     f"{s['errored']} errored, {s['reported']} reported only")
        return "\n".join(lines) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _context_label(ctx):
    parts = []
    if "domain" in ctx:
        parts.append(ctx["domain"] if isinstance(ctx["domain"], str) else json.dumps(ctx["domain"]))
    for key in ("n", "p", "case", "item"):
        if key in ctx:
            parts.append(f"{key}={ctx[key]}")
    return " ".join(parts)


# Configuration and memoised solves ---------------------------------------------


def _default_resolution():
    env = os.environ.get("PFK_DEFAULT_RESOLUTION")
    if env is None:
        return 128
    try:
        value = int(env)
    except ValueError:
        raise InvalidInputError(f"PFK_DEFAULT_RESOLUTION must be an integer, got {env!r}") from None
    if value < 1:
        raise InvalidInputError("PFK_DEFAULT_RESOLUTION must be positive")
    return value


@dataclass(frozen=True)
class VerifyConfig:
    """Everything that determines a suite run; hashed into its fingerprint."""

    resolution: int = field(default_factory=_default_resolution)
    mazya_resolution: int = 64
    family_size: int = 20
    point_resolutions: tuple = (128, 256)
    prop1_levels: int = 200
    limits: bool = False
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    jobs: int = 1

    def tol(self, name):
        return self.tolerances.get(name, DEFAULT_TOLERANCES[name])

    def with_tolerances(self, overrides):
        unknown = set(overrides) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise InvalidInputError(f"unknown tolerance names: {sorted(unknown)}")
        tols = dict(self.tolerances)
        tols.update({k: float(v) for k, v in overrides.items()})
        return replace(self, tolerances=tols)

    def to_record(self):
        return {
            "resolution": self.resolution,
            "mazya_resolution": self.mazya_resolution,
            "family_size": self.family_size,
            "point_resolutions": list(self.point_resolutions),
            "prop1_levels": self.prop1_levels,
            "limits": self.limits,
            "tolerances": {k: self.tolerances[k] for k in sorted(self.tolerances)},
        }


class Evaluator:
    """Memoised eigenvalue and constant evaluations for one configuration."""

    def __init__(self, config=None, opts=None):
        self.config = config or VerifyConfig()
        self.opts = opts or SolverOptions()
        self._eig = {}
        self._radial = {}
        self._masks = {}

    def mask(self, d, resolution=None):
        res = resolution or self.config.resolution
        key = (_key(d), res)
        if key not in self._masks:
            self._masks[key] = rasterize(d, res)
        return self._masks[key]

    def eig(self, d, p, resolution=None):
        res = resolution or self.config.resolution
        key = (_key(d), float(p), res)
        if key not in self._eig:
            self._eig[key] = eigen_grid(self.mask(d, res), p, self.opts)
        return self._eig[key]

    def radial(self, n, p, R=1.0):
        key = (int(n), float(p))
        if key not in self._radial:
            self._radial[key] = eigen_radial_shoot(n, p, 1.0).lam
        return self._radial[key] * R ** (-p)

    def lam(self, d, p):
        """lambda_p(d): shooting for balls outside the plane, the grid otherwise."""
        if d.dim != 2:
            if isinstance(d, Ball):
                return self.radial(d.n, p, d.radius)
            raise UnsupportedDomainError("non-ball domains are solved on planar grids only")
        return self.eig(d, p).lam


def _key(d):
    return json.dumps(domain_to_record(d), sort_keys=True)


def _ctx(d=None, **extra):
    ctx = {}
    if d is not None:
        ctx["domain"] = domain_to_record(d)
    ctx.update(extra)
    return ctx


def _guard(name, ref, ctx, fn):
    """Run ``fn`` and turn solver/input errors into errored reports."""
    try:
        out = fn()
    except PFKError as exc:
        return [CheckReport.errored(name, ref, exc, ctx)]
    return out if isinstance(out, list) else [out]


# Constants -------------------------------------------------------------------------


def kappa3(p, n):
    """Sharp constant of the (p, pn/(n-p))-Sobolev inequality, 1 <= p < n."""
    if not 1 <= p < n:
        raise InvalidInputError("kappa3 needs 1 <= p < n")
    w = unit_ball_volume(n)
    if p == 1:
        return n * w ** (1.0 / n)
    ratio = gamma_fn(n / p) * gamma_fn(n + 1 - n / p) / gamma_fn(n)
    return n * w ** (p / n) * ((n - p) / (p - 1)) ** (p - 1) * ratio ** (p / n)


def bhattacharya_bound(n, p):
    """Lower bound ``n^(2-p) p^(p-1) (p-1)^(1-p)`` for lambda_p of the unit ball."""
    return n ** (2.0 - p) * p ** (p - 1.0) * (p - 1.0) ** (1.0 - p)


def point_capacity_constant(n, p):
    """Scale-free ``V(B)^((p-n)/n) cap_p(centre; B)`` for any ball, p > n."""
    cap, _ = ball_capacity(n, p, 1.0)
    return unit_ball_volume(n) ** ((p - n) / n) * cap


# Radial test functions ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """A radial function ``f(|x|)`` on the ball ``B_R`` of ``R^n``.

    ``f`` and ``df`` are callables of ``r``; ``f`` is nonincreasing and
    vanishes at ``R``.  Integrals are one-dimensional quadratures.
    """

    n: int
    R: float
    f: object
    df: object
    label: str = "radial"

    @classmethod
    def tent(cls, n, R=1.0):
        return cls(n, R, lambda r: 1.0 - r / R, lambda r: -1.0 / R, "tent")

    @classmethod
    def bump(cls, n, R=1.0, k=2):
        return cls(n, R, lambda r: (1.0 - (r / R) ** 2) ** k,
                   lambda r: -2.0 * k * r / R**2 * (1.0 - (r / R) ** 2) ** (k - 1), f"bump{k}")

    @classmethod
    def point_minimizer(cls, n, p, R=1.0):
        """``1 - (r/R)^alpha``, alpha = (p-n)/(p-1): attains the point capacity of B_R."""
        a = (p - n) / (p - 1.0)
        return cls(n, R, lambda r: 1.0 - (r / R) ** a, lambda r: -a * r ** (a - 1.0) / R**a, "point-minimizer")

    @classmethod
    def talenti(cls, n, p, R=200.0):
        """Sobolev extremal ``(1 + r^(p/(p-1)))^(-(n-p)/p)``, shifted to vanish at R."""
        q = p / (p - 1.0)
        e = -(n - p) / p
        tail = (1.0 + R**q) ** e
        return cls(n, R, lambda r: (1.0 + r**q) ** e - tail,
                   lambda r: e * (1.0 + r**q) ** (e - 1.0) * q * r ** (q - 1.0), f"talenti(R={R:g})")

    def _integrate(self, g):
        area = self.n * unit_ball_volume(self.n)
        pts = [x for x in (1e-3 * self.R, 1.0, 10.0) if 0 < x < self.R]
        val, _ = quad(lambda r: g(r) * r ** (self.n - 1), 0.0, self.R, points=pts or None,
                      limit=400, epsabs=0.0, epsrel=1e-12)
        return area * val

    def grad_integral(self, p):
        return self._integrate(lambda r: abs(self.df(r)) ** p)

    def power_integral(self, q):
        return self._integrate(lambda r: abs(self.f(r)) ** q)

    @property
    def sup(self):
        return float(self.f(0.0))

    def level_radius(self, t):
        """Radius of the superlevel set ``{f >= t}`` (0 if empty)."""
        if t >= self.sup:
            return 0.0
        if t <= 0:
            return self.R
        return brentq(lambda r: self.f(r) - t, 0.0, self.R, xtol=1e-15, rtol=1e-15)

    def rayleigh_quotient(self, p):
        return self.grad_integral(p) / self.power_integral(p)


# Corpus -------------------------------------------------------------------------------


def default_corpus(mask):
    """Deterministic nonnegative test fields on a mask."""
    dist = distance_transform(mask)
    dv = dist.values
    top = float(dv.max())
    x, y = mask.centers()
    inside = mask.inside
    k = np.unravel_index(np.argmax(dv), dv.shape)
    cx, cy = float(x[k]), float(y[k])
    rr = ((x - cx) ** 2 + (y - cy) ** 2) / top**2
    bump = np.where(inside, np.clip(1.0 - rr, 0.0, None) ** 2, 0.0)
    return [
        ("distance", dist),
        ("distance^2", GridField(mask, dv**2)),
        ("plateau", GridField(mask, np.minimum(dv, 0.5 * top))),
        ("bump", GridField(mask, bump)),
    ]


def mollified_disk_indicator(width=0.05, resolution=256, radius=1.0):
    """Smoothed indicator of ``B_radius``: 1 inside, a C^1 ramp of the given width outside."""
    d = Ball(2, radius + 2 * width)
    mask = rasterize(d, resolution)
    x, y = mask.centers()
    s = np.clip((np.hypot(x, y) - radius) / width, 0.0, 1.0)
    values = np.where(mask.inside, 1.0 - s * s * (3.0 - 2.0 * s), 0.0)
    return GridField(mask, values)


# Individual checks -----------------------------------------------------------------------


REF_FK = "p-Faber-Krahn inequality (ball minimises lambda_p at fixed volume)"
REF_FK_SCALED = "scale-free p-Faber-Krahn: lambda_p(D) V(D)^(p/n) >= lambda_p(B_1) w_n^(p/n)"
REF_CHEEGER = "Cheeger lower bound lambda_p >= (h/p)^p"
REF_CHEEGER_P1 = "lambda_1 = gamma_1 = Cheeger constant"
REF_BHATTACHARYA = "Bhattacharya lower bound for lambda_p(B_1)"
REF_MAZYA = "Maz'ya sandwich lambda_p <= gamma_p <= p^p (p-1)^(1-p) lambda_p"
REF_LIMIT_P1 = "lambda_p -> Cheeger constant as p -> 1"
REF_LIMIT_PINF = "lambda_p^(1/p) -> 1/inradius as p -> infinity"
REF_GEOMETRIC = "sharp geometric limit lambda_p^(1/p) V^(1/n) >= w_n^(1/n)"
REF_PROP1 = "capacitary upper bound for lambda_p of the symmetrized domain"
REF_P1 = "sharp p=1 triad: 1-Faber-Krahn / isocapacitary / (1, n/(n-1))-Sobolev"
REF_SOBOLEV = "(p, pn/(n-p))-Sobolev inequality with the sharp constant kappa3"
REF_MOSER = "Moser-Trudinger / (n,0)-capacity-volume inequality"
REF_PGTN = "(p, infinity)-Sobolev and capacity-volume inequalities, p > n"


def check_faber_krahn(d, p, ev=None):
    """Grid (or radial) lambda_p(d) against the shooting value on its Schwarz ball."""
    ev = ev or Evaluator()
    cfg = ev.config
    ctx = _ctx(d, p=p, resolution=cfg.resolution)

    def run():
        lam = ev.lam(d, p)
        star = schwarz_ball(d)
        lam_star = ev.radial(star.n, p, star.radius)
        n = d.dim
        scaled_lhs = lam * d.volume() ** (p / n)
        scaled_rhs = ev.radial(n, p) * unit_ball_volume(n) ** (p / n)
        return [
            CheckReport.make("faber_krahn", REF_FK, lam, lam_star, ">=", cfg.tol("faber_krahn"), ctx),
            CheckReport.make("faber_krahn_scaled", REF_FK_SCALED, scaled_lhs, scaled_rhs, ">=",
                             cfg.tol("faber_krahn_scaled"), ctx),
        ]

    return _guard("faber_krahn", REF_FK, ctx, run)


def check_cheeger_bound(d, p, ev=None):
    """``lambda_p >= (h/p)^p``; at p = 1 the Cheeger constant itself plays lambda_1."""
    ev = ev or Evaluator()
    cfg = ev.config
    ctx = _ctx(d, p=p)

    def run():
        h = cheeger_constant(d)
        if p == 1:
            # lambda_1 of a ball is n/R; otherwise lambda_1 is realised as h
            lam1 = d.n / d.radius if isinstance(d, Ball) else h
            return CheckReport.make("cheeger_p1", REF_CHEEGER_P1, lam1, h, "~", cfg.tol("cheeger_p1"), ctx)
        lam = ev.lam(d, p)
        return CheckReport.make("cheeger_bound", REF_CHEEGER, lam, (h / p) ** p, ">=",
                                cfg.tol("cheeger_bound"), ctx)

    return _guard("cheeger_bound", REF_CHEEGER, ctx, run)


def check_bhattacharya(n, p, ev=None):
    ev = ev or Evaluator()
    ctx = {"n": n, "p": p}
    return _guard("bhattacharya", REF_BHATTACHARYA, ctx, lambda: CheckReport.make(
        "bhattacharya", REF_BHATTACHARYA, ev.radial(n, p), bhattacharya_bound(n, p), ">=",
        ev.config.tol("bhattacharya"), ctx))


def check_mazya_sandwich(d, p, ev=None):
    """Asserted: family minimum >= lambda_p.  Reported: family minimum <= upper sandwich."""
    ev = ev or Evaluator()
    cfg = ev.config
    ctx = _ctx(d, p=p, resolution=cfg.mazya_resolution, family=cfg.family_size)

    def run():
        eig = ev.eig(d, p, cfg.mazya_resolution)
        est = mazya_estimate(d, p, eig, cfg.family_size, opts=ev.opts)
        c = dict(ctx, witness=est.witness, candidates=est.family_size)
        upper = p**p * (p - 1.0) ** (1.0 - p) * eig.lam
        return [
            CheckReport.make("mazya_lower", REF_MAZYA, est.gamma_upper, eig.lam, ">=", cfg.tol("mazya_lower"), c),
            CheckReport.make("mazya_upper", REF_MAZYA, est.gamma_upper, upper, "<=", cfg.tol("mazya_upper"), c,
                             asserted=False),
        ]

    return _guard("mazya_sandwich", REF_MAZYA, ctx, run)


def check_limit_p1(d, ev=None, ps=(2.0, 1.5, 1.25, 1.1)):
    """lambda_p decreases along ``ps`` and lambda_{1.1} is within 15% of h."""
    ev = ev or Evaluator()
    cfg = ev.config
    ctx = _ctx(d, ps=list(ps))

    def run():
        lams = [ev.lam(d, p) for p in ps]
        h = cheeger_constant(d)
        steps = [a - b for a, b in zip(lams, lams[1:])]
        c = dict(ctx, values=lams)
        return [
            CheckReport.make("limit_p1_monotone", REF_LIMIT_P1, min(steps), 0.0, ">=",
                             cfg.tol("limit_p1_monotone"), c),
            CheckReport.make("limit_p1", REF_LIMIT_P1, lams[-1], h, "~", cfg.tol("limit_p1"), c),
        ]

    return _guard("limit_p1", REF_LIMIT_P1, ctx, run)


def check_limit_pinf(d, ev=None, ps=(4.0, 8.0, 16.0, 32.0)):
    """lambda_p^(1/p) at the largest p against 1/inradius, plus the geometric limit inequality."""
    ev = ev or Evaluator()
    cfg = ev.config
    ctx = _ctx(d, ps=list(ps))

    def run():
        roots = [ev.lam(d, p) ** (1.0 / p) for p in ps]
        n = d.dim
        last = roots[-1]
        c = dict(ctx, values=roots)
        return [
            CheckReport.make("limit_pinf", REF_LIMIT_PINF, last, 1.0 / d.inradius(), "~", cfg.tol("limit_pinf"), c),
            CheckReport.make("limit_pinf_geometric", REF_GEOMETRIC, last * d.volume() ** (1.0 / n),
                             unit_ball_volume(n) ** (1.0 / n), ">=", cfg.tol("limit_pinf_geometric"), c),
        ]

    return _guard("limit_pinf", REF_LIMIT_PINF, ctx, run)


# Capacitary upper bounds ---------------------------------------------------------------------

PROP1_CASES = ("p1", "p_in_1n", "pn", "p_gt_n")


def prop1_case(n, p):
    if p == 1:
        return "p1"
    if p < n:
        return "p_in_1n"
    if p == n:
        return "pn"
    return "p_gt_n"


def _prop1_levels(f, levels):
    top = f.sup if isinstance(f, RadialFunction) else f.max_abs()
    dt = top / levels
    t = (np.arange(levels) + 0.5) * dt
    return t, dt


def prop1_bound(case, d, p, f, levels=200, opts=None):
    """Right-hand side of the capacitary upper bound for lambda_p(d*).

    ``f`` is a :class:`RadialFunction` (with ``d`` the matching ball, any
    n; capacities from concentric-ball closed forms) or a GridField on a
    rasterized planar ``d`` (level-set capacities from grid condensers, the
    level set restricted to cells one layer inside the mask).  Integrals in
    ``dt^p`` use the midpoint rule on ``levels`` uniform levels.
    """
    if case not in PROP1_CASES:
        raise InvalidInputError(f"unknown case {case!r}")
    n = d.dim
    if case != prop1_case(n, p):
        raise InvalidInputError(f"case {case!r} does not match n={n}, p={p}")
    radial = isinstance(f, RadialFunction)
    if radial and not (isinstance(d, Ball) and d.n == f.n and abs(d.radius - f.R) <= 1e-12 * f.R):
        raise InvalidInputError("radial test functions need the matching ball")
    if not radial and n != 2:
        raise UnsupportedDomainError("grid evaluation is planar")
    star = schwarz_ball(d)
    r = star.radius
    t, dt = _prop1_levels(f, levels)

    if radial:
        grad = f.grad_integral(p)

        def level_cap(tk, q):
            s = f.level_radius(tk)
            if s <= 0:
                return 0.0
            if q == 1:
                return cap1_convex(Ball(n, s))
            return concentric_capacity(n, q, s, f.R)
    else:
        if case == "p1":
            raise UnsupportedDomainError("the p = 1 bound needs cap_1 of level sets; use a radial test function")
        grad = grad_p_integral(f, p)
        core = f.mask.eroded()

        def level_cap(tk, q):
            cells = superlevel_mask(f, tk).inside & core
            if not cells.any():
                return 0.0
            prob = CondenserProblem(f.mask.with_inside(cells), f.mask, q)
            return condenser_capacity(prob, opts)

    w = unit_ball_volume(n)
    caps = np.array([level_cap(tk, p) for tk in t])
    with np.errstate(divide="ignore", over="ignore"):
        if case == "p1":
            cstar = ball_capacity(n, 1.0, r)[0]
            e = n / (n - 1.0)
            integrand = np.minimum(cstar**e, caps**e)
            num = (n * w ** (1.0 / n)) ** e * grad
            return num / float(np.sum(integrand) * dt)
        weight = p * t ** (p - 1.0) * dt
        if case == "p_in_1n":
            cstar = ball_capacity(n, p, r)[0]
            inv = np.where(caps > 0, caps ** (1.0 / (1.0 - p)), np.inf)
            integrand = (cstar ** (1.0 / (1.0 - p)) + inv) ** (n * (1.0 - p) / (n - p))
            const = (n**n * w**p) ** (1.0 / (n - p)) * ((n - p) / (p - 1.0)) ** (n * (p - 1.0) / (n - p))
            return const * grad / float(np.sum(integrand * weight))
        if case == "pn":
            expo = np.where(caps > 0, np.exp(-(n ** (n / (n - 1.0))) * w ** (1.0 / (n - 1.0))
                                             * np.where(caps > 0, caps, 1.0) ** (1.0 / (1.0 - n))), 0.0)
            return grad / star.volume() / float(np.sum(expo * weight))
        # p > n: capacities are measured against the point capacity of d*
        cstar = ball_capacity(n, p, r)[0]
        inv = np.where(caps > 0, caps ** (1.0 / (1.0 - p)), np.inf)
        diff = np.clip(cstar ** (1.0 / (1.0 - p)) - inv, 0.0, None)
        integrand = diff ** (n * (p - 1.0) / (p - n))
        const = (n**n * w**p) ** (1.0 / (n - p)) * ((p - n) / (p - 1.0)) ** (n * (p - 1.0) / (n - p))
        return const * grad / float(np.sum(integrand * weight))


def check_prop1(d, p, f, ev=None, levels=None, refine=True):
    """lambda_p(d*) from shooting (n/r at p = 1) against the capacitary bound."""
    ev = ev or Evaluator()
    cfg = ev.config
    levels = levels or cfg.prop1_levels
    n = d.dim
    case = prop1_case(n, p)
    label = f.label if isinstance(f, RadialFunction) else "grid field"
    ctx = _ctx(d, n=n, p=p, case=case, item=label, levels=levels)

    def run():
        bound = prop1_bound(case, d, p, f, levels, ev.opts)
        star = schwarz_ball(d)
        lam = n / star.radius if p == 1 else ev.radial(n, p, star.radius)
        out = [CheckReport.make("prop1", REF_PROP1, lam, bound, "<=", cfg.tol("prop1"), ctx)]
        if refine:
            fine = prop1_bound(case, d, p, f, 2 * levels, ev.opts)
            change = abs(fine - bound) / abs(fine)
            out.append(CheckReport.make("prop1_refinement", REF_PROP1, change, 0.005, "<=",
                                        cfg.tol("prop1_refinement"), dict(ctx, refined=fine)))
        return out

    return _guard("prop1", REF_PROP1, ctx, run)


# p = 1 triad --------------------------------------------------------------------------------


def check_sharp_p1_triad(corpus, d, ev=None, probe=True):
    """Sharp p = 1 constants in the plane: Cheeger form, isocapacitary form, Sobolev form."""
    ev = ev or Evaluator()
    cfg = ev.config
    target = 2.0 * math.sqrt(math.pi)
    ctx = _ctx(d)
    out = []
    if d.dim != 2:
        return [CheckReport.errored("p1_faber_krahn", REF_P1, UnsupportedDomainError("planar only"), ctx)]
    vol = d.volume()
    out += _guard("p1_faber_krahn", REF_P1, ctx, lambda: CheckReport.make(
        "p1_faber_krahn", REF_P1, cheeger_constant(d) * math.sqrt(vol), target, ">=",
        cfg.tol("p1_faber_krahn"), ctx))
    if d.is_convex:
        out += _guard("p1_isocapacitary", REF_P1, ctx, lambda: CheckReport.make(
            "p1_isocapacitary", REF_P1, cap1_convex(d) / math.sqrt(vol), target, ">=",
            cfg.tol("p1_isocapacitary"), ctx))
    for label, f in corpus:
        c = dict(ctx, item=label)
        out += _guard("p1_sobolev", REF_P1, c, lambda f=f, c=c: CheckReport.make(
            "p1_sobolev", REF_P1, grad_p_integral(f, 1) / math.sqrt(lp_integral(f, 2)), target, ">=",
            cfg.tol("p1_sobolev"), c))
    if probe:
        c = {"item": "mollified disk indicator", "width": 0.05}

        def near_sharp():
            f = mollified_disk_indicator(0.05, 256)
            ratio = grad_p_integral(f, 1) / math.sqrt(lp_integral(f, 2))
            return CheckReport.make("p1_near_sharp", REF_P1, ratio, target, "<=", cfg.tol("p1_near_sharp"), c)

        out += _guard("p1_near_sharp", REF_P1, c, near_sharp)
    return out


# Sobolev, p < n -------------------------------------------------------------------------------


def radial_sobolev_corpus(n, p):
    return [RadialFunction.talenti(n, p), RadialFunction.tent(n), RadialFunction.bump(n, k=2)]


def check_sobolev_p(corpus, n, p, ev=None):
    """Radial corpus ratios against kappa3 and the kappa3 form of p-Faber-Krahn on B_1."""
    ev = ev or Evaluator()
    cfg = ev.config
    ctx = {"n": n, "p": p}
    if not 1 < p < n:
        return [CheckReport.errored("sobolev_p", REF_SOBOLEV, InvalidInputError("needs 1 < p < n"), ctx)]
    k3 = kappa3(p, n)
    ps = p * n / (n - p)
    out = []
    for f in corpus:
        c = dict(ctx, item=f.label)
        out += _guard("sobolev_p", REF_SOBOLEV, c, lambda f=f, c=c: CheckReport.make(
            "sobolev_p", REF_SOBOLEV, f.grad_integral(p) / f.power_integral(ps) ** ((n - p) / n), k3, ">=",
            cfg.tol("sobolev_p"), c))
    out += _guard("sobolev_p_faber_krahn", REF_SOBOLEV, ctx, lambda: CheckReport.make(
        "sobolev_p_faber_krahn", REF_SOBOLEV, ev.radial(n, p) * unit_ball_volume(n) ** (p / n), k3, ">=",
        cfg.tol("sobolev_p_faber_krahn"), ctx))
    return out


# Moser-Trudinger, p = n = 2 --------------------------------------------------------------------

MT_CONST = 4.0 * math.pi  # (n^n w_n)^(1/(n-1)) at n = 2
EXP_CAP = 700.0


def moser_functional(f):
    """``V^(-1) sum exp(4 pi f^2) h^2`` after scaling f to unit Dirichlet energy.

    Returns ``(functional, lower)`` where ``lower = 4 pi V^(-1) int f^2``.
    """
    g = grad_p_integral(f, 2)
    if g == 0:
        return 1.0, 0.0
    v = f.inside_values() / math.sqrt(g)
    expo = MT_CONST * v * v
    if expo.max() > EXP_CAP:
        raise InvalidInputError(f"corpus function too concentrated: exponent {expo.max():.3g} exceeds {EXP_CAP}")
    h2 = f.mask.h ** 2
    vol = f.mask.area
    return float(np.sum(np.exp(expo)) * h2 / vol), float(MT_CONST * np.sum(v * v) * h2 / vol)


def check_moser_concentric(pairs, ev=None):
    """Analytic equality ``V(B_rho)/V(B_R) = exp(-4 pi / cap_2(B_rho; B_R))``."""
    ev = ev or Evaluator()
    out = []
    for rho, R in pairs:
        c = {"rho": rho, "R": R, "n": 2}
        cap = concentric_capacity(2, 2.0, rho, R)
        out.append(CheckReport.make("moser_concentric", REF_MOSER, (rho / R) ** 2, math.exp(-(MT_CONST / cap)),
                                    "~", ev.config.tol("moser_concentric"), c))
    return out


class _Homothetic:
    """The planar set ``c + s (d - c)``."""

    dim = 2

    def __init__(self, d, s, c):
        self.d, self.s, self.c = d, s, c

    def contains(self, x, y):
        cx, cy = self.c
        return self.d.contains(cx + (np.asarray(x) - cx) / self.s, cy + (np.asarray(y) - cy) / self.s)


def check_moser_trudinger(d, corpus, ev=None, shrink=(0.4, 0.6, 0.8)):
    """(a) functional bounds per corpus field, (b) capacity-volume on grid condensers,
    (c) reported n-Faber-Krahn quantity with the corpus estimate of the supremum."""
    ev = ev or Evaluator()
    cfg = ev.config
    ctx = _ctx(d, p=2)
    if d.dim != 2:
        return [CheckReport.errored("moser_functional", REF_MOSER, UnsupportedDomainError("planar only"), ctx)]
    out = []
    best = 1.0
    for label, f in corpus:
        c = dict(ctx, item=label)

        def one(f=f, c=c):
            nonlocal best
            val, lower = moser_functional(f)
            best = max(best, val)
            return CheckReport.make("moser_functional", REF_MOSER, val, lower, ">=", cfg.tol("moser_functional"), c)

        out += _guard("moser_functional", REF_MOSER, c, one)

    mask = ev.mask(d)
    cx, cy = d.incenter()[:2]
    x, y = mask.centers()
    core = mask.eroded()
    for s in shrink:
        c = dict(ctx, item=f"copy shrunk by {s:g}")

        def grid_cv(s=s, c=c):
            try:
                # the exact copy: boundary fractions on both sides, volume ratio s^2
                inner = _Homothetic(d, s, (cx, cy))
                cap = condenser_capacity(CondenserProblem(inner, mask, 2.0), ev.opts)
                ratio = s * s
            except InvalidCondenserError:
                # the copy leaves the domain (nonconvex d): use its cells in the core
                cells = np.asarray(inner.contains(x, y), dtype=bool) & core
                cap = condenser_capacity(CondenserProblem(mask.with_inside(cells), mask, 2.0), ev.opts)
                ratio = cells.sum() / mask.count
            return CheckReport.make("moser_grid", REF_MOSER, ratio, math.exp(-(MT_CONST / cap)), "<=",
                                    cfg.tol("moser_grid"), c)

        out += _guard("moser_grid", REF_MOSER, c, grid_cv)

    def faber_krahn_n():
        lam = ev.lam(d, 2.0)
        value = lam * d.volume() * best / MT_CONST
        return CheckReport.make("moser_faber_krahn", REF_MOSER, value, 1.0, ">=", cfg.tol("moser_faber_krahn"),
                                dict(ctx, corpus_sup=best), asserted=False)

    out += _guard("moser_faber_krahn", REF_MOSER, ctx, faber_krahn_n)
    return out


# p > n ---------------------------------------------------------------------------------------------


def check_p_gt_n(d, p, corpus, ev=None, shrink=(0.25, 0.5, 0.75)):
    """Point-capacity constant and the three p > n inequalities in the plane."""
    ev = ev or Evaluator()
    cfg = ev.config
    ctx = _ctx(d, p=p)
    n = d.dim
    if not (n == 2 and p > n):
        return [CheckReport.errored("p_gt_n", REF_PGTN, InvalidInputError("needs planar d and p > 2"), ctx)]

    def run():
        vol = d.volume()
        if isinstance(d, Ball):
            e_hat = point_capacity_constant(n, p)
        else:
            e_hat = vol ** ((p - n) / n) * point_capacity(d, p, resolutions=cfg.point_resolutions, opts=ev.opts)
        c = dict(ctx, E=e_hat)
        out = [CheckReport.make("p_gt_n_faber_krahn", REF_PGTN, ev.lam(d, p) * vol ** (p / n), e_hat, ">=",
                                cfg.tol("p_gt_n_faber_krahn"), c)]
        mask = ev.mask(d)
        x, y = mask.centers()
        cx, cy = d.incenter()[:2]
        core = mask.eroded()
        scale = vol ** ((p - n) / n)
        for s in shrink:
            cells = np.asarray(d.contains(cx + (x - cx) / s, cy + (y - cy) / s), dtype=bool) & core
            if not cells.any():
                continue
            cap = condenser_capacity(CondenserProblem(mask.with_inside(cells), mask, p), ev.opts)
            out.append(CheckReport.make("p_gt_n_capacity", REF_PGTN, cap * scale, e_hat, ">=",
                                        cfg.tol("p_gt_n_capacity"), dict(c, item=f"copy shrunk by {s:g}")))
        for label, f in corpus:
            if f.max_abs() == 0:
                continue
            ratio = grad_p_integral(f, p) / f.max_abs() ** p * scale
            out.append(CheckReport.make("p_gt_n_sobolev", REF_PGTN, ratio, e_hat, ">=",
                                        cfg.tol("p_gt_n_sobolev"), dict(c, item=label)))
        return out

    return _guard("p_gt_n", REF_PGTN, ctx, run)


# Suite runner -----------------------------------------------------------------------------------

MOSER_PAIRS = ((0.5, 1.0), (0.1, 1.0), (0.25, 2.0), (0.9, 1.0), (1.0, 3.0),
               (0.01, 0.5), (2.0, 5.0), (0.3, 0.31), (1e-3, 10.0), (0.7, 7.0))


def _domain_task(d, cfg):
    ev = Evaluator(cfg)
    out = check_cheeger_bound(d, 1.0, ev)
    if d.dim == 2:
        corpus = default_corpus(ev.mask(d))
        out += check_sharp_p1_triad(corpus, d, ev, probe=False)
        out += check_moser_trudinger(d, corpus, ev)
    if cfg.limits:
        out += check_limit_p1(d, ev)
        out += check_limit_pinf(d, ev)
    return out


def _pair_task(d, p, cfg):
    ev = Evaluator(cfg)
    out = check_faber_krahn(d, p, ev)
    out += check_cheeger_bound(d, p, ev)
    if d.dim == 2:
        out += check_mazya_sandwich(d, p, ev)
        if p > 2:
            out += check_p_gt_n(d, p, default_corpus(ev.mask(d)), ev)
    return out


def _p_task(p, cfg):
    ev = Evaluator(cfg)
    out = []
    for n in (2, 3):
        out += check_bhattacharya(n, p, ev)
    for n in (2, 3):
        out += check_prop1(Ball(n), p, RadialFunction.tent(n), ev)
        if p < n:
            out += check_sobolev_p(radial_sobolev_corpus(n, p), n, p, ev)
    return out


def _constants_task(cfg):
    ev = Evaluator(cfg)
    out = check_moser_concentric(MOSER_PAIRS, ev)
    for n in (2, 3):
        out += check_prop1(Ball(n), 1.0, RadialFunction.tent(n), ev)
    out += check_sharp_p1_triad([], Ball(2), ev, probe=True)[-1:]
    return out


def _run_task(task):
    kind, args, cfg = task
    if kind == "constants":
        return _constants_task(cfg)
    if kind == "domain":
        return _domain_task(args[0], cfg)
    if kind == "pair":
        return _pair_task(args[0], args[1], cfg)
    return _p_task(args[0], cfg)


def fingerprint(catalog, p_list, cfg):
    doc = {
        "catalog": [domain_to_record(d) for d in catalog],
        "p_list": [float(p) for p in p_list],
        "config": cfg.to_record(),
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def run_suite(catalog, p_list, config=None):
    """Every applicable check over ``catalog x p_list``, merged in task order.

    Tasks run in worker processes when ``config.jobs > 1``; the report order
    and content do not depend on the number of workers.
    """
    cfg = config or VerifyConfig()
    catalog = list(catalog)
    p_list = [float(p) for p in p_list]
    if not catalog:
        raise InvalidInputError("catalog must contain at least one domain")
    for p in p_list:
        if not p > 1:
            raise InvalidInputError(f"p-list entries must exceed 1, got {p}")
    tasks = []
    if p_list:
        tasks.append(("constants", (), cfg))
        for d in catalog:
            tasks.append(("domain", (d,), cfg))
            tasks += [("pair", (d, p), cfg) for p in p_list]
        tasks += [("p", (p,), cfg) for p in p_list]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    reports = tuple(r for chunk in chunks for r in chunk)
    record = dict(cfg.to_record(), catalog=[domain_to_record(d) for d in catalog], p_list=p_list)
    return CheckSuite(reports, fingerprint(catalog, p_list, cfg), record)
