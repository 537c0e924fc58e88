"""Variational p-capacities, the Cheeger constant and the Maz'ya constant.

Closed forms cover concentric balls; ``condenser_capacity`` minimises the
discrete p-energy over grid fields equal to 1 on the inner set and 0
outside the outer set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely

from ._descent import EnergyMinimizer
from .discretize import GridMask, PEnergy, _boundary_fractions, rasterize
from .errors import (
    InvalidCondenserError,
    InvalidDimensionError,
    InvalidExponentError,
    InvalidInputError,
    SolverError,
    UnsupportedDomainError,
)
from .geometry import Annulus, Ball, Polygon, Rectangle, unit_ball_volume
from .spectral import SolverOptions

__all__ = [
    "ball_capacity",
    "concentric_capacity",
    "CondenserProblem",
    "CondenserResult",
    "solve_condenser",
    "condenser_capacity",
    "point_capacity",
    "extrapolate_to_p1",
    "cap1_convex",
    "cheeger_constant",
    "MazyaEstimate",
    "mazya_estimate",
]

DEFAULT_RESOLUTION = 128


def _check_n(n):
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise InvalidDimensionError(f"n must be an integer >= 2, got {n!r}")
    return int(n)


def _check_p(p, allow_one=True):
    lo_ok = p >= 1 if allow_one else p > 1
    if not np.isfinite(p) or not lo_ok:
        bound = ">= 1" if allow_one else "> 1"
        raise InvalidExponentError(f"p must be {bound}, got {p!r}")
    return float(p)


# Closed forms ----------------------------------------------------------------


def ball_capacity(n, p, r):
    """Capacity attached to a ball of radius ``r`` in ``R^n``, tagged by case.

    Returns ``(value, case)``:

    * ``"p<n"``: ``cap_p(closed B_r; R^n) = n w_n ((n-p)/(p-1))^(p-1) r^(n-p)``,
      with ``(p-1)^(p-1) = 1`` at ``p = 1`` (so the value is the perimeter);
    * ``"p=n"``: the whole-space capacity, which is 0;
    * ``"p>n"``: the capacity of the centre point relative to ``B_r``,
      ``n w_n ((p-n)/(p-1))^(p-1) r^(n-p)``.
    """
    n = _check_n(n)
    p = _check_p(p)
    if not r > 0:
        raise InvalidInputError(f"radius must be positive, got {r!r}")
    area = n * unit_ball_volume(n)
    if p < n:
        if p == 1.0:
            return area * r ** (n - 1), "p<n"
        return area * ((n - p) / (p - 1.0)) ** (p - 1.0) * r ** (n - p), "p<n"
    if p == n:
        return 0.0, "p=n"
    return area * ((p - n) / (p - 1.0)) ** (p - 1.0) * r ** (n - p), "p>n"


def concentric_capacity(n, p, s, R):
    """``cap_p(closed B_s; B_R)`` for concentric balls, ``0 <= s < R``.

    ``s = 0`` is the centre point (positive only for ``p > n``).
    """
    n = _check_n(n)
    p = _check_p(p)
    if not 0 <= s < R:
        raise InvalidInputError(f"need 0 <= s < R, got s={s!r}, R={R!r}")
    area = n * unit_ball_volume(n)
    if p == 1.0:
        return area * s ** (n - 1)
    if s == 0 and p <= n:
        return 0.0
    if p == n:
        return area * math.log(R / s) ** (1.0 - n)
    alpha = (p - n) / (p - 1.0)
    gap = abs((p - 1.0) / (p - n)) * abs(R**alpha - s**alpha)
    return area * gap ** (1.0 - p)


# Grid condenser ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CondenserProblem:
    """``cap_p(K; O)``: minimise the p-energy over fields 1 on K, 0 off O.

    ``inner`` and ``outer`` are each a GridMask or a planar domain.  Domains
    are rasterized on the outer grid (``resolution`` applies when the outer
    set is a domain); parametric boundaries carry boundary fractions.
    """

    inner: object
    outer: object
    p: float
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        object.__setattr__(self, "p", _check_p(self.p))

    def discretize(self):
        """Return ``(mask, inner_cells)`` with boundary fractions merged into ``mask``."""
        outer = self.outer
        if not isinstance(outer, GridMask):
            outer = rasterize(outer, self.resolution)
        inner = self.inner
        tx, ty = outer.theta_x, outer.theta_y
        if isinstance(inner, GridMask):
            if not inner.same_grid(outer):
                raise InvalidCondenserError("inner and outer masks live on different grids")
            cells = inner.inside.copy()
        else:
            if inner.dim != 2:
                raise InvalidDimensionError("grid condensers are planar")
            x, y = outer.centers()
            cells = np.asarray(inner.contains(x, y), dtype=bool)
            if cells.any():
                # fractions on the inner boundary, measured from the free side
                free_side = _Complement(inner)
                ix = _boundary_fractions(free_side, x, y, ~cells, axis=0, h=outer.h)
                iy = _boundary_fractions(free_side, x, y, ~cells, axis=1, h=outer.h)
                tx = ix if tx is None else np.minimum(tx, ix)
                ty = iy if ty is None else np.minimum(ty, iy)
        if not cells.any():
            raise InvalidCondenserError("inner set contains no grid cell")
        if np.any(cells & ~outer.eroded()):
            raise InvalidCondenserError("inner set must lie inside the outer set with one cell layer to spare")
        mask = GridMask(outer.origin, outer.h, outer.inside, tx, ty)
        return mask, cells


class _Complement:
    def __init__(self, d):
        self.d = d

    def contains(self, x, y):
        return ~np.asarray(self.d.contains(x, y), dtype=bool)


@dataclass(frozen=True, eq=False)
class CondenserResult:
    value: float
    potential: np.ndarray
    mask: GridMask
    inner: np.ndarray
    iterations: int
    converged: bool


def solve_condenser(prob, opts=None):
    """Minimal discrete p-energy for the condenser, with the minimising potential."""
    opts = opts or SolverOptions()
    p = prob.p
    if p <= 1:
        raise InvalidExponentError("grid condensers need p > 1; use cap1_convex or extrapolate_to_p1")
    mask, inner = prob.discretize()
    free = mask.inside & ~inner
    u0 = inner.astype(float)
    iterations = 0
    if p != 2.0:
        # the harmonic potential is a smooth, feasible warm start
        warm = EnergyMinimizer(PEnergy(mask, 2.0), free).minimize(
            u0, lower=0.0, upper=1.0, tol=opts.inner_tolerance, max_iter=opts.inner_max_iterations
        )
        u0 = warm.u
        iterations += warm.iterations
    energy = PEnergy(mask, p)
    res = EnergyMinimizer(energy, free).minimize(
        u0, lower=0.0, upper=1.0, tol=opts.inner_tolerance, max_iter=opts.inner_max_iterations
    )
    value = energy.value(res.u)
    return CondenserResult(value, res.u, mask, inner, iterations + res.iterations, res.converged)


def condenser_capacity(prob, opts=None):
    """Discrete ``cap_p(K; O)`` as a float (see ``solve_condenser`` for diagnostics)."""
    return solve_condenser(prob, opts).value


def point_capacity(d, p, point=None, resolutions=(128, 256), opts=None):
    """Capacity of a point relative to a planar domain, for ``p > 2``.

    The point is realised as the single grid cell containing it (default: the
    incenter).  That construction converges like ``h^alpha`` with
    ``alpha = (p-2)/(p-1)``, because a cell behaves like a small disk of
    radius proportional to ``h``; the two resolutions are combined by
    Richardson extrapolation of ``cap^(1/(1-p))``, which is affine in
    ``h^alpha`` for a small disk.  A single resolution returns the raw value.
    """
    p = _check_p(p)
    if d.dim != 2:
        raise InvalidDimensionError("point capacities are computed on planar grids")
    if p <= 2:
        raise InvalidExponentError("points have positive p-capacity in the plane only for p > 2")
    point = d.incenter() if point is None else point
    values, steps = [], []
    for res in resolutions:
        outer = rasterize(d, res)
        ix = int(np.floor((point[0] - outer.origin[0]) / outer.h))
        iy = int(np.floor((point[1] - outer.origin[1]) / outer.h))
        cell = np.zeros(outer.shape, dtype=bool)
        cell[ix, iy] = True
        prob = CondenserProblem(outer.with_inside(cell), outer, p)
        values.append(condenser_capacity(prob, opts))
        steps.append(outer.h)
    if len(values) == 1:
        return values[0]
    alpha = (p - 2.0) / (p - 1.0)
    (x1, x2), (s1, s2) = [v ** (1.0 / (1.0 - p)) for v in values[-2:]], [h**alpha for h in steps[-2:]]
    x0 = (x1 * s2 - x2 * s1) / (s2 - s1)
    return x0 ** (1.0 - p)


def extrapolate_to_p1(ps, values):
    """Polynomial extrapolation in ``p - 1`` of capacity values to ``p = 1``."""
    ps = np.asarray(ps, dtype=float)
    values = np.asarray(values, dtype=float)
    if ps.size != values.size or ps.size < 2:
        raise InvalidInputError("need at least two (p, value) pairs")
    coef = np.polyfit(ps - 1.0, values, ps.size - 1)
    return float(np.polyval(coef, 0.0))


# p = 1 and the Cheeger constant -------------------------------------------------


def cap1_convex(K):
    """``cap_1(K; R^n)`` of a convex body: its perimeter."""
    if not K.is_convex:
        raise UnsupportedDomainError("cap1_convex needs a convex set; extrapolate grid capacities instead")
    return K.perimeter()


def _shape(d, quad_segs=256):
    if isinstance(d, Polygon):
        return d.shape
    if isinstance(d, Rectangle):
        return d.to_polygon().shape
    if isinstance(d, Ball):
        return shapely.Point(d.center[:2]).buffer(d.radius, quad_segs=quad_segs)
    if isinstance(d, Annulus):
        c = shapely.Point(d.center[:2])
        return c.buffer(d.R, quad_segs=quad_segs).difference(c.buffer(d.rho, quad_segs=quad_segs))
    raise UnsupportedDomainError(f"no planar shape for {type(d).__name__}")


def _bisect(f, lo, hi, tol=1e-14, max_iter=200):
    flo = f(lo)
    if flo * f(hi) > 0:
        raise SolverError("bisection bracket does not contain a sign change", diagnostic=(lo, hi))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def cheeger_constant(d):
    """Cheeger constant ``h(d) = inf A(boundary S)/V(S)`` over subsets S of d.

    * balls: ``n / R``;
    * convex planar domains: ``1/t`` where the inner parallel body at distance
      ``t`` has area ``pi t^2``;
    * other planar domains: the best perimeter/area ratio over openings of
      the domain by disks and over its inner parallel sets.
    """
    if isinstance(d, Ball):
        return d.n / d.radius
    if d.dim != 2:
        raise UnsupportedDomainError("Cheeger constants beyond balls are computed in the plane only")
    r_in = d.inradius()
    if isinstance(d, Rectangle):
        def excess(t):
            return (d.a - 2 * t) * (d.b - 2 * t) - math.pi * t * t
    elif d.is_convex:
        shape = _shape(d)

        def excess(t):
            return shapely.area(shape.buffer(-t, join_style="mitre", mitre_limit=1e6)) - math.pi * t * t
    else:
        return _cheeger_openings(d)
    return 1.0 / _bisect(excess, 0.0, r_in)


def _cheeger_openings(d, samples=64):
    shape = _shape(d)
    r_in = d.inradius()
    best = shapely.length(shape) / shapely.area(shape)

    def ratio(s, opening):
        body = shape.buffer(-s, quad_segs=64)
        if opening:
            body = body.buffer(s, quad_segs=64)
        a = shapely.area(body)
        return shapely.length(body) / a if a > 0 else math.inf

    for opening in (True, False):
        grid = np.linspace(0.0, r_in, samples + 1)[1:-1]
        vals = [ratio(s, opening) for s in grid]
        k = int(np.argmin(vals))
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        # golden-section refinement around the best sample
        g = (math.sqrt(5) - 1) / 2
        for _ in range(60):
            a = hi - g * (hi - lo)
            b = lo + g * (hi - lo)
            if ratio(a, opening) < ratio(b, opening):
                hi = b
            else:
                lo = a
        best = min(best, vals[k], ratio(0.5 * (lo + hi), opening))
    return best


# Maz'ya constant -----------------------------------------------------------------


@dataclass(frozen=True)
class MazyaEstimate:
    """Best ``cap_p(closed S; domain) / V(S)`` over a finite candidate family."""

    gamma_upper: float
    witness: str
    family_size: int
    ratios: tuple = ()


def mazya_estimate(d, p, eig, family_size=20, shrink_factors=(0.3, 0.5, 0.7, 0.85), opts=None):
    """Upper estimate of the Maz'ya constant from a family of candidate sets.

    Candidates are superlevel sets of the eigenfunction ``eig`` at
    ``family_size`` quantile thresholds and copies of ``d`` shrunk about its
    incenter.  Each is intersected with the cells at least one layer inside
    the mask so the condenser is well separated; empty candidates are
    skipped.  Every ratio is computed with the same discrete energy as the
    eigenvalue, so each one is at least the discrete eigenvalue.
    """
    p = _check_p(p, allow_one=False)
    if family_size < 1:
        raise InvalidInputError("family_size must be >= 1")
    field = eig.eigenfunction
    mask = field.mask
    core = mask.eroded()
    h2 = mask.h**2
    values = field.values
    inside_vals = values[mask.inside]
    candidates = []
    qs = np.arange(1, family_size + 1) / (family_size + 1)
    for q, t in zip(qs, np.quantile(inside_vals, qs)):
        candidates.append((f"superlevel set at quantile {q:.3f} (t={t:.6g})", (values >= t) & core))
    x, y = mask.centers()
    cx, cy = d.incenter()[:2]
    for c in shrink_factors:
        cells = np.asarray(d.contains(cx + (x - cx) / c, cy + (y - cy) / c), dtype=bool) & core
        candidates.append((f"copy shrunk by {c:g} about the incenter", cells))

    best, witness, ratios = math.inf, "", []
    seen = set()
    for label, cells in candidates:
        key = cells.tobytes()
        if not cells.any() or key in seen:
            continue
        seen.add(key)
        cap = condenser_capacity(CondenserProblem(mask.with_inside(cells), mask, p), opts)
        ratio = cap / (cells.sum() * h2)
        ratios.append(ratio)
        if ratio < best:
            best, witness = ratio, label
    if not ratios:
        raise SolverError("no nonempty candidate set for the Maz'ya estimate")
    return MazyaEstimate(best, witness, len(ratios), tuple(ratios))
