"""Parametric domains and their geometric functionals.

Four immutable domain types are provided: :class:`Ball` (any dimension),
:class:`Rectangle` and :class:`Polygon` (planar) and :class:`Annulus` (any
dimension).  Every type answers ``volume``, ``perimeter`` and ``inradius``;
the planar ones (and 2D balls/annuli) also answer point-membership queries
used by the rasterizer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import shapely
from scipy.optimize import minimize

from .errors import InvalidDimensionError, InvalidDomainError, InvalidInputError

__all__ = [
    "Ball",
    "Rectangle",
    "Polygon",
    "Annulus",
    "unit_ball_volume",
    "volume",
    "perimeter",
    "inradius",
    "incenter",
    "schwarz_ball",
    "isoperimetric_constant",
    "isoperimetric_ratio",
    "domain_from_record",
    "domain_to_record",
]


def unit_ball_volume(n):
    """Volume of the unit ball in R^n, ``pi^(n/2) / Gamma(n/2 + 1)``."""
    if isinstance(n, bool) or int(n) != n or n <= 0:
        raise InvalidDimensionError(f"dimension must be a positive integer, got {n!r}")
    n = int(n)
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def isoperimetric_constant(n):
    """Sharp constant ``n * omega_n^(1/n)`` of the isoperimetric inequality."""
    return n * unit_ball_volume(n) ** (1.0 / n)


def _check_dim(n):
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise InvalidDimensionError(f"domain dimension must be an integer >= 2, got {n!r}")
    return int(n)


def _positive(name, value):
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise InvalidDomainError(f"{name} must be a positive finite number, got {value!r}")
    return value


def _center(center, n):
    if center is None:
        return (0.0,) * n
    center = tuple(float(c) for c in center)
    if len(center) != n:
        raise InvalidDomainError(f"center has {len(center)} coordinates, expected {n}")
    return center


@dataclass(frozen=True)
class Ball:
    n: int = 2
    radius: float = 1.0
    center: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "n", _check_dim(self.n))
        object.__setattr__(self, "radius", _positive("radius", self.radius))
        object.__setattr__(self, "center", _center(self.center, self.n))

    @property
    def dim(self):
        return self.n

    is_convex = True

    def volume(self):
        return unit_ball_volume(self.n) * self.radius**self.n

    def perimeter(self):
        return self.n * unit_ball_volume(self.n) * self.radius ** (self.n - 1)

    def inradius(self):
        return self.radius

    def incenter(self):
        return self.center

    def bounds(self):
        cx, cy = self.center[:2]
        r = self.radius
        return (cx - r, cy - r, cx + r, cy + r)

    def contains(self, x, y):
        cx, cy = self.center[:2]
        return (np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2 < self.radius**2

    def scaled(self, c):
        c = _positive("scale factor", c)
        return Ball(self.n, self.radius * c, tuple(c * x for x in self.center))


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned ``a x b`` rectangle centred at ``center``."""

    a: float = 1.0
    b: float = 1.0
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "a", _positive("side a", self.a))
        object.__setattr__(self, "b", _positive("side b", self.b))
        object.__setattr__(self, "center", _center(self.center, 2))

    n = 2
    dim = 2
    is_convex = True

    def volume(self):
        return self.a * self.b

    def perimeter(self):
        return 2 * (self.a + self.b)

    def inradius(self):
        return 0.5 * min(self.a, self.b)

    def incenter(self):
        return self.center

    def bounds(self):
        cx, cy = self.center
        return (cx - self.a / 2, cy - self.b / 2, cx + self.a / 2, cy + self.b / 2)

    def contains(self, x, y):
        cx, cy = self.center
        return (np.abs(np.asarray(x) - cx) < self.a / 2) & (np.abs(np.asarray(y) - cy) < self.b / 2)

    def scaled(self, c):
        c = _positive("scale factor", c)
        return Rectangle(self.a * c, self.b * c, tuple(c * x for x in self.center))

    def to_polygon(self):
        x0, y0, x1, y1 = self.bounds()
        return Polygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


@dataclass(frozen=True)
class Polygon:
    """Simple planar polygon with counterclockwise vertices."""

    vertices: tuple

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise InvalidDomainError("a polygon needs at least three vertices")
        object.__setattr__(self, "vertices", verts)
        shape = shapely.Polygon(verts)
        if not np.all(np.isfinite(verts)):
            raise InvalidDomainError("polygon vertices must be finite")
        if shape.area <= 0:
            raise InvalidDomainError("degenerate polygon (zero area)")
        if not shape.is_valid or not shape.exterior.is_simple:
            raise InvalidDomainError("polygon is not simple")
        if _signed_area(verts) <= 0:
            raise InvalidDomainError("polygon vertices must be counterclockwise")

    n = 2
    dim = 2

    @cached_property
    def shape(self):
        return shapely.Polygon(self.vertices)

    @cached_property
    def is_convex(self):
        return self.shape.convex_hull.area - self.shape.area <= 1e-12 * self.shape.area

    def volume(self):
        return _signed_area(self.vertices)

    def perimeter(self):
        v = np.asarray(self.vertices)
        return float(np.sum(np.hypot(*(np.roll(v, -1, axis=0) - v).T)))

    def inradius(self):
        return self._incircle[0]

    def incenter(self):
        return self._incircle[1]

    @cached_property
    def _incircle(self):
        return _polygon_incircle(self)

    def bounds(self):
        return tuple(float(b) for b in self.shape.bounds)

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return shapely.contains_xy(self.shape, x, y)

    def boundary_distance(self, pts):
        """Euclidean distance from each point in ``pts`` (shape (k, 2)) to the boundary."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        a = np.asarray(self.vertices)
        b = np.roll(a, -1, axis=0)
        ab = b - a
        ap = pts[:, None, :] - a[None, :, :]
        t = np.clip(np.sum(ap * ab, axis=2) / np.sum(ab * ab, axis=1), 0.0, 1.0)
        closest = a[None] + t[..., None] * ab[None]
        return np.min(np.linalg.norm(pts[:, None, :] - closest, axis=2), axis=1)

    def scaled(self, c):
        c = _positive("scale factor", c)
        return Polygon(tuple((c * x, c * y) for x, y in self.vertices))


@dataclass(frozen=True)
class Annulus:
    rho: float = 0.5
    R: float = 1.0
    n: int = 2
    center: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "n", _check_dim(self.n))
        rho = _positive("inner radius", self.rho)
        R = _positive("outer radius", self.R)
        if rho >= R:
            raise InvalidDomainError(f"annulus needs inner radius < outer radius, got {rho} >= {R}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "center", _center(self.center, self.n))

    @property
    def dim(self):
        return self.n

    is_convex = False

    def volume(self):
        return unit_ball_volume(self.n) * (self.R**self.n - self.rho**self.n)

    def perimeter(self):
        return self.n * unit_ball_volume(self.n) * (self.R ** (self.n - 1) + self.rho ** (self.n - 1))

    def inradius(self):
        return 0.5 * (self.R - self.rho)

    def incenter(self):
        c = list(self.center)
        c[0] += 0.5 * (self.R + self.rho)
        return tuple(c)

    def bounds(self):
        cx, cy = self.center[:2]
        return (cx - self.R, cy - self.R, cx + self.R, cy + self.R)

    def contains(self, x, y):
        cx, cy = self.center[:2]
        r2 = (np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2
        return (r2 > self.rho**2) & (r2 < self.R**2)

    def scaled(self, c):
        c = _positive("scale factor", c)
        return Annulus(self.rho * c, self.R * c, self.n, tuple(c * x for x in self.center))


def _signed_area(verts):
    v = np.asarray(verts, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _polygon_incircle(poly, resolution=256, candidates=8):
    # Coarse maximum of the grid distance transform, then local refinement of
    # the exact boundary distance from the best few cells.
    from .discretize import distance_transform, rasterize

    mask = rasterize(poly, resolution)
    dist = distance_transform(mask).values
    xs, ys = mask.centers()
    order = np.argsort(dist, axis=None)[::-1][:candidates]

    def neg_clearance(pt):
        d = poly.boundary_distance(pt)[0]
        return -d if poly.contains(pt[0], pt[1]) else d

    best_r, best_c = 0.0, None
    for flat in order:
        start = np.array([xs.flat[flat], ys.flat[flat]])
        res = minimize(
            neg_clearance,
            start,
            method="Nelder-Mead",
            options={"xatol": 1e-10 * mask.h * resolution, "fatol": 1e-13, "maxiter": 4000},
        )
        if -res.fun > best_r:
            best_r, best_c = -res.fun, (float(res.x[0]), float(res.x[1]))
    return float(best_r), best_c


# Functional front-ends -----------------------------------------------------


def volume(d):
    return d.volume()


def perimeter(d):
    return d.perimeter()


def inradius(d):
    return d.inradius()


def incenter(d):
    return d.incenter()


def isoperimetric_ratio(d):
    """``perimeter / volume^((n-1)/n)``; never below :func:`isoperimetric_constant`."""
    n = d.dim
    return d.perimeter() / d.volume() ** ((n - 1) / n)


def schwarz_ball(d):
    """Ball centred at the origin with the same dimension and volume as ``d``."""
    n = d.dim
    return Ball(n, (d.volume() / unit_ball_volume(n)) ** (1.0 / n))


# Structured-text records ---------------------------------------------------
#
#   {"type": "ball", "n": 2, "r": 1.0, "center": [0, 0]}
#   {"type": "rectangle", "a": 2.0, "b": 1.0, "center": [0, 0]}
#   {"type": "polygon", "vertices": [[0, 0], [1, 0], [0, 1]]}
#   {"type": "annulus", "n": 2, "rho": 0.5, "R": 1.0, "center": [0, 0]}
#
# "center" is optional everywhere and defaults to the origin.

_FIELDS = {
    "ball": {"type", "n", "r", "center"},
    "rectangle": {"type", "a", "b", "center"},
    "polygon": {"type", "vertices"},
    "annulus": {"type", "n", "rho", "R", "center"},
}


def domain_from_record(rec):
    if not isinstance(rec, dict) or "type" not in rec:
        raise InvalidDomainError(f"domain record must be an object with a 'type' field, got {rec!r}")
    kind = str(rec["type"]).lower()
    if kind not in _FIELDS:
        raise InvalidDomainError(f"unknown domain type {rec['type']!r}")
    extra = set(rec) - _FIELDS[kind]
    if extra:
        raise InvalidDomainError(f"unexpected fields for {kind}: {sorted(extra)}")
    try:
        if kind == "ball":
            return Ball(rec.get("n", 2), rec["r"], rec.get("center"))
        if kind == "rectangle":
            return Rectangle(rec["a"], rec["b"], rec.get("center", (0.0, 0.0)))
        if kind == "polygon":
            return Polygon(tuple(tuple(v) for v in rec["vertices"]))
        return Annulus(rec["rho"], rec["R"], rec.get("n", 2), rec.get("center"))
    except KeyError as exc:
        raise InvalidDomainError(f"{kind} record is missing field {exc.args[0]!r}") from None
    except InvalidInputError:
        raise
    except (TypeError, ValueError) as exc:
        raise InvalidDomainError(f"malformed {kind} record: {exc}") from None


def domain_to_record(d):
    if isinstance(d, Ball):
        return {"type": "ball", "n": d.n, "r": d.radius, "center": list(d.center)}
    if isinstance(d, Rectangle):
        return {"type": "rectangle", "a": d.a, "b": d.b, "center": list(d.center)}
    if isinstance(d, Polygon):
        return {"type": "polygon", "vertices": [list(v) for v in d.vertices]}
    if isinstance(d, Annulus):
        return {"type": "annulus", "n": d.n, "rho": d.rho, "R": d.R, "center": list(d.center)}
    raise TypeError(f"not a domain: {d!r}")
