"""Principal p-Laplacian eigenvalues.

``eigen_grid`` runs a nonlinear inverse iteration on a rasterized planar
domain; ``eigen_radial_shoot`` solves the radial ODE on a ball of any
dimension by shooting.  Special functions live in :mod:`pfk.special` and
are re-exported here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from ._descent import EnergyMinimizer
from .discretize import GridField, PEnergy, grad_p_integral, lp_integral
from .errors import InvalidDimensionError, InvalidExponentError, InvalidInputError, SolverError
from .special import bessel_zero, gamma_fn

__all__ = [
    "SolverOptions",
    "EigenResult",
    "RadialProfile",
    "eigen_grid",
    "eigen_radial_shoot",
    "rayleigh_quotient",
    "bessel_zero",
    "gamma_fn",
]


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-6
    max_iterations: int = 500
    inner_tolerance: float = 1e-12
    inner_max_iterations: int = 60
    seed: int | None = None

    def __post_init__(self):
        if not self.tolerance > 0 or not self.inner_tolerance > 0:
            raise InvalidInputError("solver tolerances must be positive")
        if self.max_iterations < 1 or self.inner_max_iterations < 1:
            raise InvalidInputError("iteration caps must be >= 1")


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Samples of a radial eigenfunction ``u(r)`` on ``[0, R]`` in dimension ``n``.

    ``grad_integral`` and ``lp_integral`` are ``int |u'|^p dV`` and
    ``int |u|^p dV`` accumulated alongside the ODE.
    """

    n: int
    p: float
    r: np.ndarray
    u: np.ndarray
    grad_integral: float
    lp_integral: float


@dataclass(frozen=True, eq=False)
class EigenResult:
    lam: float
    eigenfunction: GridField | RadialProfile
    iterations: int
    residual: float
    converged: bool
    history: tuple = field(default=(), repr=False)


def rayleigh_quotient(eigenfunction, p):
    if isinstance(eigenfunction, RadialProfile):
        return eigenfunction.grad_integral / eigenfunction.lp_integral
    return grad_p_integral(eigenfunction, p) / lp_integral(eigenfunction, p)


def _check_p(p):
    if not np.isfinite(p) or p <= 1:
        raise InvalidExponentError(f"p must exceed 1, got {p!r}")
    return float(p)


# Grid solver ---------------------------------------------------------------


def eigen_grid(mask, p, opts=None, initial=None):
    """Principal eigenpair of the discrete p-Laplacian on ``mask``.

    Each step minimises the convex functional ``E(w)/p - lam_k <u_k^(p-1), w>``
    over fields vanishing outside the mask, then normalises ``w`` in
    ``L^p``.  The eigenvalue estimate is the Rayleigh quotient of the current
    field, so it decreases monotonically.

    ``initial`` (a positive array on the mask's grid) replaces the default
    all-ones start.
    """
    p = _check_p(p)
    opts = opts or SolverOptions()
    if mask.empty:
        raise InvalidInputError("cannot solve on an empty mask")
    inside = mask.inside
    energy = PEnergy(mask, p)
    h2 = mask.h**2
    solver = EnergyMinimizer(energy, inside)

    if initial is not None:
        u = np.where(inside, np.abs(np.asarray(initial, dtype=float)), 0.0)
    elif opts.seed is not None:
        rng = np.random.default_rng(opts.seed)
        u = np.where(inside, 0.5 + rng.random(mask.shape), 0.0)
    else:
        u = inside.astype(float)

    def normalise(v):
        return v / (np.sum(np.abs(v) ** p) * h2) ** (1.0 / p)

    u = normalise(u)
    lam = energy.value(u)
    history = [lam]
    converged = False
    residual = math.inf
    k = 0
    for k in range(1, opts.max_iterations + 1):
        rhs = lam * u ** (p - 1.0)
        res = solver.minimize(
            u, linear=rhs, lower=0.0, tol=opts.inner_tolerance, max_iter=opts.inner_max_iterations
        )
        w = res.u
        if not np.any(w[inside] > 0):
            raise SolverError("inverse iteration collapsed to the zero field")
        w = normalise(w)
        new_lam = energy.value(w)
        residual = abs(new_lam - lam) / new_lam
        if new_lam <= lam:
            u, lam = w, new_lam
        history.append(new_lam)
        if residual < opts.tolerance:
            converged = True
            break
    field_ = GridField(mask, np.where(inside, u, 0.0))
    lam = rayleigh_quotient(field_, p)
    return EigenResult(lam, field_, k, residual, converged, tuple(history))


# Radial shooting -----------------------------------------------------------


def _radial_rhs(n, p, lam):
    q = 1.0 / (p - 1.0)

    def rhs(r, y):
        u, w = y[0], y[1]
        du = -(abs(w) ** q) if w < 0 else abs(w) ** q
        au = abs(u) ** (p - 1.0)
        dw = -lam * (au if u >= 0 else -au) - (n - 1) * w / r
        rn = r ** (n - 1)
        return [du, dw, rn * abs(du) ** p, rn * abs(u) ** p]

    return rhs


def _shoot(n, p, lam, R, rtol, r_end=None):
    """Integrate from the series start; return (first zero or None, solution)."""
    eps = 1e-6 * R
    q = 1.0 / (p - 1.0)
    u0 = 1.0 - (p - 1.0) / p * (lam / n) ** q * eps ** (p / (p - 1.0))
    w0 = -lam * eps / n
    du0 = (lam * eps / n) ** q
    # integrals over [0, eps] from the leading-order series
    g0 = du0**p * eps**n / (n + p * q)
    l0 = eps**n / n

    def hit_zero(r, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1
    sol = solve_ivp(
        _radial_rhs(n, p, lam),
        (eps, R if r_end is None else r_end),
        [u0, w0, g0, l0],
        method="RK45",
        rtol=rtol,
        atol=rtol * 1e-3,
        events=hit_zero,
        dense_output=True,
    )
    if sol.status == -1:
        raise SolverError(f"radial integration failed: {sol.message}")
    zero = sol.t_events[0][0] if sol.t_events[0].size else None
    return zero, sol


def eigen_radial_shoot(n, p, R=1.0, tol=1e-10, samples=401):
    """Principal eigenvalue of the ball ``B_R`` in ``R^n`` by shooting on lambda.

    ``u(0) = 1, u'(0) = 0``; a trial lambda overshoots when ``u`` reaches 0
    before ``R`` and undershoots otherwise.  Bisection on that classification
    runs until the bracket is narrower than ``tol`` (absolute).
    """
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise InvalidDimensionError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    p = _check_p(p)
    R = float(R)
    if not R > 0:
        raise InvalidInputError("radius must be positive")
    rtol = min(1e-8, max(1e-13, 1e-3 * tol))

    # Unit trial eigenvalue: its first zero r0 gives lambda(B_R) ~ (r0/R)^p,
    # which seeds a narrow bracket.
    zero, _ = _shoot(n, p, 1.0, R, rtol, r_end=1e3 * R)
    if zero is None:
        raise SolverError("no sign change found for the trial eigenvalue", diagnostic=(1.0, None))
    guess = (zero / R) ** p
    width = max(4 * tol, 1e-6 * guess)
    lo, hi = guess - width, guess + width
    iterations = 1
    for _ in range(60):
        iterations += 2
        over_lo = _shoot(n, p, lo, R, rtol)[0] is not None
        over_hi = _shoot(n, p, hi, R, rtol)[0] is not None
        if not over_lo and over_hi:
            break
        if over_lo:
            lo -= 2 * width
        if not over_hi:
            hi += 2 * width
        width *= 2
    else:
        raise SolverError("could not bracket the eigenvalue", diagnostic=(lo, hi))

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        iterations += 1
        if _shoot(n, p, mid, R, rtol)[0] is not None:
            hi = mid
        else:
            lo = mid
    lam = float(0.5 * (lo + hi))
    zero, sol = _shoot(n, p, lam, R, rtol)
    r_stop = zero if zero is not None else R
    r = np.linspace(sol.t[0], r_stop, samples)
    y = sol.sol(r)
    u = np.clip(y[0], 0.0, None)
    r = np.concatenate([[0.0], r])
    u = np.concatenate([[1.0], u])
    # the bracket is tol-narrow, so |u(R)| is at round-off level; pin the Dirichlet value
    r[-1], u[-1] = R, 0.0
    area = n * math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    yend = sol.sol(r_stop)
    profile = RadialProfile(n, p, r, u, area * yend[2], area * yend[3])
    return EigenResult(lam, profile, iterations, hi - lo, True)
