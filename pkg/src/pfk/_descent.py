"""Convex minimisation of ``E(u)/p - <c, u> h^2`` over free grid cells.

Preconditioned descent: the search direction is the gradient preconditioned
by the (regularised) Hessian of the p-energy, followed by backtracking on
the objective.  Optional box bounds are enforced by clamping trial points,
which never increases the p-energy.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

ARMIJO = 1e-4


@dataclass
class DescentResult:
    u: np.ndarray
    objective: float
    iterations: int
    converged: bool


class EnergyMinimizer:
    """Reusable minimiser for one (energy, free-cell set) pair."""

    def __init__(self, energy, free):
        self.energy = energy
        self.free = np.asarray(free, dtype=bool)
        self.Dx, self.Dy = energy.operators(self.free)
        self._lu2 = None

    def objective(self, u, linear):
        e, g = self.energy.value_and_grad(u)
        h2 = self.energy.h ** 2
        p = self.energy.p
        J = e / p
        grad = g / p
        if linear is not None:
            J -= float(np.sum(linear * u)) * h2
            grad = grad - linear * h2
        return J, grad[self.free]

    def _direction(self, u, grad):
        p = self.energy.p
        if p == 2.0:
            if self._lu2 is None:
                H = self.energy.hessian(u, self.Dx, self.Dy) / p
                self._lu2 = splu(sp.csc_matrix(H))
            return -self._lu2.solve(grad)
        gx, gy = self.energy.components(u)
        m2 = (gx * gx + gy * gy)[self._active]
        scale2 = float(np.mean(m2)) if m2.size else 1.0
        delta = 1e-4 * np.sqrt(scale2) if scale2 > 0 else 1e-8
        H = self.energy.hessian(u, self.Dx, self.Dy, delta=delta) / p
        # a small multiple of the Laplacian keeps degenerate regions solvable
        diag = H.diagonal()
        mu = 1e-10 * float(np.mean(diag)) if diag.size else 1e-12
        H = H + mu * self._lap
        return -splu(sp.csc_matrix(H)).solve(grad)

    @cached_property
    def _lap(self):
        return (self.Dx.T @ self.Dx + self.Dy.T @ self.Dy) * self.energy.h**2

    @cached_property
    def _active(self):
        return self.energy.mask.inside

    def minimize(self, u0, linear=None, lower=None, upper=None, tol=1e-12, max_iter=100):
        """Minimise starting from the full-grid array ``u0`` (fixed cells are kept)."""
        u = np.array(u0, dtype=float)
        u = self._clamp(u, lower, upper)
        J, grad = self.objective(u, linear)
        converged = False
        it = 0
        for it in range(1, max_iter + 1):
            d = self._direction(u, grad)
            slope = float(np.sum(grad * d))
            if not slope < 0:
                d = -grad
                slope = -float(np.sum(grad * grad))
            if slope == 0:
                converged = True
                break
            t = 1.0
            accepted = False
            for _ in range(40):
                trial = u.copy()
                trial[self.free] += t * d
                trial = self._clamp(trial, lower, upper)
                with np.errstate(over="ignore", invalid="ignore"):
                    Jt, gt = self.objective(trial, linear)
                # overflowing trial points (large p, long steps) are rejected
                if np.isfinite(Jt) and Jt <= J + ARMIJO * t * slope:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                # no representable decrease left along the direction
                converged = True
                break
            decrease = J - Jt
            u, J, grad = trial, Jt, gt
            if decrease <= tol * max(abs(J), 1e-300):
                converged = True
                break
        return DescentResult(u, J, it, converged)

    def _clamp(self, u, lower, upper):
        if lower is None and upper is None:
            return u
        f = self.free
        if lower is not None:
            u[f] = np.maximum(u[f], lower)
        if upper is not None:
            u[f] = np.minimum(u[f], upper)
        return u
