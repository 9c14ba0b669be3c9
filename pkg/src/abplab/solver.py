"""Monotone relaxation solvers for ``g(D^2 u) = f`` on 2D boxes with Dirichlet data.

``solve_ma_2d`` uses the wide-stencil Monge-Ampere scheme: at each interior
node the discrete operator is the minimum over the axis pair and the two
diagonals of the product of positive parts of the directional second
differences.  For a fixed frame the equation in the centre value is a
quadratic whose smaller root is the unique admissible one, so each Gauss-Seidel
update is closed form (the minimum over frames of the per-frame roots).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .operators import PolyOperator, PreconditionError, garding_eigenvalues, radial_poly_coeffs
from .potential import GridFn


@dataclass
class SolveResult:
    grid: GridFn
    converged: bool
    residual: float
    iterations: int
    tol: float
    scheme: str
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"converged": self.converged, "residual": self.residual, "iterations": self.iterations,
                "tol": self.tol, "scheme": self.scheme, "notes": list(self.notes), "shape": list(self.grid.shape)}


def _setup(f, boundary, lower, upper, shape):
    lower = tuple(float(v) for v in np.broadcast_to(np.asarray(lower, dtype=float), (2,)))
    upper = tuple(float(v) for v in np.broadcast_to(np.asarray(upper, dtype=float), (2,)))
    shape = tuple(int(s) for s in np.broadcast_to(np.asarray(shape), (2,)))
    if max(shape) > 257 or min(shape) < 3:
        raise ValueError("shape must lie between 3 and 257 nodes per axis")
    grid = GridFn(lower, upper, np.zeros(shape))
    h = grid.spacing
    if not math.isclose(h[0], h[1], rel_tol=1e-12):
        raise ValueError(f"the wide stencil needs equal spacing on both axes, got {h.tolist()}")
    X = grid.coords()
    fv = np.ascontiguousarray(np.broadcast_to(np.asarray(f(X), dtype=float), shape), dtype=float)
    if np.any(fv < 0) or not np.all(np.isfinite(fv)):
        raise ValueError("right-hand side must be finite and >= 0 on every node")
    bv = np.asarray(boundary(X), dtype=float)
    u = np.empty(shape)
    u[...] = bv[grid.boundary_mask].max()  # a supersolution; iterates decrease monotonically
    u[grid.boundary_mask] = bv[grid.boundary_mask]
    return grid, fv, u, float(h[0])


@numba.njit(cache=True)
def _ma_sweep(u, f, h):
    h4 = h ** 4
    change = 0.0
    for i in range(1, u.shape[0] - 1):
        for j in range(1, u.shape[1] - 1):
            a1 = 0.5 * (u[i + 1, j] + u[i - 1, j])
            a2 = 0.5 * (u[i, j + 1] + u[i, j - 1])
            ua = 0.5 * ((a1 + a2) - math.sqrt((a1 - a2) ** 2 + f[i, j] * h4))
            b1 = 0.5 * (u[i + 1, j + 1] + u[i - 1, j - 1])
            b2 = 0.5 * (u[i + 1, j - 1] + u[i - 1, j + 1])
            ub = 0.5 * ((b1 + b2) - math.sqrt((b1 - b2) ** 2 + 4.0 * f[i, j] * h4))
            new = min(ua, ub)
            change = max(change, abs(new - u[i, j]))
            u[i, j] = new
    return change


@numba.njit(cache=True)
def _ma_residual(u, f, h):
    h2 = h * h
    res = 0.0
    for i in range(1, u.shape[0] - 1):
        for j in range(1, u.shape[1] - 1):
            c = u[i, j]
            dx = max((u[i + 1, j] + u[i - 1, j] - 2 * c) / h2, 0.0)
            dy = max((u[i, j + 1] + u[i, j - 1] - 2 * c) / h2, 0.0)
            dp = max((u[i + 1, j + 1] + u[i - 1, j - 1] - 2 * c) / (2 * h2), 0.0)
            dm = max((u[i + 1, j - 1] + u[i - 1, j + 1] - 2 * c) / (2 * h2), 0.0)
            res = max(res, abs(min(dx * dy, dp * dm) - f[i, j]))
    return res


@numba.njit(cache=True)
def _poisson_sweep(u, f, h):
    h2 = h * h
    change = 0.0
    for i in range(1, u.shape[0] - 1):
        for j in range(1, u.shape[1] - 1):
            new = 0.25 * (u[i + 1, j] + u[i - 1, j] + u[i, j + 1] + u[i, j - 1] - h2 * f[i, j])
            change = max(change, abs(new - u[i, j]))
            u[i, j] = new
    return change


@numba.njit(cache=True)
def _poisson_residual(u, f, h):
    h2 = h * h
    res = 0.0
    for i in range(1, u.shape[0] - 1):
        for j in range(1, u.shape[1] - 1):
            lap = (u[i + 1, j] + u[i - 1, j] + u[i, j + 1] + u[i, j - 1] - 4 * u[i, j]) / h2
            res = max(res, abs(lap - f[i, j]))
    return res


def _iterate(sweep, residual, u, fv, h, tol, max_iter, check_every=50):
    it, res = 0, math.inf
    while it < max_iter:
        steps = min(check_every, max_iter - it)
        for _ in range(steps):
            sweep(u, fv, h)
        it += steps
        res = residual(u, fv, h)
        if res <= tol:
            return True, res, it
    return False, res, it


def solve_ma_2d(f, boundary, lower=(0.0, 0.0), upper=(1.0, 1.0), shape=65, tol: float = 1e-8,
                max_iter: int = 200000) -> SolveResult:
    """Solve ``det D^2 u = f`` (convex ``u``) with ``u = boundary`` on the box faces.

    ``f`` and ``boundary`` map node coordinates (trailing axis 2) to values.
    Returns when the max-norm residual of the discrete operator is ``<= tol``
    or after ``max_iter`` lexicographic sweeps (``converged=False``).
    """
    grid, fv, u, h = _setup(f, boundary, lower, upper, shape)
    converged, res, it = _iterate(_ma_sweep, _ma_residual, u, fv, h, tol, max_iter)
    return SolveResult(grid.with_values(u), converged, float(res), it, tol, "ma-wide-stencil")


def solve_trace_2d(f, boundary, lower=(0.0, 0.0), upper=(1.0, 1.0), shape=65, tol: float = 1e-8,
                   max_iter: int = 200000) -> SolveResult:
    """Solve ``tr D^2 u = f`` with the 5-point Laplacian."""
    grid, fv, u, h = _setup(f, boundary, lower, upper, shape)
    converged, res, it = _iterate(_poisson_sweep, _poisson_residual, u, fv, h, tol, max_iter)
    return SolveResult(grid.with_values(u), converged, float(res), it, tol, "poisson-5pt")


def _generic_node(g: PolyOperator, B: np.ndarray, target: float, h2: float) -> float:
    """Centre value ``c`` with ``g(B - 2 c / h^2 I) = target`` on the closed cone (bisection)."""
    s0 = -garding_eigenvalues(g, B).min  # s >= s0 keeps B + s I in the closed cone
    coeffs = radial_poly_coeffs(g, B)
    lead = coeffs[-1]
    # all radial roots are <= s0, hence phi(s) >= lead (s - s0)^N
    lo, hi = s0, s0 + (max(target, 0.0) / lead) ** (1.0 / g.degree) + 1e-300
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.polynomial.polynomial.polyval(mid, coeffs) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * (1.0 + abs(hi)):
            break
    return -0.5 * h2 * hi


def solve_generic_2d(g: PolyOperator, f, boundary, lower=(0.0, 0.0), upper=(1.0, 1.0), shape=17,
                     tol: float = 1e-8, max_iter: int = 2000, experimental: bool = False) -> SolveResult:
    """Nonlinear Gauss-Seidel for a general operator on ``S(2)`` with the 9-point Hessian.

    Experimental: the scheme is not known to be monotone, so only the residual
    is meaningful and estimate suites do not consume the output.
    """
    if not experimental:
        raise PreconditionError("solve_generic_2d is experimental; pass experimental=True")
    if g.dim != 2:
        raise ValueError(f"{g.spec} is not an operator on S(2)")
    grid, fv, u, h = _setup(f, boundary, lower, upper, shape)
    h2 = h * h

    def base(i, j):
        B = np.empty((2, 2))
        B[0, 0] = (u[i + 1, j] + u[i - 1, j]) / h2
        B[1, 1] = (u[i, j + 1] + u[i, j - 1]) / h2
        B[0, 1] = B[1, 0] = (u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]) / (4 * h2)
        return B

    def residual():
        return max(abs(g(base(i, j) - 2 * u[i, j] / h2 * np.eye(2)) - fv[i, j])
                   for i in range(1, u.shape[0] - 1) for j in range(1, u.shape[1] - 1))

    res, it = math.inf, 0
    while it < max_iter:
        for i in range(1, u.shape[0] - 1):
            for j in range(1, u.shape[1] - 1):
                u[i, j] = _generic_node(g, base(i, j), fv[i, j], h2)
        it += 1
        if it % 10 == 0 or it == max_iter:
            res = residual()
            if res <= tol:
                break
    return SolveResult(grid.with_values(u), bool(res <= tol), float(res), it, tol, "generic-9pt (experimental)",
                       ["experimental: monotonicity not established, residual-only acceptance"])
