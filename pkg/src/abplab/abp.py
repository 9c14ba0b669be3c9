"""Inhomogeneous equations ``g(D^2 h) = f``: fibers, admissibility and the
Alexandrov-type estimates on grids.

An :class:`EquationSpec` couples an operator on ``S(d)`` with a nonnegative
right-hand side ``f`` over a box.  Jets are tested against the fiber

    F_x = {A in closed cone, g(A) >= f(x)}

and its dual ``{-A not in closed cone, or g(-A) <= f(x)}``.  The admissibility
cone is the Garding cone of the operator, or PSD for operators that declare
``cone == "psd"`` (the non-hyperbolic ``||A||^2 det A``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import symmat
from .operators import (
    NotHyperbolicAt,
    PolyOperator,
    PreconditionError,
    cone_contains,
    parse_operator,
    psd_position,
)
from .potential import (
    GridFn,
    hessian_field,
    lower_contact_set,
    perturb,
    sup_convolution,
    unit_ball_volume,
    upper_contact_set,
)
from .report import CheckReport

FIBER_TOL = 1e-9


# ---------------------------------------------------------------------------
# right-hand sides


@dataclass(frozen=True)
class RHS:
    """A named nonnegative right-hand side ``f(X)`` (``X`` has a trailing coordinate axis)."""

    spec: str
    fn: Callable = field(compare=False, repr=False)
    lipschitz: Callable = field(compare=False, repr=False)  # (lower, upper) -> L or None

    def __call__(self, X) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(X, dtype=float)), dtype=float)


def parse_rhs(text: str, center=None, nonnegative: bool = True) -> RHS:
    """``const:c``, ``gauss:a,sigma[,cx,cy]`` (bump ``a exp(-|x-c|^2 / (2 sigma^2))``)
    or ``poly:c0,c1,...`` (``sum c_k |x|^(2k)``).

    Without explicit ``cx,cy`` the bump is centred at ``center`` (the origin
    if omitted).  ``nonnegative=False`` admits negative constants and
    coefficients, for boundary data.
    """
    name, _, rest = text.strip().partition(":")
    try:
        args = [float(v) for v in rest.split(",")] if rest else []
    except ValueError:
        raise ValueError(f"bad numbers in right-hand side {text!r}") from None
    if name == "const" and len(args) == 1:
        c = args[0]
        if c < 0 and nonnegative:
            raise ValueError("const right-hand side must be >= 0")
        return RHS(text, lambda X: np.full(X.shape[:-1], c), lambda lo, hi: None)
    if name == "gauss" and len(args) in (2, 4):
        a, sigma = args[:2]
        if a < 0 or sigma <= 0:
            raise ValueError("gauss needs a >= 0 and sigma > 0")
        if len(args) == 4:
            center = np.array(args[2:])
        elif center is not None:
            center = np.asarray(center, dtype=float)

        def fn(X, center=center):
            c = np.zeros(X.shape[-1]) if center is None else center[: X.shape[-1]]
            return a * np.exp(-((X - c) ** 2).sum(-1) / (2 * sigma**2))

        # max |d/dr a exp(-r^2 / 2 sigma^2)| = a / (sigma sqrt(e))
        return RHS(text, fn, lambda lo, hi: a / (sigma * math.sqrt(math.e)) if a > 0 else None)
    if name == "poly" and args:
        if nonnegative and any(c < 0 for c in args):
            raise ValueError("poly coefficients must be >= 0 so that f >= 0")

        def fn(X):
            r2 = (X * X).sum(-1)
            return sum(c * r2**k for k, c in enumerate(args))

        def lip(lo, hi):
            R = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
            L = sum(abs(c) * 2 * k * R ** (2 * k - 1) for k, c in enumerate(args) if k > 0)
            return L if L > 0 else None

        return RHS(text, fn, lip)
    raise ValueError(f"cannot parse right-hand side {text!r}; valid forms: const:1, gauss:1,0.2, poly:1,0.5")


def affine_rhs(c0: float, grad) -> RHS:
    """``f(x) = c0 + <grad, x>`` (caller guarantees ``f >= 0`` on the box)."""
    g = np.asarray(grad, dtype=float)
    return RHS(f"affine:{c0},{','.join(map(str, g))}", lambda X: c0 + X @ g[: X.shape[-1]],
               lambda lo, hi: float(np.linalg.norm(g)) or None)


@dataclass(frozen=True)
class Jet2:
    r: float
    p: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape != (p.size, p.size):
            raise ValueError(f"jet gradient has {p.size} entries but Hessian is {A.shape}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "A", A)


@dataclass(frozen=True)
class EquationSpec:
    """``g(D^2 h) = f`` on the box ``[lower, upper]`` in ``R^d`` (``d = g.dim``)."""

    operator: PolyOperator
    f: RHS
    lower: tuple
    upper: tuple
    shape: tuple = (65, 65)
    f_lipschitz: float | None = None

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        shape = tuple(int(s) for s in np.atleast_1d(self.shape))
        if len(shape) == 1:
            shape = shape * len(lower)
        object.__setattr__(self, "shape", shape)
        if len(lower) != self.operator.dim:
            raise ValueError(f"{self.operator.spec} acts on S({self.operator.dim}) but the box is {len(lower)}-dimensional")
        if self.f_lipschitz is None:
            object.__setattr__(self, "f_lipschitz", self.f.lipschitz(np.array(lower), np.array(upper)))
        values = self.f(self.grid().coords())
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError(f"right-hand side {self.f.spec} must be finite and >= 0 on every node")

    @classmethod
    def from_strings(cls, operator: str, f: str, box: str = "0,1", shape=65) -> "EquationSpec":
        """Build from catalog/right-hand-side strings; bumps centre on the box."""
        g = parse_operator(operator)
        lower, upper = parse_box(box, g.dim)
        center = (np.array(lower) + np.array(upper)) / 2
        return cls(g, parse_rhs(f, center), lower, upper, shape)

    @property
    def cone(self) -> str:
        return self.operator.cone

    def grid(self, values=None) -> GridFn:
        if values is None:
            values = np.zeros(self.shape)
        return GridFn(self.lower, self.upper, values)

    def f_at(self, x) -> float:
        return float(self.f(np.atleast_1d(np.asarray(x, dtype=float))[None])[0])


def _in_closed_cone(eq: EquationSpec, A: np.ndarray) -> bool:
    if eq.cone == "psd":
        return psd_position(A).in_closure
    try:
        return cone_contains(eq.operator, A).in_closure
    except NotHyperbolicAt:
        return False


def _value_scale(g: PolyOperator, A) -> float:
    return (1.0 + np.linalg.norm(A)) ** g.degree


def fiber_contains(eq: EquationSpec, x, jet: Jet2, tol: float = FIBER_TOL) -> bool:
    """``A`` in the closed cone and ``g(A) >= f(x) - tol * (1 + ||A||_F)^N``."""
    A = jet.A
    if not _in_closed_cone(eq, A):
        return False
    g = eq.operator
    return g(A) >= eq.f_at(x) - tol * _value_scale(g, A)


def dual_fiber_contains(eq: EquationSpec, x, jet: Jet2, tol: float = FIBER_TOL) -> bool:
    """``-A`` outside the closed cone, or ``g(-A) <= f(x) + tol * (1 + ||A||_F)^N``."""
    A = -jet.A
    if not _in_closed_cone(eq, A):
        return True
    g = eq.operator
    return g(A) <= eq.f_at(x) + tol * _value_scale(g, A)


def super_condition(eq: EquationSpec, x, jet: Jet2, tol: float = FIBER_TOL) -> bool:
    """Supersolution test on a lower contact jet: ``A`` outside the closed cone or ``g(A) <= f(x)``."""
    A = jet.A
    if not _in_closed_cone(eq, A):
        return True
    g = eq.operator
    return g(A) <= eq.f_at(x) + tol * _value_scale(g, A)


@dataclass
class Classification:
    admissible_sub: np.ndarray
    super: np.ndarray
    dual_sub: np.ndarray
    checked: np.ndarray  # nodes where a Hessian was available

    def fraction(self, name: str) -> float:
        flags = getattr(self, name)
        return float(flags[self.checked].mean()) if self.checked.any() else math.nan


def _classify(eq: EquationSpec, X: np.ndarray, r: np.ndarray, P: np.ndarray, H: np.ndarray,
              checked: np.ndarray, tol: float) -> Classification:
    sub = np.zeros(checked.shape, dtype=bool)
    sup = np.zeros(checked.shape, dtype=bool)
    dual = np.zeros(checked.shape, dtype=bool)
    for idx in zip(*np.nonzero(checked)):
        jet = Jet2(r[idx], P[idx], H[idx])
        sub[idx] = fiber_contains(eq, X[idx], jet, tol)
        sup[idx] = super_condition(eq, X[idx], jet, tol)
        dual[idx] = dual_fiber_contains(eq, X[idx], jet, tol)
    return Classification(sub, sup, dual, checked)


def classify_classical(eq: EquationSpec, u: Callable, du: Callable, d2u: Callable,
                       tol: float = FIBER_TOL) -> Classification:
    """Flags from Definition-level tests with the exact classical jet at each node.

    ``u``, ``du`` and ``d2u`` map node coordinates (trailing axis ``d``) to
    values, gradients (``(..., d)``) and Hessians (``(..., d, d)``).  For a
    smooth function the classical jet is the only relevant contact jet, so the
    flags are exactly the viscosity conditions.
    """
    X = eq.grid().coords()
    r, P, H = np.asarray(u(X)), np.asarray(du(X)), np.asarray(d2u(X))
    H = np.broadcast_to(H, X.shape[:-1] + (X.shape[-1],) * 2)
    P = np.broadcast_to(P, X.shape)
    r = np.broadcast_to(r, X.shape[:-1])
    return _classify(eq, X, r, P, H, np.ones(X.shape[:-1], dtype=bool), tol)


def classify_grid(eq: EquationSpec, h: GridFn, tol: float = FIBER_TOL) -> Classification:
    """As :func:`classify_classical`, with centered-difference Hessians at stencil nodes."""
    H = hessian_field(h)
    checked = h.stencil_mask & h.interior_mask
    P = np.zeros(h.shape + (h.d,))
    return _classify(eq, h.coords(), h.values, P, np.nan_to_num(H), checked, tol)


# ---------------------------------------------------------------------------
# approximation pipeline


def modulus_delta(eq: EquationSpec, eta: float, degree: int | None = None) -> float:
    """``eta^N / L`` for ``L``-Lipschitz ``f`` (``inf`` when ``f`` is constant), floored at ``1e-12``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    N = eq.operator.degree if degree is None else degree
    L = eq.f_lipschitz
    if L is None or L == 0:
        return math.inf
    return max(eta**N / L, 1e-12)


def eps_star(delta: float, M: float) -> float:
    """``delta^2 / (4 M)``."""
    if not delta > 0 or not M > 0:
        raise ValueError("delta and M must be positive")
    return delta * delta / (4.0 * M)


def _distance_to_boundary(w: GridFn) -> np.ndarray:
    X = w.coords()
    B = X[w.boundary_mask]
    out = np.full(w.shape, np.inf)
    pts = X[w.domain]
    dist = np.sqrt(((pts[:, None, :] - B[None, :, :]) ** 2).sum(-1)).min(axis=1)
    out[w.domain] = dist
    return out


def semiconvex_pipeline_check(eq: EquationSpec, w: GridFn, eta: float, C: float = 5.0) -> CheckReport:
    """Semiconvex approximation of a dual subharmonic, then the contact-point inequality.

    Builds ``w_eta^eps = sup_convolution(w, eps*) + eta |x|^2 / 2`` with
    ``delta = eta^N / L`` and ``eps* = delta^2 / (4M)``, ``M = max |w|``; on the
    nodes farther than ``delta`` from the boundary it flags upper contact nodes
    and checks ``g(psd_clip(-D^2 w_eta^eps)) <= f(x) + C h`` wherever the
    Hessian stencil is available.  For constant ``f`` (``delta = inf``) the
    whole interior is used with ``delta`` replaced by the diameter in ``eps*``.
    """
    g = eq.operator
    h = float(w.spacing.max())
    tol_disc = C * h
    delta = modulus_delta(eq, eta)
    M = max(float(np.abs(w.values[w.domain]).max()), 1e-300)
    delta_eff = w.diam if math.isinf(delta) else delta
    eps = eps_star(delta_eff, M)
    params = {"eta": eta, "L": eq.f_lipschitz, "delta": delta if math.isfinite(delta) else "inf",
              "eps_star": eps, "M": M, "h": h, "C": C, "scale": "absolute (f units)"}
    if math.isinf(delta):
        inner = w.interior_mask
        params["note"] = "constant f: delta is unbounded, inner region is the whole interior"
    else:
        inner = w.interior_mask & (_distance_to_boundary(w) > delta)
    if not inner.any():
        return CheckReport("pipeline", g.spec, 0, math.nan, tol_disc, params=params,
                           skipped=f"inner region is empty (delta = {delta:.3g} too large for the box)")
    approx = perturb(sup_convolution(w, eps), eta)
    restricted = GridFn(approx.lower, approx.upper, np.where(inner, approx.values, 0.0), inner)
    contact = upper_contact_set(restricted)
    H = hessian_field(approx)
    nodes = contact.flags & approx.stencil_mask & inner
    X = approx.coords()
    min_slack, witness, checked = math.inf, None, 0
    if nodes.any():
        gv = g.batch(symmat.psd_clip_batch(-H[nodes]))
        fv = eq.f(X[nodes])
        slack = fv - gv
        checked = int(nodes.sum())
        k = int(np.argmin(slack))
        min_slack = float(slack[k])
        idx = tuple(int(i) for i in np.argwhere(nodes)[k])
        witness = {"node": list(idx), "x": X[idx].tolist(), "g": float(gv[k]), "f": float(fv[k]),
                   "hessian": H[idx].tolist()}
    params.update({"inner_nodes": int(inner.sum()), "contact_nodes": contact.count, "checked_nodes": checked})
    return CheckReport("pipeline", g.spec, checked, min_slack, tol_disc, witness, params)


# ---------------------------------------------------------------------------
# estimates


def _as_grid(h, force: bool) -> GridFn:
    if hasattr(h, "grid") and hasattr(h, "converged"):
        if not h.converged and not force:
            raise PreconditionError("solver output did not converge; pass force=True to check it anyway")
        return h.grid
    return h


def _check_dims(eq: EquationSpec, h: GridFn):
    if h.d != eq.operator.dim:
        raise ValueError(f"grid dimension {h.d} differs from operator dimension {eq.operator.dim}")


@dataclass
class OscillationBound:
    osc_in: float
    osc_bd: float
    error_term: float
    slack: float
    full_error_term: float | None = None  # set by the contact-restricted variant

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _error_term(eq: EquationSpec, h: GridFn, nodes: np.ndarray) -> float:
    g, d = eq.operator, h.d
    fv = eq.f(h.coords()[nodes])
    norm = (np.sum(fv ** (d / g.degree)) * h.cell_volume) ** (1.0 / d)
    return h.diam / (unit_ball_volume(d) ** (1.0 / d) * g.value_at_identity ** (1.0 / g.degree)) * norm


def oscillation_bound_check(eq: EquationSpec, h, force: bool = False) -> OscillationBound:
    """``osc_interior h <= osc_boundary h + diam / (|B_1|^(1/d) g(I)^(1/N)) ||f^(1/N)||_{L^d}``,

    the norm being the midpoint sum over interior nodes.
    """
    h = _as_grid(h, force)
    _check_dims(eq, h)
    term = _error_term(eq, h, h.interior_mask)
    osc_in, osc_bd = h.osc_over(h.interior_mask), h.osc_over(h.boundary_mask)
    return OscillationBound(osc_in, osc_bd, term, osc_bd + term - osc_in)


def c11_oscillation_check(eq: EquationSpec, h, force: bool = False) -> OscillationBound:
    """The oscillation bound with the norm restricted to lower contact nodes of ``h``
    (upper contact of ``-h``) that carry a stencil; also reports the full-interior term."""
    h = _as_grid(h, force)
    _check_dims(eq, h)
    full = oscillation_bound_check(eq, h)
    nodes = lower_contact_set(h).flags & h.interior_mask & h.stencil_mask
    restricted = _error_term(eq, h, nodes)
    return OscillationBound(full.osc_in, full.osc_bd, restricted, full.osc_bd + restricted - full.osc_in,
                            full_error_term=full.error_term)


@dataclass
class MaxPrincipleRecord:
    admissible: bool
    interior_max: float
    boundary_max: float
    slack: float
    min_trace: float
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.admissible and self.slack >= -1e-9 and self.min_trace >= -1e-8

    def to_dict(self) -> dict:
        return {**self.__dict__, "passed": self.passed}


def max_principle_check(eq: EquationSpec, u: GridFn, tol: float = FIBER_TOL) -> MaxPrincipleRecord:
    """For an admissible subsolution sample: ``max_interior u <= max_boundary u`` and
    ``tr D^2 u >= 0`` at every stencil node.

    Admissibility is verified first with stencil Hessians; an inadmissible
    sample is reported (``admissible=False``) rather than checked.
    """
    _check_dims(eq, u)
    H = hessian_field(u)
    nodes = u.stencil_mask & u.interior_mask
    tr = np.trace(H[nodes], axis1=-2, axis2=-1)
    scale = 1.0 + float(np.abs(H[nodes]).max()) if nodes.any() else 1.0
    min_trace = float(tr.min() / scale) if tr.size else 0.0
    lhs, rhs = u.max_over(u.interior_mask), u.max_over(u.boundary_mask)
    cls = classify_grid(eq, u, tol)
    if not cls.admissible_sub[cls.checked].all():
        bad = np.argwhere(cls.checked & ~cls.admissible_sub)[0]
        return MaxPrincipleRecord(False, lhs, rhs, rhs - lhs, min_trace,
                                  f"not an admissible subsolution (first failing node {bad.tolist()})")
    return MaxPrincipleRecord(True, lhs, rhs, rhs - lhs, min_trace)


def quadratic(A, b=None, c: float = 0.0):
    """``u(x) = x^T A x / 2 + <b, x> + c`` with its exact gradient and Hessian callbacks."""
    A = symmat.as_symmat(A)
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)

    def u(X):
        return 0.5 * np.einsum("...i,ij,...j->...", X, A, X) + X @ b + c

    def du(X):
        return X @ A + b

    def d2u(X):
        return np.broadcast_to(A, X.shape[:-1] + A.shape)

    return u, du, d2u


def parse_box(text: str, d: int) -> tuple[tuple, tuple]:
    """``"0,1"`` (same interval on every axis) or ``"x0,x1,y0,y1"``."""
    vals = [float(v) for v in re.split(r"[,\s]+", text.strip()) if v]
    if len(vals) == 2:
        return (vals[0],) * d, (vals[1],) * d
    if len(vals) == 2 * d:
        return tuple(vals[0::2]), tuple(vals[1::2])
    raise ValueError(f"box {text!r} needs 2 or {2 * d} numbers")
