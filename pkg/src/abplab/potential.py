"""Discrete potential theory on uniform grids in one and two dimensions.

Grid functions live on a box (optionally restricted by a node mask, e.g. a
disk).  This module provides exact sup-convolution, upper/lower contact sets
with certified supporting gradients, centered Hessian stencils and the
discrete Alexandrov estimates.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.spatial import ConvexHull, QhullError

CONTACT_TOL = 1e-9


def unit_ball_volume(d: int) -> float:
    if d == 1:
        return 2.0
    if d == 2:
        return math.pi
    raise ValueError("only d in {1, 2} is supported")


@dataclass(frozen=True, eq=False)
class GridFn:
    """Values on a uniform tensor grid over ``[lower, upper]``.

    ``mask`` (optional) selects the nodes that belong to the domain; masked-out
    nodes are ignored by every operation.  ``diameter`` overrides the box
    diagonal (used for the disk, whose diameter is ``2r``).
    """

    lower: tuple
    upper: tuple
    values: np.ndarray
    mask: np.ndarray | None = None
    diameter: float | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        d = len(lower)
        if d not in (1, 2) or len(upper) != d or values.ndim != d:
            raise ValueError(f"need d in {{1, 2}} with matching box and values, got box dim {d}, values {values.shape}")
        if any(s < 3 for s in values.shape):
            raise ValueError(f"every axis needs at least 3 nodes, got {values.shape}")
        if any(hi <= lo for lo, hi in zip(lower, upper)):
            raise ValueError("upper corner must exceed lower corner on every axis")
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != values.shape:
                raise ValueError("mask shape differs from values shape")
            object.__setattr__(self, "mask", mask)
        if not np.all(np.isfinite(values[self.domain])):
            raise ValueError("grid values must be finite on the domain")

    # -- geometry -----------------------------------------------------------

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / (np.array(self.shape) - 1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def diam(self) -> float:
        if self.diameter is not None:
            return float(self.diameter)
        return float(np.linalg.norm(np.array(self.upper) - np.array(self.lower)))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, s) for lo, hi, s in zip(self.lower, self.upper, self.shape)]

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (d,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    @property
    def domain(self) -> np.ndarray:
        return np.ones(self.shape, dtype=bool) if self.mask is None else self.mask

    @property
    def boundary_mask(self) -> np.ndarray:
        """Domain nodes on a box face or with an axis neighbour outside the domain."""
        dom = self.domain
        edge = np.zeros(self.shape, dtype=bool)
        for ax in range(self.d):
            idx = [slice(None)] * self.d
            idx[ax] = 0
            edge[tuple(idx)] = True
            idx[ax] = -1
            edge[tuple(idx)] = True
        padded = np.pad(dom, 1, constant_values=False)
        for ax in range(self.d):
            for shift in (-1, 1):
                neighbour = np.roll(padded, shift, axis=ax)[tuple([slice(1, -1)] * self.d)]
                edge |= ~neighbour
        return dom & edge

    @property
    def interior_mask(self) -> np.ndarray:
        return self.domain & ~self.boundary_mask

    @property
    def stencil_mask(self) -> np.ndarray:
        """Nodes whose full 3^d neighbourhood lies in the domain (Hessian stencil available)."""
        padded = np.pad(self.domain, 1, constant_values=False)
        ok = np.ones(self.shape, dtype=bool)
        for offset in np.ndindex(*([3] * self.d)):
            ok &= padded[tuple(slice(o, o + s) for o, s in zip(offset, self.shape))]
        return ok

    # -- construction -------------------------------------------------------

    @classmethod
    def from_function(cls, fn, lower, upper, shape, mask_fn=None, diameter=None) -> "GridFn":
        """Sample ``fn(X)`` where ``X`` has shape ``shape + (d,)``."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        if len(shape) == 1 and len(lower) > 1:
            shape = shape * len(lower)
        axes = [np.linspace(lo, hi, s) for lo, hi, s in zip(lower, upper, shape)]
        X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        mask = None if mask_fn is None else np.asarray(mask_fn(X), dtype=bool)
        values = np.asarray(fn(X), dtype=float)
        if mask is not None:
            values = np.where(mask, values, 0.0)
        return cls(tuple(lower), tuple(upper), values, mask, diameter)

    @classmethod
    def disk(cls, fn, radius: float, shape: int, center=(0.0, 0.0)) -> "GridFn":
        """Nodes of the box ``center +- radius`` that lie in the closed disk."""
        c = np.asarray(center, dtype=float)

        def inside(X):
            return np.linalg.norm(X - c, axis=-1) <= radius * (1 + 1e-12)

        return cls.from_function(fn, c - radius, c + radius, (shape, shape), inside, 2.0 * radius)

    def with_values(self, values) -> "GridFn":
        return GridFn(self.lower, self.upper, values, self.mask, self.diameter)

    def __neg__(self) -> "GridFn":
        return self.with_values(-self.values)

    # -- reductions over the domain ----------------------------------------

    def max_over(self, where: np.ndarray) -> float:
        sel = self.values[where & self.domain]
        return float(sel.max()) if sel.size else -math.inf

    def min_over(self, where: np.ndarray) -> float:
        sel = self.values[where & self.domain]
        return float(sel.min()) if sel.size else math.inf

    def osc_over(self, where: np.ndarray) -> float:
        return self.max_over(where) - self.min_over(where)

    @property
    def value_scale(self) -> float:
        return 1.0 + float(np.abs(self.values[self.domain]).max())

    # -- serialization ------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# shape={','.join(map(str, self.shape))};lower={','.join(map(repr, self.lower))};"
                  f"upper={','.join(map(repr, self.upper))}\n")
        writer = csv.writer(buf, lineterminator="\n")
        names = ["x", "y"][: self.d]
        writer.writerow(["index", *names, "value"])
        X = self.coords()
        for flat, idx in enumerate(np.ndindex(*self.shape)):
            if self.domain[idx]:
                writer.writerow([flat, *(repr(float(v)) for v in X[idx]), repr(float(self.values[idx]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridFn":
        lines = text.splitlines()
        header = dict(part.split("=") for part in lines[0].lstrip("# ").split(";"))
        shape = tuple(int(v) for v in header["shape"].split(","))
        lower = tuple(float(v) for v in header["lower"].split(","))
        upper = tuple(float(v) for v in header["upper"].split(","))
        values = np.zeros(shape)
        mask = np.zeros(shape, dtype=bool)
        for row in csv.reader(lines[2:]):
            idx = np.unravel_index(int(row[0]), shape)
            values[idx] = float(row[-1])
            mask[idx] = True
        return cls(lower, upper, values, None if mask.all() else mask)

    def to_json(self) -> str:
        return json.dumps({"lower": list(self.lower), "upper": list(self.upper), "shape": list(self.shape),
                           "values": self.values.tolist(),
                           "mask": None if self.mask is None else self.mask.tolist(),
                           "diameter": self.diameter}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GridFn":
        data = json.loads(text)
        mask = None if data["mask"] is None else np.array(data["mask"], dtype=bool)
        return cls(tuple(data["lower"]), tuple(data["upper"]), np.array(data["values"]), mask, data["diameter"])


# ---------------------------------------------------------------------------
# sup-convolution


@numba.njit(cache=True)
def _lower_envelope(c, h, a, out):
    """``out[i] = min_j c[j] + a (h (i - j))^2`` in O(n) (parabola lower envelope).

    ``c[j] = +inf`` marks absent parabolas; rows with none give ``+inf``.
    """
    n = c.shape[0]
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1)
    k = -1
    for q in range(n):
        if not np.isfinite(c[q]):
            continue
        xq = q * h
        while k >= 0:
            xv = v[k] * h
            s = ((c[q] + a * xq * xq) - (c[v[k]] + a * xv * xv)) / (2.0 * a * (xq - xv))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        if k == 0:
            z[k] = -np.inf
        else:
            xv = v[k - 1] * h
            z[k] = ((c[q] + a * xq * xq) - (c[v[k - 1]] + a * xv * xv)) / (2.0 * a * (xq - xv))
        z[k + 1] = np.inf
    if k < 0:
        for i in range(n):
            out[i] = np.inf
        return
    j = 0
    for i in range(n):
        x = i * h
        while z[j + 1] < x:
            j += 1
        dx = x - v[j] * h
        out[i] = c[v[j]] + a * dx * dx


@numba.njit(cache=True)
def _envelope_lines(arr, h, a):
    out = np.empty_like(arr)
    for r in range(arr.shape[0]):
        _lower_envelope(arr[r], h, a, out[r])
    return out


def sup_convolution(w: GridFn, eps: float) -> GridFn:
    """``x -> max_y w(y) - |y - x|^2 / (2 eps)`` over domain nodes ``y``, at every node.

    Exact: one lower-envelope-of-parabolas pass per axis.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    a = 1.0 / (2.0 * eps)
    cost = np.where(w.domain, -w.values, np.inf)
    for ax, h in enumerate(w.spacing):
        moved = np.ascontiguousarray(np.moveaxis(cost, ax, -1))
        flat = moved.reshape(-1, moved.shape[-1])
        cost = np.moveaxis(_envelope_lines(flat, float(h), a).reshape(moved.shape), -1, ax)
    return w.with_values(np.where(w.domain, -cost, 0.0))


def sup_convolution_bruteforce(w: GridFn, eps: float) -> GridFn:
    """Direct O(nodes^2) evaluation; reference implementation for tests."""
    X = w.coords()[w.domain]
    vals = w.values[w.domain]
    allX = w.coords().reshape(-1, w.d)
    d2 = ((allX[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    out = (vals[None, :] - d2 / (2.0 * eps)).max(axis=1).reshape(w.shape)
    return w.with_values(np.where(w.domain, out, 0.0))


def perturb(w: GridFn, eta: float) -> GridFn:
    """Add ``eta |x|^2 / 2``."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    X = w.coords()
    return w.with_values(np.where(w.domain, w.values + 0.5 * eta * (X * X).sum(-1), 0.0))


# ---------------------------------------------------------------------------
# contact sets


@dataclass
class ContactMask:
    """Flagged nodes and, at each, a gradient ``p`` of a supporting plane from above."""

    flags: np.ndarray
    gradients: np.ndarray  # shape + (d,), NaN where not flagged
    tol: float
    notes: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return int(self.flags.sum())

    def support_violation(self, u: GridFn) -> float:
        """Largest ``u(y) - u(x) - <p, y - x>`` over flagged ``x`` and domain ``y``."""
        X = u.coords()[u.domain]
        vals = u.values[u.domain]
        worst = -math.inf
        for idx in zip(*np.nonzero(self.flags)):
            p = self.gradients[idx]
            x = u.coords()[idx]
            worst = max(worst, float((vals - u.values[idx] - (X - x) @ p).max()))
        return worst

    def to_csv(self, u: GridFn) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = ["x", "y"][: u.d]
        writer.writerow(["index", *names, "contact", *[f"p{k}" for k in range(u.d)]])
        X = u.coords()
        for flat, idx in enumerate(np.ndindex(*u.shape)):
            if u.domain[idx]:
                writer.writerow([flat, *(repr(float(v)) for v in X[idx]), int(self.flags[idx]),
                                 *(repr(float(v)) for v in self.gradients[idx])])
        return buf.getvalue()


def _upper_hull_1d(x: np.ndarray, y: np.ndarray) -> list[tuple[int, int]]:
    """Edges (index pairs) of the upper hull of points sorted by ``x`` (monotone chain)."""
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross >= 0:  # a is on or below the chord o -> i
                hull.pop()
            else:
                break
        hull.append(i)
    return list(zip(hull[:-1], hull[1:]))


def _facet_gradients(u: GridFn) -> tuple[np.ndarray, np.ndarray]:
    """Candidate gradient per node: slope of an upper-hull facet lying above the node.

    Returns ``(grad, has_facet)``; nodes outside every upper facet (possible only
    through masking) have ``has_facet = False``.
    """
    X = u.coords()
    dom = u.domain
    grad = np.full(u.shape + (u.d,), np.nan)
    pts = X[dom]
    vals = u.values[dom]
    index = np.argwhere(dom)
    if u.d == 1:
        order = np.argsort(pts[:, 0], kind="stable")
        xs, ys = pts[order, 0], vals[order]
        for i, j in _upper_hull_1d(xs, ys):
            slope = (ys[j] - ys[i]) / (xs[j] - xs[i])
            for k in range(i, j + 1):
                if np.isnan(grad[tuple(index[order[k]])][0]):
                    grad[tuple(index[order[k]])] = slope
        return grad, ~np.isnan(grad[..., 0])
    lifted = np.column_stack([pts, vals])
    try:
        hull = ConvexHull(lifted)
    except QhullError:
        # all lifted points coplanar: a single plane supports every node
        A = np.column_stack([pts, np.ones(len(pts))])
        coef = np.linalg.lstsq(A, vals, rcond=None)[0]
        grad[dom] = coef[:2]
        return grad, dom.copy()
    h = u.spacing
    lo = np.array(u.lower)
    scale = np.abs(hull.equations[:, :3]).max(axis=1)
    upper = hull.equations[:, 2] > 1e-12 * scale
    for simplex, eq in zip(hull.simplices[upper], hull.equations[upper]):
        p = -eq[:2] / eq[2]
        tri = pts[simplex]
        imin = np.maximum(np.floor((tri.min(axis=0) - lo) / h - 1e-9).astype(int), 0)
        imax = np.minimum(np.ceil((tri.max(axis=0) - lo) / h + 1e-9).astype(int), np.array(u.shape) - 1)
        sub = X[imin[0] : imax[0] + 1, imin[1] : imax[1] + 1]
        # barycentric containment (closed triangle, with slack for roundoff)
        T = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
        lam = np.linalg.solve(T, (sub - tri[0]).reshape(-1, 2).T).T
        inside = (lam.min(axis=1) >= -1e-9) & (lam.sum(axis=1) <= 1 + 1e-9)
        block = grad[imin[0] : imax[0] + 1, imin[1] : imax[1] + 1].reshape(-1, 2)
        fill = inside & np.isnan(block[:, 0])
        block[fill] = p
        grad[imin[0] : imax[0] + 1, imin[1] : imax[1] + 1] = block.reshape(sub.shape)
    grad[~dom] = np.nan
    return grad, ~np.isnan(grad[..., 0])


def upper_contact_set(u: GridFn, tol: float = CONTACT_TOL) -> ContactMask:
    """Nodes admitting a supporting plane from above (flat upper contact points).

    Each node gets the gradient of the upper-hull facet above it; the node is
    flagged iff that plane, lowered to the tightest support position computed
    exhaustively over all domain nodes, passes within ``tol * scale`` of the
    node value.  The stored gradient therefore certifies every flag.
    """
    grad, has = _facet_gradients(u)
    thr = tol * u.value_scale
    X = u.coords()
    flags = np.zeros(u.shape, dtype=bool)
    dom_X = X[u.domain]
    dom_v = u.values[u.domain]
    nodes = np.argwhere(has)
    if len(nodes):
        P = grad[has]
        # group identical gradients so each support offset is computed once
        uniq, inverse = np.unique(P, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        offsets = np.empty(len(uniq))
        chunk = max(1, 2**22 // max(len(dom_v), 1))
        for s in range(0, len(uniq), chunk):
            offsets[s : s + chunk] = (dom_v[None, :] - uniq[s : s + chunk] @ dom_X.T).max(axis=1)
        own = u.values[has] - np.einsum("ij,ij->i", P, X[has])
        ok = own >= offsets[inverse] - thr
        flags[tuple(nodes[ok].T)] = True
    grad = np.where(flags[..., None], grad, np.nan)
    return ContactMask(flags, grad, thr)


def lower_contact_set(v: GridFn, tol: float = CONTACT_TOL) -> ContactMask:
    """Supporting planes from below: the upper contact set of ``-v`` with gradients negated."""
    m = upper_contact_set(-v, tol)
    return ContactMask(m.flags, -m.gradients, m.tol, m.notes)


def slope_bound(u: GridFn) -> float:
    """A box ``[-L, L]^d`` containing a supporting gradient for every contact node."""
    vals = u.values[u.domain]
    osc = float(vals.max() - vals.min())
    return 2.0 * max(u.shape) * max(osc, 1e-300) / float(u.spacing.min())


def contact_oracle(u: GridFn, tol: float = CONTACT_TOL, max_boxes: int = 256) -> np.ndarray:
    """Contact flags by branch-and-bound search over gradients ``p`` in ``[-L, L]^d``.

    For a node ``x`` let ``m(p) = max_y u(y) - u(x) - <p, y - x>``; ``x`` is a
    contact node iff ``min_p m(p) <= tol * scale``.  Over a box of half-width
    ``r`` centred at ``c``, ``m >= max_y (u(y) - u(x) - <c, y - x> - r |y - x|_1)``,
    so boxes whose bound exceeds the threshold are discarded; the search
    refines the rest until a centre satisfies the threshold or nothing is left.
    When a node's admissible gradients form a segment the frontier would double
    at every level, so it is capped at ``max_boxes`` boxes with the smallest
    centre values.
    """
    thr = tol * u.value_scale
    L = slope_bound(u)
    X = u.coords()
    dom_X = X[u.domain]
    dom_v = u.values[u.domain]
    flags = np.zeros(u.shape, dtype=bool)
    corners = np.array(list(np.ndindex(*([2] * u.d)))) * 2 - 1
    for idx in zip(*np.nonzero(u.domain)):
        dy = dom_X - X[idx]
        rise = dom_v - u.values[idx]
        l1 = np.abs(dy).sum(-1)
        centers = np.zeros((1, u.d))
        r = L
        while len(centers):
            base = rise[None, :] - centers @ dy.T
            if np.any(base.max(axis=1) <= thr):
                flags[idx] = True
                break
            value = base.max(axis=1)
            keep = np.nonzero((base - r * l1[None, :]).max(axis=1) <= thr)[0]
            if r < 1e-14 * L:
                break
            if len(keep) > max_boxes:
                # m is convex: its sublevel sets sit around the smallest centre values
                keep = keep[np.argsort(value[keep], kind="stable")[:max_boxes]]
            r /= 2
            centers = (centers[keep][:, None, :] + r * corners[None, :, :]).reshape(-1, u.d)
    return flags


# ---------------------------------------------------------------------------
# Hessian stencils and Alexandrov estimates


class StencilUnavailable(ValueError):
    pass


def hessian_field(u: GridFn) -> np.ndarray:
    """Centered second differences at every node (NaN where the stencil leaves the domain).

    Mixed derivatives use the 4-point cross difference; exact on quadratics.
    """
    d, h, v = u.d, u.spacing, u.values
    H = np.full(u.shape + (d, d), np.nan)
    core = tuple([slice(1, -1)] * d)

    def shifted(offsets):
        return v[tuple(slice(1 + o, v.shape[k] - 1 + o) for k, o in enumerate(offsets))]

    for a in range(d):
        e = [0] * d
        e[a] = 1
        minus = [-x for x in e]
        H[core + (a, a)] = (shifted(e) - 2 * v[core] + shifted(minus)) / h[a] ** 2
    if d == 2:
        mixed = (shifted([1, 1]) - shifted([1, -1]) - shifted([-1, 1]) + shifted([-1, -1])) / (4 * h[0] * h[1])
        H[core + (0, 1)] = mixed
        H[core + (1, 0)] = mixed
    H[~u.stencil_mask] = np.nan
    return H


def hessian_stencil(u: GridFn, node) -> np.ndarray:
    node = tuple(int(i) for i in np.atleast_1d(node))
    if not u.stencil_mask[node]:
        raise StencilUnavailable(f"node {node} is within one cell of the boundary")
    return hessian_field(u)[node]


def _clipped_det(H: np.ndarray) -> np.ndarray:
    """``det(psd_clip(H))`` for a stack of symmetric matrices."""
    if H.size == 0:
        return np.zeros(H.shape[:-2])
    lam = np.linalg.eigvalsh(H)
    return np.prod(np.maximum(lam, 0.0), axis=-1)


@dataclass
class AlexandrovRecord:
    lhs: float
    rhs: float
    slack: float
    boundary_value: float
    integral: float
    contact_nodes: int
    integrated_nodes: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def alexandrov_check(u: GridFn) -> AlexandrovRecord:
    """``max_interior u <= max_boundary u + diam / |B_1|^(1/d) (sum det(-D^2 u)^+ h^d)^(1/d)``.

    The sum runs over upper-contact interior nodes with an available stencil.
    """
    contact = upper_contact_set(u)
    integrate = contact.flags & u.interior_mask & u.stencil_mask
    H = hessian_field(u)[integrate]
    integral = float(_clipped_det(-H).sum() * u.cell_volume)
    lhs = u.max_over(u.interior_mask)
    bd = u.max_over(u.boundary_mask)
    rhs = bd + u.diam / unit_ball_volume(u.d) ** (1.0 / u.d) * integral ** (1.0 / u.d)
    return AlexandrovRecord(lhs, rhs, rhs - lhs, bd, integral, contact.count, int(integrate.sum()))


def alexandrov_lower_check(v: GridFn) -> AlexandrovRecord:
    """``min_interior v >= min_boundary v - diam / |B_1|^(1/d) (sum det(D^2 v)^+ h^d)^(1/d)``."""
    r = alexandrov_check(-v)
    return AlexandrovRecord(-r.lhs, -r.rhs, r.slack, -r.boundary_value, r.integral, r.contact_nodes,
                            r.integrated_nodes)


@dataclass
class OscillationRecord:
    osc_in: float
    osc_bd: float
    error_term: float
    slack: float
    contact_nodes: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def oscillation_c11_check(w: GridFn) -> OscillationRecord:
    """``osc_interior w <= osc_boundary w + 2^(1-1/d) diam/|B_1|^(1/d) (sum |det D^2 w| h^d)^(1/d)``,

    the sum running over upper or lower contact nodes with stencils.
    """
    both = (upper_contact_set(w).flags | lower_contact_set(w).flags) & _integrable(w)
    H = hessian_field(w)[both]
    total = float(np.abs(np.linalg.det(H)).sum() * w.cell_volume) if H.size else 0.0
    d = w.d
    term = 2.0 ** (1 - 1 / d) * w.diam / unit_ball_volume(d) ** (1 / d) * total ** (1 / d)
    osc_in, osc_bd = w.osc_over(w.interior_mask), w.osc_over(w.boundary_mask)
    return OscillationRecord(osc_in, osc_bd, term, osc_bd + term - osc_in, int(both.sum()))


def _integrable(u: GridFn) -> np.ndarray:
    """Interior nodes where the Hessian stencil is available."""
    return u.interior_mask & u.stencil_mask


def semiconvexity_modulus(u: GridFn) -> float:
    """Smallest ``lam >= 0`` making every axis and diagonal second difference of
    ``u + lam |x|^2 / 2`` nonnegative (over stencils inside the domain)."""
    h, v, dom = u.spacing, u.values, u.domain
    steps = [np.eye(u.d, dtype=int)[k] for k in range(u.d)]
    if u.d == 2:
        steps += [np.array([1, 1]), np.array([1, -1])]
    worst = math.inf
    for s in steps:
        pad = [(1, 1)] * u.d
        vp = np.pad(v, pad)
        mp = np.pad(dom, pad, constant_values=False)
        def sl(o):
            return tuple(slice(1 + k, 1 + k + n) for k, n in zip(o, u.shape))

        ok = dom & mp[sl(s)] & mp[sl(-s)]
        if not ok.any():
            continue
        second = (vp[sl(s)] - 2 * v + vp[sl(-s)]) / float(np.sum((s * h) ** 2))
        worst = min(worst, float(second[ok].min()))
    return max(0.0, -worst) if math.isfinite(worst) else 0.0
