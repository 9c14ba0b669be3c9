"""Homogeneous polynomial operators on symmetric matrices.

Every catalog operator is orthogonally invariant, so it is evaluated from the
spectrum of its argument (``spectral``), which also vectorizes over stacks of
spectra.  Garding I-eigenvalues come from the roots of the radial polynomial
``phi_A(t) = g(tI + A)``, interpolated at Chebyshev nodes and solved through
its companion matrix.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import symmat
from .report import CheckReport, SlackTracker

CONE_THETA = 1e-8


class NotHyperbolicAt(ArithmeticError):
    """``t -> g(tI + A)`` has non-real roots at ``A`` (beyond tolerance)."""

    def __init__(self, operator: "PolyOperator", A: np.ndarray, roots: np.ndarray, max_imag: float):
        super().__init__(f"{operator.spec} is not hyperbolic at A (max |Im root| = {max_imag:.3e})")
        self.operator = operator
        self.A = A
        self.roots = roots
        self.max_imag = max_imag


class NumericError(ArithmeticError):
    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(message)
        self.residual = residual


class PreconditionError(ValueError):
    pass


class PolyOperator:
    """Base class.  Subclasses define ``dim``, ``degree``, ``spec`` and
    either ``spectral`` (orthogonally invariant operators) or ``matrix_eval``."""

    dim: int
    cone = "garding"
    is_spectral = True

    @property
    def degree(self) -> int:
        raise NotImplementedError

    @property
    def spec(self) -> str:
        raise NotImplementedError

    def spectral(self, lam: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def radial_coeffs(self, lam: np.ndarray) -> np.ndarray:
        """Coefficients (lowest first) of ``t -> g(diag(lam) + tI)``, batched over leading axes."""
        raise NotImplementedError

    def matrix_eval(self, A: np.ndarray) -> float:
        return float(self.spectral(np.linalg.eigvalsh(A)))

    def __call__(self, A) -> float:
        A = np.asarray(A, dtype=float)
        if A.shape != (self.dim, self.dim):
            raise ValueError(f"{self.spec} expects a {self.dim}x{self.dim} matrix, got {A.shape}")
        if self.is_spectral:
            return float(self.spectral(np.linalg.eigvalsh(A)))
        return float(self.matrix_eval(A))

    def batch(self, As: np.ndarray) -> np.ndarray:
        """Evaluate on a stack ``(m, n, n)``."""
        As = np.asarray(As, dtype=float)
        if self.is_spectral:
            return np.asarray(self.spectral(np.linalg.eigvalsh(As)), dtype=float)
        return np.array([self.matrix_eval(A) for A in As])

    def _cache_identity(self):
        object.__setattr__(self, "value_at_identity", self(np.eye(self.dim)))

    def __str__(self):
        return self.spec


@dataclass(frozen=True)
class Det(PolyOperator):
    dim: int
    value_at_identity: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_dim(self.dim)
        self._cache_identity()

    @property
    def degree(self):
        return self.dim

    @property
    def spec(self):
        return f"det:n={self.dim}"

    def spectral(self, lam):
        return np.prod(lam, axis=-1)

    def radial_coeffs(self, lam):
        # prod_i (t + lam_i) = sum_j sigma_{n-j}(lam) t^j
        return symmat.elementary_symmetric_all(lam)[..., ::-1]


@dataclass(frozen=True)
class Trace(PolyOperator):
    dim: int
    value_at_identity: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_dim(self.dim)
        self._cache_identity()

    @property
    def degree(self):
        return 1

    @property
    def spec(self):
        return f"trace:n={self.dim}"

    def spectral(self, lam):
        return np.sum(lam, axis=-1)

    def radial_coeffs(self, lam):
        lam = np.asarray(lam, dtype=float)
        return np.stack([lam.sum(axis=-1), np.full(lam.shape[:-1], float(self.dim))], axis=-1)


@dataclass(frozen=True)
class KHessian(PolyOperator):
    k: int
    dim: int
    value_at_identity: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_dim(self.dim)
        if not 1 <= self.k <= self.dim:
            raise ValueError(f"sigma needs 1 <= k <= n, got k={self.k}, n={self.dim}")
        self._cache_identity()

    @property
    def degree(self):
        return self.k

    @property
    def spec(self):
        return f"sigma:k={self.k},n={self.dim}"

    def spectral(self, lam):
        return symmat.elementary_symmetric(lam, self.k)

    def radial_coeffs(self, lam):
        # sigma_k(lam + t) = sum_m C(n-k+m, m) sigma_{k-m}(lam) t^m
        e = symmat.elementary_symmetric_all(lam)
        n, k = self.dim, self.k
        weights = np.array([math.comb(n - k + m, m) for m in range(k + 1)], dtype=float)
        return e[..., k::-1] * weights


@dataclass(frozen=True)
class PFoldSum(PolyOperator):
    p: int
    dim: int
    value_at_identity: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_dim(self.dim)
        if not 1 <= self.p <= self.dim:
            raise ValueError(f"pfold needs 1 <= p <= n, got p={self.p}, n={self.dim}")
        self._cache_identity()

    @property
    def degree(self):
        return math.comb(self.dim, self.p)

    @property
    def spec(self):
        return f"pfold:p={self.p},n={self.dim}"

    def subsets(self) -> np.ndarray:
        return np.array(list(itertools.combinations(range(self.dim), self.p)), dtype=int)

    def factors(self, A) -> np.ndarray:
        """The linear factors ``lambda_i1 + ... + lambda_ip`` of the product, sorted.

        These are ``p`` times the Garding eigenvalues, since
        ``g(tI + A) = p^N prod (t + factor / p)``.
        """
        lam = np.linalg.eigvalsh(symmat.as_symmat(A))
        return np.sort(lam[self.subsets()].sum(axis=-1))

    def spectral(self, lam):
        lam = np.asarray(lam, dtype=float)
        return np.prod(lam[..., self.subsets()].sum(axis=-1), axis=-1)

    def radial_coeffs(self, lam):
        sums = np.asarray(lam, dtype=float)[..., self.subsets()].sum(axis=-1)
        out = np.ones(sums.shape[:-1] + (1,))
        for j in range(sums.shape[-1]):
            out = poly_mul(out, np.stack([sums[..., j], np.full(sums.shape[:-1], float(self.p))], axis=-1))
        return out


@dataclass(frozen=True)
class NormSqDet(PolyOperator):
    """``||A||_F^2 det(A)``: I-central but not hyperbolic; its admissible cone is PSD."""

    dim: int
    value_at_identity: float = field(init=False, repr=False, compare=False)
    cone = "psd"

    def __post_init__(self):
        _check_dim(self.dim)
        self._cache_identity()

    @property
    def degree(self):
        return self.dim + 2

    @property
    def spec(self):
        return f"normsqdet:n={self.dim}"

    def spectral(self, lam):
        lam = np.asarray(lam, dtype=float)
        return np.sum(lam * lam, axis=-1) * np.prod(lam, axis=-1)

    def radial_coeffs(self, lam):
        lam = np.asarray(lam, dtype=float)
        quad = np.stack([np.sum(lam * lam, axis=-1), 2.0 * lam.sum(axis=-1),
                         np.full(lam.shape[:-1], float(self.dim))], axis=-1)
        return poly_mul(quad, symmat.elementary_symmetric_all(lam)[..., ::-1])


@dataclass(frozen=True)
class Product(PolyOperator):
    left: PolyOperator
    right: PolyOperator
    value_at_identity: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.left.dim != self.right.dim:
            raise ValueError(f"product factors act on different dimensions: {self.left.dim} vs {self.right.dim}")
        self._cache_identity()

    @property
    def dim(self):
        return self.left.dim

    @property
    def is_spectral(self):
        return self.left.is_spectral and self.right.is_spectral

    @property
    def cone(self):
        return "psd" if "psd" in (self.left.cone, self.right.cone) else "garding"

    @property
    def degree(self):
        return self.left.degree + self.right.degree

    @property
    def spec(self):
        return f"prod({self.left.spec},{self.right.spec})"

    def spectral(self, lam):
        return self.left.spectral(lam) * self.right.spectral(lam)

    def radial_coeffs(self, lam):
        return poly_mul(self.left.radial_coeffs(lam), self.right.radial_coeffs(lam))

    def matrix_eval(self, A):
        return self.left(A) * self.right(A)


@dataclass(frozen=True)
class RadialDerivative(PolyOperator):
    """``l``-th derivative of ``t -> g(tI + A)`` at ``t = 0``, via coefficient extraction."""

    base: PolyOperator
    l: int
    value_at_identity: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 1 <= self.l <= self.base.degree - 1:
            raise ValueError(f"rderiv order must lie in 1..{self.base.degree - 1}, got {self.l}")
        self._cache_identity()

    @property
    def dim(self):
        return self.base.dim

    @property
    def is_spectral(self):
        return self.base.is_spectral

    @property
    def degree(self):
        return self.base.degree - self.l

    @property
    def spec(self):
        return f"rderiv({self.base.spec},l={self.l})"

    def spectral(self, lam):
        return math.factorial(self.l) * self.base.radial_coeffs(lam)[..., self.l]

    def radial_coeffs(self, lam):
        c = self.base.radial_coeffs(lam)
        l, N = self.l, self.base.degree
        falling = np.array([math.perm(m + l, l) for m in range(N - l + 1)], dtype=float)
        return c[..., l:] * falling

    def matrix_eval(self, A):
        return math.factorial(self.l) * radial_poly_coeffs(self.base, A)[self.l]


@dataclass(frozen=True)
class Polynomial(PolyOperator):
    """User-supplied homogeneous polynomial, evaluated on matrices by ``fn``."""

    dim: int
    deg: int
    fn: Callable = field(compare=False)
    name: str = "custom"
    value_at_identity: float = field(init=False, repr=False, compare=False)
    is_spectral = False

    def __post_init__(self):
        _check_dim(self.dim)
        self._cache_identity()

    @property
    def degree(self):
        return self.deg

    @property
    def spec(self):
        return f"{self.name}:n={self.dim}"

    def matrix_eval(self, A):
        return float(self.fn(A))


def detprobe(n: int) -> Polynomial:
    """``det(A) - tr(A)^n / (2 n^n)``: I-central, positive at I, not Dirichlet.

    A negative control for the coefficient condition.
    """
    return Polynomial(n, n, lambda A: np.linalg.det(A) - np.trace(A) ** n / (2.0 * n**n), name="probe")


def poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of coefficient arrays (lowest degree first) along the last axis."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    lead = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    out = np.zeros(lead + (a.shape[-1] + b.shape[-1] - 1,))
    for i in range(a.shape[-1]):
        out[..., i : i + b.shape[-1]] += a[..., i : i + 1] * b
    return out


def _check_dim(n):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")


# ---------------------------------------------------------------------------
# radial polynomial phi_A(t) = g(tI + A)


@lru_cache(maxsize=None)
def _cheb_system(N: int):
    s = np.cos(np.pi * (np.arange(N + 1) + 0.5) / (N + 1))
    V = s[:, None] ** np.arange(N + 1)
    s_check = np.cos(np.pi * (np.arange(N) + 1.0) / (N + 1)) if N > 0 else np.array([0.5])
    V_check = s_check[:, None] ** np.arange(N + 1)
    return s, np.linalg.inv(V), s_check, V_check


def _fit_radial(values_fn, radius: np.ndarray, N: int, with_residual: bool = False):
    """Coefficients (in ``s = t / radius``) of the degree-``N`` polynomial ``values_fn``.

    ``values_fn`` maps an array of ``t`` of shape ``(m, k)`` to values of the
    same shape.  ``radius`` has shape ``(m,)``.  The fit is audited at ``N``
    interleaved nodes; ``with_residual`` also returns the audit residual and
    the value magnitude per row.
    """
    s, Vinv, s_check, V_check = _cheb_system(N)
    vals = values_fn(radius[:, None] * s[None, :])
    d = vals @ Vinv.T
    refit = d @ V_check.T
    actual = values_fn(radius[:, None] * s_check[None, :])
    big = np.maximum(np.abs(vals).max(axis=-1), np.abs(actual).max(axis=-1))
    resid = np.abs(refit - actual).max(axis=-1)
    bad = resid > 1e-8 * np.maximum(big, 1e-300)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NumericError(
            f"radial interpolation refit residual {resid[i]:.3e} exceeds 1e-8 * {big[i]:.3e}",
            residual=float(resid[i]),
        )
    return (d, resid, big) if with_residual else d


def _interpolated_spectral_coeffs(g: PolyOperator, lam: np.ndarray) -> np.ndarray:
    """``c_0..c_N`` of ``phi(t) = g(diag(lam) + tI)`` by interpolation, for stacks of spectra."""
    lam = np.asarray(lam, dtype=float)
    flat = lam.reshape(-1, lam.shape[-1])
    N = g.degree
    radius = 1.0 + np.abs(flat).max(axis=-1)

    def values(t):
        return g.spectral(flat[:, None, :] + t[..., None])

    d = _fit_radial(values, radius, N)
    c = d / radius[:, None] ** np.arange(N + 1)
    return c.reshape(lam.shape[:-1] + (N + 1,))


def radial_poly_coeffs(g: PolyOperator, A, method: str = "auto") -> np.ndarray:
    """Coefficients ``c_0..c_N`` of ``phi_A(t) = g(tI + A)``, lowest degree first.

    ``method="exact"`` builds them from the spectrum of ``A`` (available for
    every spectral operator); ``"interpolate"`` samples ``phi_A`` at ``N + 1``
    Chebyshev nodes on ``[-R, R]``, ``R = 1 + spectral_radius(A)``, and audits
    the fit at ``N`` interleaved nodes.  ``"auto"`` prefers ``exact``.
    """
    A = _check_arg(g, A)
    if method not in ("auto", "exact", "interpolate"):
        raise ValueError(f"unknown method {method!r}")
    if g.is_spectral and method != "interpolate":
        return g.radial_coeffs(np.linalg.eigvalsh(A))
    if method == "exact":
        raise ValueError(f"{g.spec} has no exact radial expansion")
    if g.is_spectral:
        return _interpolated_spectral_coeffs(g, np.linalg.eigvalsh(A))
    N = g.degree
    radius = np.array([1.0 + np.abs(np.linalg.eigvalsh(A)).max()])
    eye = np.eye(g.dim)

    def values(t):
        return np.array([[g.matrix_eval(A + ti * eye) for ti in row] for row in t])

    d = _fit_radial(values, radius, N)[0]
    return d / radius[0] ** np.arange(N + 1)


def _check_arg(g: PolyOperator, A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (g.dim, g.dim):
        raise ValueError(f"{g.spec} expects a {g.dim}x{g.dim} matrix, got {A.shape}")
    return A


def evaluate(g: PolyOperator, A) -> float:
    return g(A)


# ---------------------------------------------------------------------------
# Garding eigenvalues and cone membership


@dataclass(frozen=True)
class GardingSpectrum:
    values: np.ndarray  # ascending
    max_imag: float
    multiplicities: tuple = ()

    def __len__(self):
        return len(self.values)

    @property
    def min(self) -> float:
        return float(self.values[0])

    @property
    def scale(self) -> float:
        return 1.0 + float(np.abs(self.values).max())


def _cluster_roots(roots: np.ndarray, noise: float) -> list[list[int]]:
    """Group roots whose spread is consistent with one perturbed multiple root.

    A perturbation of size ``noise`` (sup-norm on [-1, 1], monic scale) moves an
    ``m``-fold root ``r`` of ``(s - r)^m q(s)`` by about ``(noise / |q(r)|)^(1/m)``.
    Clusters are first merged bottom-up while their spread stays inside four
    times that radius; a cluster whose mean is still complex then absorbs its
    nearest neighbours until it is admissible (the caller checks realness).
    """

    def spread(members):
        pts = roots[members]
        return np.abs(pts[:, None] - pts[None, :]).max()

    def radius(members):
        center = roots[members].mean()
        outside = np.delete(roots, members)
        if outside.size and np.abs(center - outside).min() <= spread(members):
            return 0.0  # another root sits inside the cluster: not one perturbed multiple root
        q = np.prod(np.abs(center - outside)) if outside.size else 1.0
        return 4.0 * (noise / max(q, 1e-300)) ** (1.0 / len(members))

    clusters = [[int(i)] for i in np.argsort(roots.real, kind="stable")]
    while True:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                members = clusters[a] + clusters[b]
                s = spread(members)
                if s <= radius(members) and (best is None or s < best[0]):
                    best = (s, a, b)
        if best is None:
            break
        _, a, b = best
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]
    return clusters, spread, radius


def garding_eigenvalues(g: PolyOperator, A, tol: float = 1e-7) -> GardingSpectrum:
    """Garding I-eigenvalues ``lambda_k = -t_k`` of ``A``, ascending.

    The radial polynomial is expanded around ``t = -tr(A)/n`` so that the root
    scale is ``1 + spectral_radius(A - tr(A)/n I)``.  Roots whose spread is
    within the numerical resolution of a multiple root are merged and
    reported as their (well-conditioned) mean.  Raises ``NotHyperbolicAt``
    when a root is not real to ``tol * (1 + |root|)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = _check_arg(g, A)
    n, N = g.dim, g.degree
    center = np.trace(A) / n
    A0 = A - center * np.eye(n)
    lam0 = np.linalg.eigvalsh(A0)
    R0 = np.array([1.0 + np.abs(lam0).max()])
    if g.is_spectral:
        d = g.radial_coeffs(lam0) * R0[0] ** np.arange(N + 1)
        resid, big = 0.0, float(np.abs(d).sum())
    else:
        eye = np.eye(n)

        def values(u):
            return np.array([[g.matrix_eval(A0 + ui * eye) for ui in row] for row in u])

        d, resid, big = _fit_radial(values, R0, N, with_residual=True)
        d, resid, big = d[0], resid[0], big[0]
    if N == 1:
        s_roots = np.array([-d[0] / d[1]], dtype=complex)
    else:
        companion = np.zeros((N, N))
        companion[1:, :-1] = np.eye(N - 1)
        companion[:, -1] = -d[:-1] / d[-1]
        s_roots = np.linalg.eigvals(companion).astype(complex)
    t_roots = R0[0] * s_roots - center
    max_imag = float(np.abs(t_roots.imag).max())
    noise = 4.0 * max(resid, 1e-15 * big) / abs(d[-1])

    def is_real(members):
        t_mean = t_roots[members].mean()
        return abs(t_mean.imag) <= tol * (1.0 + abs(t_mean))

    clusters, spread, radius = _cluster_roots(s_roots, noise)
    i = 0
    while i < len(clusters):
        if is_real(clusters[i]):
            i += 1
            continue
        members = list(clusters[i])
        absorbed = []
        mean = s_roots[members].mean()
        rest = sorted((j for j in range(len(clusters)) if j != i),
                      key=lambda j: np.abs(s_roots[clusters[j]] - mean).min())
        for j in rest:
            members += clusters[j]
            absorbed.append(j)
            if is_real(members) and spread(members) <= radius(members):
                break
        else:
            raise NotHyperbolicAt(g, A, t_roots, max_imag)
        clusters[i] = members
        for j in sorted(absorbed, reverse=True):
            del clusters[j]
            if j < i:
                i -= 1
        i += 1

    values_out, mults = [], []
    for members in clusters:
        values_out.extend([-t_roots[members].mean().real] * len(members))
        mults.append(len(members))
    return GardingSpectrum(np.sort(np.array(values_out)), max_imag, tuple(sorted(mults)))


@dataclass(frozen=True)
class ConePosition:
    tag: str  # "Interior" | "Boundary" | "Outside"
    min_garding_eig: float

    @property
    def in_closure(self) -> bool:
        return self.tag != "Outside"


def _position(min_eig: float, scale: float, theta: float = CONE_THETA) -> ConePosition:
    if min_eig > theta * scale:
        return ConePosition("Interior", min_eig)
    if min_eig < -theta * scale:
        return ConePosition("Outside", min_eig)
    return ConePosition("Boundary", min_eig)


def cone_contains(g: PolyOperator, A) -> ConePosition:
    """Position of ``A`` relative to the Garding cone of ``g``."""
    spec = garding_eigenvalues(g, A)
    return _position(spec.min, spec.scale)


def psd_position(A) -> ConePosition:
    """Same thresholds as :func:`cone_contains`, for the PSD cone."""
    lam = np.linalg.eigvalsh(A)
    return _position(float(lam[0]), 1.0 + float(np.abs(lam).max()))


def boundary_project(g: PolyOperator, A) -> np.ndarray:
    """``A - lambda_min^g(A) I``: the shift of ``A`` onto the cone boundary."""
    A = _check_arg(g, A)
    lam_min = garding_eigenvalues(g, A).min
    return A - lam_min * np.eye(g.dim)


def is_I_central(g: PolyOperator, tol: float = 1e-6, h: float = 1e-5) -> float | None:
    """Return ``k`` if ``D_I g = kI`` (``k > 0``) within ``tol * (1 + k)``, else ``None``.

    The gradient is estimated by central differences along each symmetric
    coordinate direction with one Richardson step (``h`` and ``h/2``).
    """
    n = g.dim
    eye = np.eye(n)
    grad = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0

            def central(step):
                return (g(eye + step * E) - g(eye - step * E)) / (2.0 * step)

            deriv = (4.0 * central(h / 2) - central(h)) / 3.0
            # <grad, E_ij + E_ji> = 2 grad_ij off the diagonal
            grad[i, j] = grad[j, i] = deriv if i == j else deriv / 2.0
    k = float(np.trace(grad) / n)
    if k <= 0 or np.linalg.norm(grad - k * eye) > tol * (1.0 + k):
        return None
    return k


def is_dirichlet(g: PolyOperator, samples: int = 64, seed: int = 0) -> CheckReport:
    """Sample PSD matrices and check that all their Garding eigenvalues are >= 0.

    Slack per sample is ``min lambda^g / (1 + max |lambda^g|)``; a sample where
    ``g`` is not hyperbolic counts as a failure with slack ``-max_imag / scale``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    tracker = SlackTracker()
    non_hyperbolic = 0
    for i in range(samples):
        style = symmat.PSD_STYLES[i % 3]
        P = symmat.random_psd(g.dim, seed, style, stream=i)
        try:
            spec = garding_eigenvalues(g, P)
            slack = spec.min / spec.scale
            tracker.update(slack, {"sample": i, "style": style, "A": symmat.to_dict(P)})
        except NotHyperbolicAt as exc:
            non_hyperbolic += 1
            scale = 1.0 + float(np.abs(exc.roots).max())
            tracker.update(-exc.max_imag / scale,
                           {"sample": i, "style": style, "A": symmat.to_dict(P), "reason": "NotHyperbolicAt"})
    notes = [f"{non_hyperbolic} samples not hyperbolic"] if non_hyperbolic else []
    return CheckReport("dirichlet", g.spec, samples, tracker.min_slack, 1e-7, tracker.witness,
                       params={"seed": seed, "scale": "1 + max|garding eigenvalue|"}, notes=notes)


def sample_closed_cone(g: PolyOperator, seed: int, index: int) -> np.ndarray:
    """A point of the closed Garding cone: boundary projection of a random
    symmetric matrix, shifted by ``0``, a moderate, or a large multiple of I."""
    M = symmat.random_symmetric(g.dim, seed, stream=index)
    B = boundary_project(g, M)
    r = symmat.generator(seed, 2**32 + index).random()
    shift = (0.0, r, 3.0 + r)[index % 3] * (1.0 + np.linalg.norm(B))
    return B + shift * np.eye(g.dim)


def degenerate_ellipticity_check(g: PolyOperator, samples: int = 64, seed: int = 0) -> CheckReport:
    """``g(A + P) - g(A) >= 0`` on sampled ``A`` in the closed cone and PSD ``P``.

    Slack is the gap divided by ``(1 + ||A||_F + ||P||_F)^N``.
    """
    tracker = SlackTracker()
    failures = []
    for i in range(samples):
        try:
            A = sample_closed_cone(g, seed, i)
        except NotHyperbolicAt as exc:
            tracker.update(-exc.max_imag, {"sample": i, "reason": "NotHyperbolicAt", "A": symmat.to_dict(exc.A)})
            failures.append(i)
            continue
        P = symmat.random_psd(g.dim, seed, symmat.PSD_STYLES[i % 3], stream=2**33 + i)
        gap = g(A + P) - g(A)
        scale = (1.0 + np.linalg.norm(A) + np.linalg.norm(P)) ** g.degree
        tracker.update(gap / scale, {"sample": i, "A": symmat.to_dict(A), "P": symmat.to_dict(P), "gap": gap})
    notes = [f"hyperbolicity failed at samples {failures}"] if failures else []
    return CheckReport("ellipticity", g.spec, samples, tracker.min_slack, 1e-8, tracker.witness,
                       params={"seed": seed, "scale": "(1 + ||A||_F + ||P||_F)^N"}, notes=notes)


def tameness_gap(g: PolyOperator, A, eta: float, normalized: bool = False) -> float:
    """``g(A + eta I) - g(A) - g(I) eta^N`` for ``A`` in the closed admissible cone.

    With ``normalized=True`` the subtracted term is ``eta^N`` (no ``g(I)``
    factor).  The admissible cone is the Garding cone, or PSD for operators
    whose ``cone`` is ``"psd"``.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    A = _check_arg(g, A)
    position = psd_position(A) if g.cone == "psd" else cone_contains(g, A)
    if not position.in_closure:
        raise PreconditionError(f"A is outside the closed cone of {g.spec} (min eigenvalue {position.min_garding_eig:.3e})")
    lead = 1.0 if normalized else g.value_at_identity
    return g(A + eta * np.eye(g.dim)) - g(A) - lead * eta**g.degree


# ---------------------------------------------------------------------------
# operator grammar

_LEAF_PARAMS = {
    "det": ("n",),
    "trace": ("n",),
    "sigma": ("k", "n"),
    "pfold": ("p", "n"),
    "normsqdet": ("n",),
    "probe": ("n",),
}
VALID_FORMS = (
    "det:n=3",
    "trace:n=3",
    "sigma:k=2,n=4",
    "pfold:p=2,n=3",
    "normsqdet:n=2",
    "probe:n=3",
    "prod(det:n=3,sigma:k=1,n=3)",
    "rderiv(det:n=4,l=2)",
)


class OperatorSpecError(ValueError):
    def __init__(self, text: str, reason: str):
        super().__init__(f"cannot parse operator {text!r}: {reason}; valid forms: {', '.join(VALID_FORMS)}")


def _split_top(text: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return [p.strip() for p in parts]


def _build_leaf(name: str, params: dict, text: str) -> PolyOperator:
    expected = _LEAF_PARAMS[name]
    if set(params) != set(expected):
        raise OperatorSpecError(text, f"{name} takes parameters {expected}, got {tuple(params)}")
    if name == "det":
        return Det(params["n"])
    if name == "trace":
        return Trace(params["n"])
    if name == "sigma":
        return KHessian(params["k"], params["n"])
    if name == "pfold":
        return PFoldSum(params["p"], params["n"])
    if name == "normsqdet":
        return NormSqDet(params["n"])
    return detprobe(params["n"])


_PARAM = re.compile(r"^([a-z]+)=(\d+)$")


def _parse_args(body: str, text: str) -> tuple[list[PolyOperator], dict]:
    """Split a combinator body into operands and trailing ``key=value`` parameters.

    A bare ``key=value`` piece continues the previous leaf operand when that
    leaf accepts the key and has not set it yet; otherwise it belongs to the
    combinator itself.
    """
    operands: list[list] = []  # [name, params] for leaves, [op] for nested
    extra: dict = {}
    for piece in _split_top(body):
        m = _PARAM.match(piece)
        if m:
            key, value = m.group(1), int(m.group(2))
            last = operands[-1] if operands else None
            if (not extra and last is not None and len(last) == 2
                    and key in _LEAF_PARAMS[last[0]] and key not in last[1]):
                last[1][key] = value
            else:
                extra[key] = value
            continue
        if extra:
            raise OperatorSpecError(text, "operands must precede parameters")
        if "(" in piece:
            operands.append([parse_operator(piece)])
            continue
        name, _, rest = piece.partition(":")
        if name not in _LEAF_PARAMS or not rest:
            raise OperatorSpecError(text, f"unknown operand {piece!r}")
        m = _PARAM.match(rest)
        if not m:
            raise OperatorSpecError(text, f"bad parameter in {piece!r}")
        operands.append([name, {m.group(1): int(m.group(2))}])
    built = [o[0] if len(o) == 1 else _build_leaf(o[0], o[1], text) for o in operands]
    return built, extra


def parse_operator(text: str) -> PolyOperator:
    """Parse the catalog grammar, e.g. ``"prod(det:n=3,sigma:k=1,n=3)"``."""
    text = text.strip()
    try:
        m = re.fullmatch(r"(prod|rderiv)\((.*)\)", text)
        if m:
            operands, extra = _parse_args(m.group(2), text)
            if m.group(1) == "prod":
                if len(operands) < 2 or extra:
                    raise OperatorSpecError(text, "prod takes two or more operators and no parameters")
                op = operands[0]
                for nxt in operands[1:]:
                    op = Product(op, nxt)
                return op
            if len(operands) != 1 or set(extra) != {"l"}:
                raise OperatorSpecError(text, "rderiv takes one operator and l=<order>")
            return RadialDerivative(operands[0], extra["l"])
        name, _, rest = text.partition(":")
        if name not in _LEAF_PARAMS:
            raise OperatorSpecError(text, f"unknown operator {name!r}")
        params = {}
        for piece in rest.split(",") if rest else []:
            pm = _PARAM.match(piece.strip())
            if not pm or pm.group(1) in params:
                raise OperatorSpecError(text, f"bad parameter {piece!r}")
            params[pm.group(1)] = int(pm.group(2))
        return _build_leaf(name, params, text)
    except OperatorSpecError:
        raise
    except ValueError as exc:
        raise OperatorSpecError(text, str(exc)) from exc


def catalog(max_n: int = 4) -> list[PolyOperator]:
    """The I-central Garding-Dirichlet catalog up to dimension ``max_n``."""
    ops: list[PolyOperator] = []
    for n in range(1, max_n + 1):
        ops.append(Det(n))
        ops.append(Trace(n))
        ops.extend(KHessian(k, n) for k in range(1, n + 1))
        ops.extend(PFoldSum(p, n) for p in range(1, n + 1))
        ops.extend(Product(Det(n), KHessian(k, n)) for k in range(1, n + 1))
        ops.extend(RadialDerivative(Det(n), l) for l in range(1, n))
    return ops
