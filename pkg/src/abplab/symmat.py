"""Symmetric matrix helpers, spectra and deterministic samplers.

Matrices are plain ``numpy`` arrays of shape ``(n, n)``.  Every random
sampler draws from a Philox4x64 stream keyed by ``(seed, stream)`` so the
same call always returns the same matrix, independent of call order.
"""

from __future__ import annotations

import math
from typing import Literal

import numpy as np

PSDStyle = Literal["generic", "low_rank", "near_boundary"]
PSD_STYLES: tuple[str, ...] = ("generic", "low_rank", "near_boundary")


class EigenSolveError(ArithmeticError):
    """Jacobi sweeps did not reduce the off-diagonal mass below tolerance."""

    def __init__(self, sweeps: int, off_norm: float):
        super().__init__(f"Jacobi eigensolve did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")
        self.sweeps = sweeps
        self.off_norm = off_norm


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox counter-based generator keyed by ``seed * 2**64 + stream``."""
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    key = (int(seed) % 2**64) * 2**64 + int(stream) % 2**64
    return np.random.Generator(np.random.Philox(key=key))


def as_symmat(A, *, atol: float = 1e-12) -> np.ndarray:
    """Validate ``A`` as a finite symmetric square matrix and return a float copy."""
    A = np.array(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if np.max(np.abs(A - A.T), initial=0.0) > atol * (1.0 + np.abs(A).max()):
        raise ValueError("matrix is not symmetric")
    return 0.5 * (A + A.T)


def identity(n: int) -> np.ndarray:
    return np.eye(n)


def diag(values) -> np.ndarray:
    return np.diag(np.asarray(values, dtype=float))


def add(A, B) -> np.ndarray:
    return np.asarray(A, dtype=float) + np.asarray(B, dtype=float)


def scale(A, c: float) -> np.ndarray:
    return c * np.asarray(A, dtype=float)


def trace(A) -> float:
    return float(np.trace(A))


def det(A) -> float:
    return float(np.linalg.det(A))


def frobenius_norm(A) -> float:
    return float(np.linalg.norm(A))


def tol_scale(A) -> float:
    """The ``1 + ||A||_F`` scale used by every relative tolerance."""
    return 1.0 + frobenius_norm(A)


def conjugate(A, tau) -> np.ndarray:
    """``tau @ A @ tau.T``, re-symmetrized."""
    M = tau @ A @ tau.T
    return 0.5 * (M + M.T)


def eigenvalues(A, method: str = "lapack") -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending.

    ``method="jacobi"`` uses the self-contained cyclic Jacobi solver;
    the default uses LAPACK and also accepts stacks of matrices.
    """
    if method == "jacobi":
        return jacobi_eigh(A)[0]
    if method != "lapack":
        raise ValueError(f"unknown eigen method {method!r}")
    return np.linalg.eigvalsh(A)


def jacobi_eigh(A, tol: float = 1e-13, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition.

    Returns ``(values, Q)`` with values ascending and ``A = Q diag(values) Q^T``.
    Stops when the off-diagonal Frobenius norm is at most ``tol * ||A||_F``.
    """
    A = as_symmat(A)
    n = A.shape[0]
    M = A.copy()
    Q = np.eye(n)
    target = tol * np.linalg.norm(A)
    for sweep in range(max_sweeps + 1):
        off = float(np.linalg.norm(M - np.diag(np.diag(M))))
        if off <= target:
            order = np.argsort(np.diag(M), kind="stable")
            return np.diag(M)[order].copy(), Q[:, order]
        if sweep == max_sweeps:
            raise EigenSolveError(sweep, off)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = M[p, q]
                if apq == 0.0:
                    continue
                theta = (M[q, q] - M[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                rp, rq = M[p, :].copy(), M[q, :].copy()
                M[p, :] = c * rp - s * rq
                M[q, :] = s * rp + c * rq
                cp, cq = M[:, p].copy(), M[:, q].copy()
                M[:, p] = c * cp - s * cq
                M[:, q] = s * cp + c * cq
                M[p, q] = M[q, p] = 0.0
                qp, qq = Q[:, p].copy(), Q[:, q].copy()
                Q[:, p] = c * qp - s * qq
                Q[:, q] = s * qp + c * qq
    raise AssertionError("unreachable")


def elementary_symmetric(values, k: int) -> float | np.ndarray:
    """sigma_k of ``values`` along the last axis.

    Uses the coefficient recurrence for ``prod_i (t + lambda_i)``; works on
    stacked spectra as well.
    """
    lam = np.asarray(values, dtype=float)
    n = lam.shape[-1]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range 1..{n}")
    e = np.zeros(lam.shape[:-1] + (k + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        li = lam[..., i]
        top = min(i + 1, k)
        e[..., 1 : top + 1] = e[..., 1 : top + 1] + li[..., None] * e[..., 0:top]
    out = e[..., k]
    return float(out) if out.ndim == 0 else out


def elementary_symmetric_all(values) -> np.ndarray:
    """``sigma_0, ..., sigma_n`` of ``values`` along the last axis (``sigma_0 = 1``)."""
    lam = np.asarray(values, dtype=float)
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        e[..., 1 : i + 2] = e[..., 1 : i + 2] + lam[..., i, None] * e[..., 0 : i + 1]
    return e


def psd_clip(A) -> np.ndarray:
    """Clamp negative eigenvalues at zero; a PSD input is returned unchanged."""
    A = np.asarray(A, dtype=float)
    w, Q = np.linalg.eigh(A)
    if w.min() >= 0.0:
        return A.copy()
    out = (Q * np.maximum(w, 0.0)) @ Q.T
    return 0.5 * (out + out.T)


def psd_clip_batch(As: np.ndarray) -> np.ndarray:
    """Vectorized :func:`psd_clip` over a stack ``(m, n, n)``."""
    w, Q = np.linalg.eigh(As)
    out = np.einsum("mij,mj,mkj->mik", Q, np.maximum(w, 0.0), Q)
    out = 0.5 * (out + np.swapaxes(out, -1, -2))
    keep = w.min(axis=-1) >= 0.0
    out[keep] = As[keep]
    return out


def random_symmetric(n: int, seed: int, stream: int = 0) -> np.ndarray:
    """GOE-style symmetric matrix with standard-normal upper triangle."""
    g = generator(seed, stream)
    B = g.standard_normal((n, n))
    return np.triu(B) + np.triu(B, 1).T


def random_psd(n: int, seed: int, style: str = "generic", stream: int = 0) -> np.ndarray:
    """Positive semidefinite sample.

    * ``generic``: ``B B^T`` with standard-normal ``B``;
    * ``low_rank``: same with ``B`` of width ``ceil(n/2)``;
    * ``near_boundary``: generic, shifted so the smallest eigenvalue lies in ``[0, 1e-6]``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    g = generator(seed, stream)
    if style == "generic":
        B = g.standard_normal((n, n))
        A = B @ B.T
    elif style == "low_rank":
        B = g.standard_normal((n, math.ceil(n / 2)))
        A = B @ B.T
    elif style == "near_boundary":
        B = g.standard_normal((n, n))
        A = B @ B.T
        target = 1e-6 * g.random()
        A = A - (np.linalg.eigvalsh(A)[0] - target) * np.eye(n)
        # the shift itself can leave a roundoff-negative eigenvalue
        if np.linalg.eigvalsh(A)[0] < 0.0:
            A = A - np.linalg.eigvalsh(A)[0] * np.eye(n)
    else:
        raise ValueError(f"unknown PSD style {style!r}; expected one of {PSD_STYLES}")
    return 0.5 * (A + A.T)


def mixed_psd_batch(n: int, count: int, seed: int) -> np.ndarray:
    """``count`` PSD samples cycling through the three styles; sample ``i`` uses stream ``i``."""
    return np.stack([random_psd(n, seed, PSD_STYLES[i % 3], stream=i) for i in range(count)])


def random_orthogonal(n: int, seed: int, stream: int = 0) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed)."""
    g = generator(seed, stream)
    Z = g.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def to_dict(A) -> dict:
    """``{"n": n, "upper": [row-major upper triangle]}``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    iu = np.triu_indices(n)
    return {"n": n, "upper": [float(v) for v in A[iu]]}


def from_dict(data: dict) -> np.ndarray:
    n = int(data["n"])
    upper = np.asarray(data["upper"], dtype=float)
    if n < 1 or upper.shape != (n * (n + 1) // 2,):
        raise ValueError(f"upper triangle of length {upper.size} does not match n={n}")
    if not np.all(np.isfinite(upper)):
        raise ValueError("matrix has non-finite entries")
    A = np.zeros((n, n))
    A[np.triu_indices(n)] = upper
    return A + np.triu(A, 1).T
