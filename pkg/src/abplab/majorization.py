"""Determinant majorization and related inequality testers.

The central quantity is the majorization gap

    g(A)^(1/N) - g(I)^(1/N) det(A)^(1/n),    A >= 0,

which is nonnegative for I-central Garding-Dirichlet operators and, more
generally, for I-central operators satisfying the coefficient condition.
Sweeps report slacks normalized by ``1 + ||A||_F`` (the gap is homogeneous of
degree one).
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import symmat
from .operators import NumericError, PolyOperator, PreconditionError, Trace, is_dirichlet, is_I_central
from .report import CheckReport

PSD_SLACK = 1e-6
DM_TOL = 1e-9


def _signed_root(x: np.ndarray, N: int) -> np.ndarray:
    return np.sign(x) * np.abs(x) ** (1.0 / N)


def _gap_from_spectra(g: PolyOperator, lam: np.ndarray, As: np.ndarray | None = None) -> np.ndarray:
    """Gaps for a stack of PSD spectra (``As`` are the matrices, needed for
    non-spectral operators)."""
    n, N = g.dim, g.degree
    scale = 1.0 + np.sqrt(np.sum(lam * lam, axis=-1))
    if g.is_spectral:
        gv = g.spectral(lam)
    else:
        gv = g.batch(As)
    gv = np.where((gv < 0) & (gv >= -1e-10 * scale**N), 0.0, gv)
    dv = np.prod(lam, axis=-1)
    return _signed_root(gv, N) - g.value_at_identity ** (1.0 / N) * dv ** (1.0 / n)


def _clip_stack(As: np.ndarray):
    """PSD-clip a stack; returns clipped matrices, their clipped spectra and the raw minimum eigenvalues."""
    w, Q = np.linalg.eigh(As)
    scale = 1.0 + np.linalg.norm(As, axis=(-2, -1))
    if np.any(w[..., 0] < -PSD_SLACK * scale):
        i = int(np.argmax(w[..., 0] < -PSD_SLACK * scale))
        raise PreconditionError(f"matrix {i} is not PSD (smallest eigenvalue {w[i, 0]:.3e})")
    wc = np.maximum(w, 0.0)
    clipped = np.einsum("mij,mj,mkj->mik", Q, wc, Q)
    return 0.5 * (clipped + np.swapaxes(clipped, -1, -2)), wc


def dm_gap(g: PolyOperator, A) -> float:
    """``g(A)^(1/N) - g(I)^(1/N) det(A)^(1/n)`` for PSD ``A``.

    Eigenvalues down to ``-1e-6 (1 + ||A||_F)`` are clipped to zero; anything
    more negative raises :class:`PreconditionError`.
    """
    A = symmat.as_symmat(A)
    if A.shape != (g.dim, g.dim):
        raise ValueError(f"{g.spec} expects a {g.dim}x{g.dim} matrix, got {A.shape}")
    clipped, lam = _clip_stack(A[None])
    return float(_gap_from_spectra(g, lam, clipped)[0])


def dm_gap_batch(g: PolyOperator, As: np.ndarray) -> np.ndarray:
    clipped, lam = _clip_stack(np.asarray(As, dtype=float))
    return _gap_from_spectra(g, lam, clipped)


def _normalized(g: PolyOperator, As: np.ndarray) -> np.ndarray:
    return dm_gap_batch(g, As) / (1.0 + np.linalg.norm(As, axis=(-2, -1)))


def hunt(g: PolyOperator, A0: np.ndarray, max_iter: int = 200, step: float = 0.25, min_step: float = 1e-6):
    """Derivative-free descent on the normalized gap from ``A0``.

    Each iteration tries ``+-step`` on every upper-triangle coordinate
    (symmetrically), projects to PSD and rescales to unit Frobenius norm; the
    best improving move is taken, otherwise the step is halved.
    Returns ``(best_matrix, best_slack, iterations)``.
    """
    n = g.dim
    iu = np.triu_indices(n)
    moves = np.zeros((len(iu[0]), n, n))
    for m, (i, j) in enumerate(zip(*iu)):
        moves[m, i, j] = moves[m, j, i] = 1.0
    moves = np.concatenate([moves, -moves])

    A = A0 / max(np.linalg.norm(A0), 1e-300)
    best = float(_normalized(g, A[None])[0])
    it = 0
    for it in range(1, max_iter + 1):
        cand = symmat.psd_clip_batch(A[None] + step * moves)
        norms = np.linalg.norm(cand, axis=(-2, -1))
        ok = norms > 1e-12
        if not np.any(ok):
            step /= 2
            continue
        cand = cand[ok] / norms[ok, None, None]
        vals = _normalized(g, cand)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, A = float(vals[k]), cand[k]
        else:
            step /= 2
            if step < min_step:
                break
    return A, best, it


def _precheck(g: PolyOperator, seed: int, certificate: CheckReport | None) -> str | None:
    if is_I_central(g) is None:
        return "operator is not I-central"
    if certificate is not None:
        return _certificate_problem(g, certificate)
    report = is_dirichlet(g, samples=32, seed=seed)
    if not report.passed:
        return "operator failed the Garding-Dirichlet precheck"
    return None


def dm_sweep(
    g: PolyOperator,
    samples: int = 10_000,
    seed: int = 0,
    hunt_mode: bool = False,
    waive_prechecks: bool = False,
    certificate: CheckReport | None = None,
    tolerance: float = DM_TOL,
) -> CheckReport:
    """Majorization gap over the mixed PSD sampler, optionally followed by a
    violation hunt from the 10 worst samples.

    The operator must be I-central and pass either the Dirichlet precheck or,
    for non-hyperbolic operators, carry a passing coefficient-condition
    ``certificate``; ``waive_prechecks`` skips both (hunt experiments only).
    """
    start = time.perf_counter()
    params = {"seed": seed, "n": g.dim, "degree": g.degree, "g(I)": g.value_at_identity,
              "hunt": hunt_mode, "scale": "1 + ||A||_F"}
    if not waive_prechecks:
        problem = _precheck(g, seed, certificate)
        if problem:
            return CheckReport("majorize", g.spec, 0, math.nan, tolerance, params=params, skipped=problem)
    As = symmat.mixed_psd_batch(g.dim, samples, seed)
    slack = _normalized(g, As)
    worst = int(np.argmin(slack))
    min_slack = float(slack[worst])
    witness = {"sample": worst, "style": symmat.PSD_STYLES[worst % 3], "A": symmat.to_dict(As[worst])}
    notes = []
    if g.degree == 1:
        notes.append("linear operator: the gap is the AM-GM form tr(A) - n det(A)^(1/n); "
                     "the weaker tr(A) >= det(A)^(1/n) follows")
    if hunt_mode:
        order = np.argsort(slack, kind="stable")[:10]
        for idx in order:
            A, val, iters = hunt(g, As[idx])
            if val < min_slack:
                min_slack = val
                witness = {"sample": int(idx), "hunt": True, "iterations": iters, "A": symmat.to_dict(A)}
        notes.append("hunt: coordinate descent from the 10 worst samples")
    return CheckReport("majorize", g.spec, samples, min_slack, tolerance, witness, params, notes,
                       elapsed=time.perf_counter() - start)


def amgm_gap(A) -> float:
    """``tr(A) - n det(A)^(1/n)``: the majorization gap of the trace."""
    A = symmat.as_symmat(A)
    return dm_gap(Trace(A.shape[0]), A)


# ---------------------------------------------------------------------------
# Maclaurin chain


def _psd_spectrum(A) -> np.ndarray:
    A = symmat.as_symmat(A)
    lam = np.linalg.eigvalsh(A)
    if lam[0] < -PSD_SLACK * symmat.tol_scale(A):
        raise PreconditionError(f"A is not PSD (smallest eigenvalue {lam[0]:.3e})")
    return np.maximum(lam, 0.0)


def _normalized_mean(lam: np.ndarray, k: int) -> np.ndarray:
    n = lam.shape[-1]
    e = np.maximum(symmat.elementary_symmetric(lam, k), 0.0)
    return (e / math.comb(n, k)) ** (1.0 / k)


def maclaurin_gap(A, k: int, l: int) -> float:
    """``(sigma_k / C(n,k))^(1/k) - (sigma_l / C(n,l))^(1/l)`` for PSD ``A``."""
    lam = _psd_spectrum(A)
    n = lam.size
    if not 1 <= k <= l <= n:
        raise ValueError(f"need 1 <= k <= l <= n, got k={k}, l={l}, n={n}")
    return float(_normalized_mean(lam, k) - _normalized_mean(lam, l))


def maclaurin_sweep(n: int, samples: int = 1000, seed: int = 0, tolerance: float = DM_TOL) -> CheckReport:
    """All pairs ``k <= l`` over the mixed PSD sampler; slack is the gap over ``1 + ||A||_F``."""
    As = symmat.mixed_psd_batch(n, samples, seed)
    lam = np.maximum(np.linalg.eigvalsh(As), 0.0)
    scale = 1.0 + np.linalg.norm(As, axis=(-2, -1))
    means = {k: _normalized_mean(lam, k) for k in range(1, n + 1)}
    min_slack, witness = math.inf, None
    for k in range(1, n + 1):
        for l in range(k, n + 1):
            slack = (means[k] - means[l]) / scale
            i = int(np.argmin(slack))
            if slack[i] < min_slack:
                min_slack = float(slack[i])
                witness = {"sample": i, "k": k, "l": l, "A": symmat.to_dict(As[i])}
    return CheckReport("maclaurin", f"sigma:n={n}", samples, min_slack, tolerance, witness,
                       {"seed": seed, "pairs": n * (n + 1) // 2, "scale": "1 + ||A||_F"})


# ---------------------------------------------------------------------------
# coefficient condition


@dataclass
class MonomialExpansion:
    """``p(x) = G(tau diag(x) tau^T)`` as a homogeneous polynomial in ``x``."""

    n: int
    degree: int
    coefficients: dict
    fit_residual: float
    value_scale: float
    tau: np.ndarray = field(repr=False, default=None)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for alpha, c in self.coefficients.items():
            out = out + c * np.prod(x ** np.array(alpha), axis=-1)
        return out

    def min_coefficient(self) -> tuple[tuple, float]:
        alpha = min(self.coefficients, key=lambda a: (self.coefficients[a], a))
        return alpha, self.coefficients[alpha]

    def max_abs_coefficient(self) -> float:
        return max(abs(c) for c in self.coefficients.values())


MAX_BASIS = 10_000


def monomial_exponents(n: int, N: int) -> list[tuple]:
    """Exponent vectors of all degree-``N`` monomials in ``n`` variables (lexicographic)."""
    out = []
    for combo in itertools.combinations_with_replacement(range(n), N):
        alpha = [0] * n
        for i in combo:
            alpha[i] += 1
        out.append(tuple(alpha))
    return sorted(out, reverse=True)


def coefficient_expansion(G: PolyOperator, tau, seed: int = 0) -> MonomialExpansion:
    """Fit the monomial coefficients of ``x -> G(tau diag(x) tau^T)``.

    Samples ``3 x basis`` points with ``|x_i|`` in ``[0.25, 2]`` and random
    signs, then solves the column-scaled normal equations (damping ``1e-12``)
    with one step of iterative refinement.
    """
    tau = np.asarray(tau, dtype=float)
    n, N = G.dim, G.degree
    if tau.shape != (n, n):
        raise ValueError(f"tau must be {n}x{n}")
    size = math.comb(N + n - 1, n - 1)
    if size > MAX_BASIS:
        raise NumericError(f"monomial basis of size {size} exceeds the {MAX_BASIS} guard")
    exps = np.array(monomial_exponents(n, N), dtype=float)
    rng = symmat.generator(seed, 2**40)
    m = 3 * size
    x = rng.uniform(0.25, 2.0, (m, n)) * rng.choice([-1.0, 1.0], (m, n))
    mats = np.einsum("ij,mj,kj->mik", tau, x, tau)
    y = G.batch(mats)
    V = np.prod(x[:, None, :] ** exps[None, :, :], axis=-1)
    col = np.linalg.norm(V, axis=0)
    Vs = V / col
    normal = Vs.T @ Vs + 1e-12 * np.eye(size)
    c = np.linalg.solve(normal, Vs.T @ y)
    c = c + np.linalg.solve(normal, Vs.T @ (y - Vs @ c))
    resid = float(np.abs(Vs @ c - y).max())
    value_scale = float(np.abs(y).max())
    coeffs = c / col
    if resid > 1e-8 * max(value_scale, 1e-300):
        raise NumericError(f"monomial fit residual {resid:.3e} exceeds 1e-8 * {value_scale:.3e}", residual=resid)
    return MonomialExpansion(n, N, {tuple(int(a) for a in alpha): float(v) for alpha, v in zip(exps, coeffs)},
                             resid, value_scale, tau)


def coefficient_condition(G: PolyOperator, num_tau: int = 100, seed: int = 0, tol: float = 1e-7) -> CheckReport:
    """Smallest monomial coefficient of ``p_tau`` over ``tau = I`` and ``num_tau`` Haar samples.

    Slack is that coefficient divided by the largest ``|coefficient|`` of the
    same expansion; passes if ``>= -tol``.
    """
    start = time.perf_counter()
    taus = [np.eye(G.dim)] + [symmat.random_orthogonal(G.dim, seed, stream=i) for i in range(num_tau)]
    min_slack, witness, worst_fit = math.inf, None, 0.0
    for i, tau in enumerate(taus):
        try:
            exp = coefficient_expansion(G, tau, seed=seed + i)
        except NumericError as exc:
            return CheckReport("coeffcond", G.spec, i, -math.inf, tol,
                               {"tau_index": i, "reason": str(exc)}, {"seed": seed, "num_tau": num_tau})
        alpha, c = exp.min_coefficient()
        slack = c / max(exp.max_abs_coefficient(), 1e-300)
        worst_fit = max(worst_fit, exp.fit_residual / max(exp.value_scale, 1e-300))
        if slack < min_slack:
            min_slack = slack
            witness = {"tau_index": i, "tau": exp.tau.tolist(), "monomial": list(alpha), "coefficient": c}
    return CheckReport("coeffcond", G.spec, len(taus), float(min_slack), tol, witness,
                       {"seed": seed, "num_tau": num_tau, "max_relative_fit_residual": worst_fit,
                        "scale": "max |coefficient| per expansion"},
                       elapsed=time.perf_counter() - start)


def _certificate_problem(G: PolyOperator, certificate: CheckReport) -> str | None:
    if certificate.suite != "coeffcond" or certificate.operator != G.spec:
        return f"certificate is a {certificate.suite!r} report for {certificate.operator!r}, not coeffcond for {G.spec!r}"
    if not certificate.passed:
        return "coefficient condition failed for this operator"
    return None


def dm_gap_ng(G: PolyOperator, A, certificate: CheckReport) -> float:
    """Majorization gap for an I-central operator certified by :func:`coefficient_condition`.

    No hyperbolicity is required; ``certificate`` must be a passing
    ``coeffcond`` report for ``G``.
    """
    problem = _certificate_problem(G, certificate)
    if problem:
        raise PreconditionError(f"{problem}; run coefficient_condition first")
    if is_I_central(G) is None:
        raise PreconditionError(f"{G.spec} is not I-central")
    return dm_gap(G, A)
