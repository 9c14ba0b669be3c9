"""Named verification suites: each maps a parameter dict to a list of CheckReports.

Every suite is a pure function of its parameters and the run seed, so runs
are reproducible and suites can execute in any order or concurrently.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import symmat
from .abp import (
    EquationSpec,
    affine_rhs,
    c11_oscillation_check,
    classify_grid,
    oscillation_bound_check,
    parse_rhs,
    semiconvex_pipeline_check,
)
from .majorization import coefficient_condition, dm_sweep, maclaurin_sweep
from .operators import (
    NotHyperbolicAt,
    PFoldSum,
    PolyOperator,
    catalog,
    degenerate_ellipticity_check,
    garding_eigenvalues,
    is_dirichlet,
    is_I_central,
    parse_operator,
    sample_closed_cone,
    tameness_gap,
)
from .potential import GridFn, alexandrov_check
from .report import CheckReport, SlackTracker
from .solver import solve_ma_2d


def _ops(params) -> list[PolyOperator]:
    return [parse_operator(s) for s in params["operators"]]


def suite_ops(params, seed) -> list[CheckReport]:
    """Catalog listing: degree, g(I), cone kind and I-centrality of every entry."""
    entries = []
    for g in catalog(params["max_n"]):
        entries.append({"spec": g.spec, "degree": g.degree, "g(I)": g.value_at_identity, "cone": g.cone,
                        "I_central_k": is_I_central(g)})
    notes = ["pfold g(I) is p^N (every factor equals p at the identity)"]
    return [CheckReport("ops", "catalog", len(entries), 0.0, 0.0, params={"entries": entries}, notes=notes)]


def suite_hyperbolic(params, seed) -> list[CheckReport]:
    """Real Garding spectra at random symmetric matrices, with the identities
    ``g(A) = g(I) prod lambda`` and ``lambda(A + sI) = lambda(A) + s``."""
    out = []
    for g in _ops(params):
        tracker = SlackTracker()
        for i in range(params["samples"]):
            A = symmat.random_symmetric(g.dim, seed, stream=i)
            try:
                spec = garding_eigenvalues(g, A)
                s = 4.0 * symmat.generator(seed, 2**34 + i).random() - 2.0
                shifted = garding_eigenvalues(g, A + s * np.eye(g.dim))
            except NotHyperbolicAt as exc:
                tracker.update(-math.inf, {"sample": i, "reason": "NotHyperbolicAt", "max_imag": exc.max_imag,
                                           "A": symmat.to_dict(A)})
                continue
            scale = spec.scale**g.degree * max(g.value_at_identity, 1.0)
            product_err = abs(g(A) - g.value_at_identity * np.prod(spec.values)) / scale
            shift_err = float(np.abs(shifted.values - spec.values - s).max()) / (spec.scale + abs(s))
            tracker.update(-max(product_err, shift_err),
                           {"sample": i, "A": symmat.to_dict(A), "shift": s, "spectrum": spec.values.tolist()})
        out.append(CheckReport("hyperbolic", g.spec, params["samples"], tracker.min_slack, 1e-7, tracker.witness,
                               {"seed": seed, "scale": "relative error of product and shift identities"}))
    return out


def suite_central(params, seed) -> list[CheckReport]:
    out = []
    for g in _ops(params):
        k = is_I_central(g, tol=params["tolerance"])
        report = CheckReport("central", g.spec, 1, 0.0 if k is not None else -math.inf, params["tolerance"],
                             params={"k": k, "g(I)": g.value_at_identity})
        if isinstance(g, PFoldSum):
            report.notes.append(f"pfold g(I) = p^N = {g.value_at_identity:g}")
        out.append(report)
    return out


def suite_dirichlet(params, seed) -> list[CheckReport]:
    return [is_dirichlet(g, params["samples"], seed) for g in _ops(params)]


def suite_ellipticity(params, seed) -> list[CheckReport]:
    return [degenerate_ellipticity_check(g, params["samples"], seed) for g in _ops(params)]


def suite_tame(params, seed) -> list[CheckReport]:
    """``g(A + eta I) - g(A) - g(I) eta^N >= 0`` on the closed cone; also records
    the gap with the bare ``eta^N`` term."""
    out = []
    for g in _ops(params):
        tracker, bare = SlackTracker(), math.inf
        for i in range(params["samples"]):
            if g.cone == "psd":
                A = symmat.random_psd(g.dim, seed, symmat.PSD_STYLES[i % 3], stream=i)
            else:
                A = sample_closed_cone(g, seed, i)
            for eta in params["eta"]:
                scale = (1.0 + np.linalg.norm(A) + eta * math.sqrt(g.dim)) ** g.degree
                tracker.update(tameness_gap(g, A, eta) / scale, {"sample": i, "eta": eta, "A": symmat.to_dict(A)})
                bare = min(bare, tameness_gap(g, A, eta, normalized=True) / scale)
        out.append(CheckReport("tame", g.spec, tracker.count, tracker.min_slack, 1e-8, tracker.witness,
                               {"seed": seed, "eta": params["eta"], "bare_eta_N_min_slack": bare,
                                "scale": "(1 + ||A||_F + eta sqrt(n))^N"}))
    return out


def suite_majorize(params, seed) -> list[CheckReport]:
    out = []
    for g in _ops(params):
        certificate = None
        if g.cone == "psd":
            certificate = coefficient_condition(g, params.get("num_tau", 20), seed)
        out.append(dm_sweep(g, params["samples"], seed, hunt_mode=params["hunt"], certificate=certificate))
    return out


def suite_maclaurin(params, seed) -> list[CheckReport]:
    return [maclaurin_sweep(n, params["samples"], seed) for n in params["dims"]]


def suite_coeffcond(params, seed) -> list[CheckReport]:
    out = []
    for g in _ops(params):
        report = coefficient_condition(g, params["num_tau"], seed)
        fit = report.params.get("max_relative_fit_residual", math.inf)
        if fit > 1e-8:
            report.notes.append(f"fit residual {fit:.3e} exceeds 1e-8")
            report.min_slack = -math.inf
        out.append(report)
    return out


def _alexandrov_cases(nodes: int):
    yield "1d:1-x^2", GridFn.from_function(lambda X: 1.0 - X[..., 0] ** 2, (-1.0,), (1.0,), (nodes,))
    box = ((-1.0, -1.0), (1.0, 1.0), (nodes, nodes))
    yield "2d:1-|x|^2/2", GridFn.from_function(lambda X: 1.0 - 0.5 * (X * X).sum(-1), *box)
    yield "2d:gauss(0.3)", GridFn.from_function(lambda X: np.exp(-(X * X).sum(-1) / (2 * 0.3**2)), *box)
    yield "2d:gauss(0.5,shifted)", GridFn.from_function(
        lambda X: np.exp(-((X - [0.3, -0.2]) ** 2).sum(-1) / (2 * 0.5**2)), *box)
    yield "2d:bump+semiconvex", GridFn.from_function(
        lambda X: np.exp(-(X * X).sum(-1) / 0.5) + 0.2 * np.abs(X[..., 0]) + 0.1 * (X * X).sum(-1), *box)


def suite_alexandrov(params, seed) -> list[CheckReport]:
    """Discrete Alexandrov estimate on manufactured functions, ``slack >= -C h``."""
    out = []
    for nodes in params["shapes"]:
        for name, u in _alexandrov_cases(nodes):
            h = float(u.spacing.max())
            rec = alexandrov_check(u)
            out.append(CheckReport("alexandrov", f"{name}@{nodes}", rec.integrated_nodes, rec.slack,
                                   params["C"] * h, params={**rec.to_dict(), "h": h, "C": params["C"],
                                                            "scale": "absolute"}))
    return out


def _pipeline_cases(shape: int):
    box = ((-1.0, -1.0), (1.0, 1.0), shape)
    det = parse_operator("det:n=2")
    tr = parse_operator("trace:n=2")
    ramp = affine_rhs(1.0, [0.1, 0.0])

    def grid(fn):
        return GridFn.from_function(fn, box[0], box[1], (shape, shape))

    yield "det f=1 w=-|x|^2/2", EquationSpec(det, parse_rhs("const:1"), *box), \
        grid(lambda X: -0.5 * (X * X).sum(-1)), False
    yield "det f=1+x1/10 w=-0.45|x|^2", EquationSpec(det, ramp, *box), \
        grid(lambda X: -0.45 * (X * X).sum(-1)), False
    yield "trace f=2 w=-|x|^2/2", EquationSpec(tr, parse_rhs("const:2"), *box), \
        grid(lambda X: -0.5 * (X * X).sum(-1)), False
    yield "det f=1 w=max of paraboloids", EquationSpec(det, parse_rhs("const:1"), *box), \
        grid(lambda X: np.maximum(-0.5 * ((X - [0.3, 0]) ** 2).sum(-1), -0.5 * ((X + [0.3, 0]) ** 2).sum(-1))), False
    yield "det f=1 w=const", EquationSpec(det, parse_rhs("const:1"), *box), grid(lambda X: np.zeros(X.shape[:-1])), False
    yield "control: concave spike", EquationSpec(det, ramp, *box), grid(
        lambda X: -0.45 * (X * X).sum(-1) + 0.05 * np.exp(-((X - [0.3, 0.2]) ** 2).sum(-1) / (2 * 0.05**2))), True


def suite_pipeline(params, seed) -> list[CheckReport]:
    """Semiconvex approximation of dual subharmonics.  The negative control is
    reported as ``pipeline-control``, which passes iff the check rejects it."""
    out = []
    for name, eq, w, control in _pipeline_cases(params["shape"]):
        rep = semiconvex_pipeline_check(eq, w, params["eta"], params["C"])
        rep.operator = f"{eq.operator.spec} [{name}]"
        if control:
            detected = not rep.passed and rep.witness is not None
            rep = CheckReport("pipeline-control", rep.operator, rep.samples, 0.0 if detected else -math.inf, 0.0,
                              rep.witness, {**rep.params, "check_min_slack": rep.min_slack,
                                            "check_tolerance": rep.tolerance},
                              ["negative control: passes iff the pipeline check reports a violation"])
        out.append(rep)
    return out


def _osc_report(name, eq, h, C, extra=None) -> CheckReport:
    grid = h.grid if hasattr(h, "grid") else h
    step = float(grid.spacing.max())
    rec = oscillation_bound_check(eq, h)
    c11 = c11_oscillation_check(eq, h)
    params = {**rec.to_dict(), "bound": rec.osc_bd + rec.error_term, "c11_error_term": c11.error_term,
              "h": step, "C": C, "scale": "absolute", **(extra or {})}
    notes = [] if c11.error_term <= rec.error_term else ["contact-restricted term exceeds the full term"]
    slack = rec.slack if not notes else -math.inf
    return CheckReport("oscillation", f"{eq.operator.spec} [{name}]", int(grid.interior_mask.sum()), slack,
                       C * step, params=params, notes=notes)


def suite_oscillation(params, seed) -> list[CheckReport]:
    """Oscillation bound on exact quadratic solutions, converged solver outputs
    and the disk-masked anchor."""
    shape, C = params["shape"], params["C"]
    out = []
    unit = ("0,1", shape)
    exact = [("det:n=2", "const:1", np.eye(2)), ("sigma:k=2,n=2", "const:2", np.diag([2.0, 1.0])),
             ("sigma:k=1,n=2", "const:3", np.diag([2.0, 1.0])), ("det:n=2", "const:4", 2 * np.eye(2))]
    for op, f, A in exact:
        eq = EquationSpec.from_strings(op, f, *unit)
        X = eq.grid().coords()
        u = eq.grid(0.5 * np.einsum("...i,ij,...j->...", X, A, X))
        out.append(_osc_report(f"exact x^T A x/2, A=diag({','.join(f'{v:g}' for v in np.diag(A))})", eq, u, C))
    for f in params["f"]:
        eq = EquationSpec.from_strings("det:n=2", f, *unit)
        res = solve_ma_2d(eq.f, lambda X: 0.5 * (X * X).sum(-1), eq.lower, eq.upper, shape)
        if not res.converged:
            out.append(CheckReport("oscillation", f"det:n=2 [solver f={f}]", 0, math.nan, C / (shape - 1),
                                   skipped=f"solver did not converge (residual {res.residual:.3e})"))
            continue
        out.append(_osc_report(f"solver f={f}", eq, res, C, {"solver": res.to_dict()}))
    disk = GridFn.disk(lambda X: 0.5 * (X * X).sum(-1), 1.0, shape)
    eq = EquationSpec.from_strings("det:n=2", "const:1", "-1,1", shape)
    out.append(_osc_report("disk |x|^2/2", eq, disk, C))
    return out


def suite_solve(params, seed) -> list[CheckReport]:
    """Monge-Ampere solves with quadratic boundary data; residual, admissibility
    of the stencil Hessians and, for constant ``f``, error against the exact solution."""
    shape, out = params["shape"], []
    for f in params["f"]:
        eq = EquationSpec.from_strings("det:n=2", f, "0,1", shape)
        start = time.perf_counter()
        res = solve_ma_2d(eq.f, lambda X: 0.5 * (X * X).sum(-1), eq.lower, eq.upper, shape,
                          params["tol"], params["max_iter"])
        step = float(res.grid.spacing.max())
        cls = classify_grid(eq, res.grid, tol=params["C"] * step)
        frac = cls.fraction("admissible_sub")
        info = {**res.to_dict(), "admissible_fraction": frac, "C": params["C"]}
        if f.startswith("const:") and float(f.split(":")[1]) == 1.0:
            X = res.grid.coords()
            info["max_error_vs_exact"] = float(np.abs(res.grid.values - 0.5 * (X * X).sum(-1)).max())
        slack = -res.residual if res.converged else -math.inf
        out.append(CheckReport("solve", f"det:n=2 [f={f}]", int(res.grid.interior_mask.sum()), slack, params["tol"],
                               params=info, elapsed=time.perf_counter() - start))
        out.append(CheckReport("solve-admissible", f"det:n=2 [f={f}]", int(cls.checked.sum()), frac - 0.99, 0.0,
                               params={"admissible_fraction": frac, "tol_disc": params["C"] * step,
                                       "scale": "fraction of stencil nodes minus 0.99"}))
    return out


SUITES = {
    "ops": suite_ops,
    "hyperbolic": suite_hyperbolic,
    "central": suite_central,
    "dirichlet": suite_dirichlet,
    "ellipticity": suite_ellipticity,
    "tame": suite_tame,
    "majorize": suite_majorize,
    "maclaurin": suite_maclaurin,
    "coeffcond": suite_coeffcond,
    "alexandrov": suite_alexandrov,
    "pipeline": suite_pipeline,
    "oscillation": suite_oscillation,
    "solve": suite_solve,
}
