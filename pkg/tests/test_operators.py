import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abplab import symmat
from abplab.operators import (
    Det,
    KHessian,
    NormSqDet,
    NotHyperbolicAt,
    OperatorSpecError,
    PFoldSum,
    PreconditionError,
    Product,
    RadialDerivative,
    Trace,
    boundary_project,
    catalog,
    cone_contains,
    degenerate_ellipticity_check,
    detprobe,
    evaluate,
    garding_eigenvalues,
    is_dirichlet,
    is_I_central,
    parse_operator,
    radial_poly_coeffs,
    sample_closed_cone,
    tameness_gap,
)

HYPERBOLIC_SPECS = [
    "det:n=3", "trace:n=3", "sigma:k=2,n=4", "sigma:k=3,n=5", "pfold:p=2,n=3", "pfold:p=2,n=4",
    "prod(det:n=3,sigma:k=1,n=3)", "prod(det:n=2,sigma:k=2,n=2)", "rderiv(det:n=4,l=2)", "rderiv(det:n=5,l=1)",
]


def rel(a, b):
    return abs(a - b) / (1.0 + abs(b))


# -- evaluation ---------------------------------------------------------------


def test_evaluate_examples():
    assert evaluate(KHessian(2, 3), np.eye(3)) == pytest.approx(3.0)
    assert evaluate(PFoldSum(2, 3), np.diag([1.0, 2.0, 3.0])) == pytest.approx(60.0)
    assert evaluate(NormSqDet(2), np.eye(2)) == pytest.approx(2.0)
    for n in range(1, 6):
        assert evaluate(Det(n), np.eye(n)) == pytest.approx(1.0)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(Det(3), np.eye(2))


def test_value_at_identity():
    assert PFoldSum(2, 3).value_at_identity == pytest.approx(8.0)  # p^N, every factor is p
    assert NormSqDet(3).value_at_identity == pytest.approx(3.0)
    assert RadialDerivative(Det(4), 2).value_at_identity == pytest.approx(2 * math.comb(4, 2))


def test_degrees():
    assert PFoldSum(2, 4).degree == 6
    assert NormSqDet(3).degree == 5
    assert Product(Det(3), KHessian(2, 3)).degree == 5
    assert RadialDerivative(Det(4), 3).degree == 1


# -- radial polynomial --------------------------------------------------------


def test_radial_coefficients_examples():
    np.testing.assert_allclose(radial_poly_coeffs(Det(2), np.zeros((2, 2))), [0, 0, 1], atol=1e-14)
    np.testing.assert_allclose(radial_poly_coeffs(Trace(2), np.diag([1.0, 2.0])), [3, 2], atol=1e-14)


@pytest.mark.parametrize("spec", HYPERBOLIC_SPECS + ["normsqdet:n=3"])
def test_radial_exact_matches_interpolation(spec):
    g = parse_operator(spec)
    A = symmat.random_symmetric(g.dim, 3)
    exact = radial_poly_coeffs(g, A, method="exact")
    interp = radial_poly_coeffs(g, A, method="interpolate")
    scale = np.abs(exact).max()
    np.testing.assert_allclose(interp, exact, atol=1e-9 * scale)
    assert exact[-1] == pytest.approx(g.value_at_identity, rel=1e-9)


def test_radial_nonspectral_operator():
    g = detprobe(3)
    A = symmat.random_symmetric(3, 1)
    c = radial_poly_coeffs(g, A)
    for t in (-1.0, 0.3, 2.0):
        assert np.polynomial.polynomial.polyval(t, c) == pytest.approx(g(A + t * np.eye(3)), rel=1e-9, abs=1e-9)


# -- Garding spectrum ----------------------------------------------------------


def test_det_spectrum():
    spec = garding_eigenvalues(Det(3), np.diag([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(spec.values, [1, 2, 3], atol=1e-12)
    A = symmat.random_symmetric(5, 11)
    np.testing.assert_allclose(garding_eigenvalues(Det(5), A).values, np.linalg.eigvalsh(A), atol=1e-8)


def test_pfold_spectrum_and_factors():
    g = PFoldSum(2, 3)
    A = np.diag([1.0, 2.0, 3.0])
    np.testing.assert_allclose(garding_eigenvalues(g, A).values, [1.5, 2.0, 2.5], atol=1e-12)
    np.testing.assert_allclose(g.factors(A), [3.0, 4.0, 5.0])
    assert g(A) == pytest.approx(np.prod(g.factors(A)))


def test_normsqdet_not_hyperbolic():
    with pytest.raises(NotHyperbolicAt) as info:
        garding_eigenvalues(NormSqDet(2), np.diag([1.0, -1.0]))
    assert info.value.max_imag > 0.5


def test_spectrum_of_identity_is_ones():
    for g in catalog(3):
        np.testing.assert_allclose(garding_eigenvalues(g, np.eye(g.dim)).values, 1.0, atol=1e-7)


def test_high_multiplicity_product():
    g = parse_operator("prod(det:n=5,sigma:k=1,n=5,sigma:k=2,n=5,sigma:k=3,n=5,sigma:k=4,n=5)")
    assert g.degree == 15
    spec = garding_eigenvalues(g, np.eye(5))
    np.testing.assert_allclose(spec.values, 1.0, atol=1e-7)


# -- cone membership ----------------------------------------------------------


def test_cone_positions():
    for g in (Det(2), KHessian(1, 2), PFoldSum(1, 2)):
        assert cone_contains(g, np.eye(2)).tag == "Interior"
    assert cone_contains(Det(2), np.diag([1.0, -1.0])).tag == "Outside"
    assert cone_contains(Det(2), np.diag([0.0, 1.0])).tag == "Boundary"


def test_boundary_project_examples():
    np.testing.assert_allclose(boundary_project(Det(2), np.diag([2.0, 3.0])), np.diag([0.0, 1.0]), atol=1e-12)
    for g in catalog(3):
        B = boundary_project(g, np.eye(g.dim))
        np.testing.assert_allclose(B, 0.0, atol=1e-7)
    g = KHessian(2, 3)
    A = symmat.random_psd(3, 4) + np.eye(3)
    B = boundary_project(g, A)
    assert abs(g(B)) <= 1e-7 * (1 + np.linalg.norm(A)) ** 2
    assert cone_contains(g, B).tag == "Boundary"


# -- the three defining conditions ---------------------------------------------


def test_I_central_anchors():
    assert is_I_central(Det(3)) == pytest.approx(1.0, abs=1e-6)
    assert is_I_central(Trace(3)) == pytest.approx(1.0, abs=1e-6)
    for n in (2, 3, 4):
        assert is_I_central(NormSqDet(n)) == pytest.approx(2 + n, abs=1e-5)


def test_not_I_central():
    from abplab.operators import Polynomial

    g = Polynomial(2, 2, lambda A: A[0, 0] * (A[0, 0] + A[1, 1]), "skew")
    assert is_I_central(g) is None


def test_dirichlet_reports():
    assert is_dirichlet(Det(3), 30).passed
    assert is_dirichlet(KHessian(2, 4), 30).passed
    rep = is_dirichlet(NormSqDet(2), 9)
    assert not rep.passed
    assert rep.witness["reason"] == "NotHyperbolicAt"
    with pytest.raises(ValueError):
        is_dirichlet(Det(2), 0)


def test_ellipticity_examples():
    assert degenerate_ellipticity_check(Trace(3), 20).passed
    assert Det(3)(2 * np.eye(3)) - Det(3)(np.eye(3)) == pytest.approx(7.0)
    for spec in HYPERBOLIC_SPECS:
        assert degenerate_ellipticity_check(parse_operator(spec), 12, seed=5).passed


def test_tameness_examples():
    assert tameness_gap(Det(2), np.zeros((2, 2)), 0.7) == pytest.approx(0.0, abs=1e-14)
    assert tameness_gap(Det(2), np.eye(2), 1.0) == pytest.approx(2.0)
    g = NormSqDet(3)
    for i in range(20):
        A = symmat.random_psd(3, i, symmat.PSD_STYLES[i % 3])
        assert tameness_gap(g, A, 0.5) >= -1e-8 * (1 + np.linalg.norm(A)) ** 5
    with pytest.raises(PreconditionError):
        tameness_gap(Det(2), np.diag([1.0, -1.0]), 0.5)
    with pytest.raises(ValueError):
        tameness_gap(Det(2), np.eye(2), 0.0)


@pytest.mark.parametrize("spec", HYPERBOLIC_SPECS)
def test_tameness_on_closed_cone(spec):
    g = parse_operator(spec)
    for i in range(12):
        A = sample_closed_cone(g, 2, i)
        for eta in (0.1, 1.0):
            scale = (1 + np.linalg.norm(A) + eta) ** g.degree
            assert tameness_gap(g, A, eta) >= -1e-8 * scale


# -- invariants (property tests) ----------------------------------------------

spec_st = st.sampled_from(HYPERBOLIC_SPECS)
seed_st = st.integers(0, 2**20)


@given(spec_st, seed_st, st.floats(-2, 2))
def test_shift_covariance(spec, seed, s):
    g = parse_operator(spec)
    A = symmat.random_symmetric(g.dim, seed)
    a = garding_eigenvalues(g, A)
    b = garding_eigenvalues(g, A + s * np.eye(g.dim))
    np.testing.assert_allclose(b.values, a.values + s, atol=1e-7 * a.scale)


@given(spec_st, seed_st)
def test_eigenvalue_product_identity(spec, seed):
    g = parse_operator(spec)
    A = symmat.random_symmetric(g.dim, seed)
    spec_ = garding_eigenvalues(g, A)
    assert len(spec_) == g.degree
    expected = g.value_at_identity * np.prod(spec_.values)
    assert abs(g(A) - expected) <= 1e-7 * g.value_at_identity * spec_.scale**g.degree


@given(st.integers(1, 5), seed_st, st.data())
def test_radial_derivative_identity(n, seed, data):
    if n == 1:
        return
    l = data.draw(st.integers(1, n - 1))
    A = symmat.random_symmetric(n, seed)
    lam = np.linalg.eigvalsh(A)
    expected = math.factorial(l) * symmat.elementary_symmetric(lam, n - l)
    scale = (1 + np.abs(lam).max()) ** (n - l) * math.factorial(l) * math.comb(n, l)
    assert abs(RadialDerivative(Det(n), l)(A) - expected) <= 1e-8 * scale


@given(st.integers(2, 4), seed_st)
def test_product_rule(n, seed):
    f, h = Det(n), KHessian(1, n)
    g = Product(f, h)
    A = symmat.random_symmetric(n, seed) + 0.5 * np.eye(n)
    assert g(A) == pytest.approx(f(A) * h(A), rel=1e-12, abs=1e-12)
    both = cone_contains(f, A).tag == "Interior" and cone_contains(h, A).tag == "Interior"
    assert (cone_contains(g, A).tag == "Interior") == both


@given(st.integers(2, 5), seed_st, st.data())
def test_nesting_of_cones(n, seed, data):
    l = data.draw(st.integers(1, n - 1))
    A = symmat.random_symmetric(n, seed) + 1.5 * np.eye(n)
    if cone_contains(Det(n), A).tag == "Interior":
        assert cone_contains(RadialDerivative(Det(n), l), A).tag == "Interior"


@given(spec_st, seed_st, st.floats(-1, 3))
def test_trace_containment(spec, seed, shift):
    g = parse_operator(spec)
    A = boundary_project(g, symmat.random_symmetric(g.dim, seed)) + max(shift, 0.0) * np.eye(g.dim)
    if cone_contains(g, A).in_closure:
        assert np.trace(A) >= -1e-8 * (1 + np.abs(A).max())


@given(st.sampled_from(["det:n=3", "sigma:k=2,n=4", "pfold:p=2,n=3", "trace:n=3", "normsqdet:n=3"]), seed_st)
def test_orthogonal_invariance(spec, seed):
    g = parse_operator(spec)
    A = symmat.random_symmetric(g.dim, seed)
    tau = symmat.random_orthogonal(g.dim, seed)
    assert g(tau @ A @ tau.T) == pytest.approx(g(A), rel=1e-9, abs=1e-9 * (1 + np.abs(A).max()) ** g.degree)


@given(st.sampled_from(HYPERBOLIC_SPECS + ["normsqdet:n=2"]), seed_st, st.sampled_from([0.0, 0.5, 2.0]))
def test_homogeneity(spec, seed, c):
    g = parse_operator(spec)
    A = symmat.random_symmetric(g.dim, seed)
    assert g(c * A) == pytest.approx(c**g.degree * g(A), rel=1e-9, abs=1e-12)


# -- grammar -----------------------------------------------------------------


def test_catalog_specs_roundtrip():
    for g in catalog(4):
        assert parse_operator(g.spec) == g
        assert is_I_central(g) is not None


def test_grammar_examples():
    assert parse_operator("det:n=3") == Det(3)
    assert parse_operator("sigma:k=2,n=4") == KHessian(2, 4)
    assert parse_operator("prod(det:n=3,sigma:k=1,n=3)") == Product(Det(3), KHessian(1, 3))
    assert parse_operator("rderiv(det:n=4,l=2)") == RadialDerivative(Det(4), 2)
    assert parse_operator(" normsqdet:n=2 ") == NormSqDet(2)
    nested = parse_operator("rderiv(prod(det:n=2,trace:n=2),l=1)")
    assert nested.degree == 2


@pytest.mark.parametrize("bad", ["", "det", "det:n=0", "sigma:k=5,n=3", "foo:n=2", "prod(det:n=2)",
                                 "rderiv(det:n=3)", "rderiv(det:n=3,l=3)", "prod(det:n=2,trace:n=3)", "det:n=x"])
def test_grammar_errors_list_valid_forms(bad):
    with pytest.raises(OperatorSpecError) as info:
        parse_operator(bad)
    assert "valid forms" in str(info.value)
