import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abplab import symmat


def test_eigenvalues_of_swap_matrix():
    A = [[0.0, 1.0], [1.0, 0.0]]
    for method in ("lapack", "jacobi"):
        np.testing.assert_allclose(symmat.eigenvalues(A, method), [-1.0, 1.0], atol=1e-14)


def test_eigenvalues_diagonal_and_unknown_method():
    np.testing.assert_allclose(symmat.eigenvalues(np.diag([3.0, 1.0, 2.0])), [1, 2, 3])
    with pytest.raises(ValueError):
        symmat.eigenvalues(np.eye(2), "qr")


@given(st.integers(1, 8), st.integers(0, 10_000))
def test_jacobi_matches_lapack(n, seed):
    A = symmat.random_symmetric(n, seed)
    w, Q = symmat.jacobi_eigh(A)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(A), atol=1e-11 * (1 + np.abs(A).max()))
    np.testing.assert_allclose(Q @ np.diag(w) @ Q.T, A, atol=1e-10 * (1 + np.abs(A).max()))


def test_as_symmat_rejects_bad_input():
    with pytest.raises(ValueError):
        symmat.as_symmat([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        symmat.as_symmat(np.ones((2, 3)))
    with pytest.raises(ValueError):
        symmat.as_symmat([[np.nan]])


def test_elementary_symmetric():
    lam = [1.0, 2.0, 3.0]
    assert symmat.elementary_symmetric(lam, 1) == 6
    assert symmat.elementary_symmetric(lam, 2) == 11
    assert symmat.elementary_symmetric(lam, 3) == 6
    np.testing.assert_allclose(symmat.elementary_symmetric_all(lam), [1, 6, 11, 6])
    with pytest.raises(ValueError):
        symmat.elementary_symmetric(lam, 4)


@pytest.mark.parametrize("style", symmat.PSD_STYLES)
@pytest.mark.parametrize("n", [1, 2, 5])
def test_random_psd_styles(style, n):
    A = symmat.random_psd(n, 7, style)
    lam = np.linalg.eigvalsh(A)
    assert lam[0] >= -1e-12 * (1 + lam[-1])
    np.testing.assert_array_equal(A, symmat.random_psd(n, 7, style))
    if style == "near_boundary":
        assert 0.0 <= lam[0] <= 1e-6 + 1e-12 * lam[-1]
    if style == "low_rank" and n > 1:
        assert np.linalg.matrix_rank(A, tol=1e-9 * lam[-1]) <= -(-n // 2)


def test_random_streams_independent_of_order():
    a = symmat.random_symmetric(3, 1, stream=5)
    symmat.random_symmetric(3, 1, stream=4)
    np.testing.assert_array_equal(a, symmat.random_symmetric(3, 1, stream=5))
    assert not np.allclose(a, symmat.random_symmetric(3, 2, stream=5))


def test_random_orthogonal():
    Q = symmat.random_orthogonal(4, 3)
    np.testing.assert_allclose(Q @ Q.T, np.eye(4), atol=1e-13)


@given(st.integers(1, 6), st.integers(0, 1000))
def test_psd_clip_properties(n, seed):
    A = symmat.random_symmetric(n, seed)
    C = symmat.psd_clip(A)
    assert np.linalg.eigvalsh(C)[0] >= -1e-12 * (1 + np.abs(A).max())
    P = symmat.random_psd(n, seed)
    np.testing.assert_allclose(symmat.psd_clip(P), P, atol=1e-12 * (1 + np.abs(P).max()))
    np.testing.assert_allclose(symmat.psd_clip_batch(A[None])[0], C, atol=1e-12 * (1 + np.abs(A).max()))


def test_dict_roundtrip():
    A = symmat.random_symmetric(3, 0)
    np.testing.assert_array_equal(symmat.from_dict(symmat.to_dict(A)), A)
    with pytest.raises(ValueError):
        symmat.from_dict({"n": 3, "upper": [1.0]})


def test_bundled_utilities():
    A = np.diag([1.0, 2.0])
    tau = symmat.random_orthogonal(2, 0)
    assert symmat.det(A) == pytest.approx(2.0)
    assert symmat.trace(A) == 3.0
    assert symmat.frobenius_norm(A) == pytest.approx(np.sqrt(5))
    np.testing.assert_allclose(np.linalg.eigvalsh(symmat.conjugate(A, tau)), [1, 2])
    np.testing.assert_array_equal(symmat.add(A, symmat.identity(2)), np.diag([2.0, 3.0]))
    np.testing.assert_array_equal(symmat.scale(A, 2), np.diag([2.0, 4.0]))
