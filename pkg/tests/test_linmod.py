import numpy as np
import pytest

from olsweights.errors import LeverageError, SingularDesignError
from olsweights.linmod import DesignMatrix, fwl_residualize, ols_fit, regression_design


def hc2_by_hand(X, y, w=None):
    # normal-equations version, independent of the QR path
    w = np.ones(len(y)) if w is None else w
    A = np.linalg.inv(X.T @ (X * w[:, None]))
    b = A @ X.T @ (w * y)
    e = y - X @ b
    h = w * np.einsum("ij,jk,ik->i", X, A, X)
    meat = X.T @ (X * (w**2 * e**2 / (1 - h))[:, None])
    return b, A @ meat @ A, h


@pytest.mark.parametrize("weighted", [False, True])
@pytest.mark.parametrize("seed", range(5))
def test_matches_normal_equations(seed, weighted):
    rng = np.random.default_rng(seed)
    n, k = 40, 4
    X = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
    y = rng.normal(size=n) + X[:, 1]
    w = rng.uniform(0.2, 3, size=n) if weighted else None
    fit = ols_fit(DesignMatrix(X, tuple("abcd")), y, weights=w)
    b, V, h = hc2_by_hand(X, y, w)
    np.testing.assert_allclose(fit.coefficients, b, rtol=1e-10)
    np.testing.assert_allclose(fit.vcov_hc2, V, rtol=1e-8)
    np.testing.assert_allclose(fit.leverage, h, rtol=1e-8)


def test_rank_deficient_names_column():
    x = np.arange(6.0)
    X = DesignMatrix(np.column_stack([np.ones(6), x, 2 * x]), ("c", "x", "x2"))
    with pytest.raises(SingularDesignError) as ei:
        ols_fit(X, x)
    assert ei.value.columns == ["x2"]


def test_leverage_one_raises_and_nonrobust_ok():
    X = DesignMatrix(np.column_stack([np.ones(4), [1.0, 0, 0, 0]]), ("c", "e"))
    y = np.array([1.0, 2, 3, 4])
    with pytest.raises(LeverageError):
        ols_fit(X, y)
    assert ols_fit(X, y, robust=False).vcov_hc2 is None


def test_fwl_identity(toy8):
    r = fwl_residualize(toy8)
    full = ols_fit(regression_design(toy8), toy8.outcome, robust=False).coef("D")
    assert abs(r @ toy8.outcome / (r @ r) - full) < 1e-12
