"""Ordinary and weighted least squares with leverage and HC2 covariance.

Fits go through a thin QR factorization of the (square-root weighted)
design, never the normal equations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import Dataset
from .errors import LeverageError, SingularDesignError

RANK_TOL = 1e-10
LEVERAGE_TOL = 1e-10


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    names: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if len(self.names) != v.shape[1]:
            raise ValueError(f"{len(self.names)} names for {v.shape[1]} design columns")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "names", tuple(self.names))

    @classmethod
    def from_columns(cls, columns, intercept: bool = True) -> "DesignMatrix":
        """Build from an ordered ``{name: vector}`` mapping (or pairs)."""
        items = list(columns.items()) if hasattr(columns, "items") else list(columns)
        n = len(items[0][1]) if items else 0
        names, cols = [], []
        if intercept:
            names.append("(Intercept)")
            cols.append(np.ones(n))
        for name, v in items:
            v = np.asarray(v, dtype=float)
            if v.ndim == 2:
                for j in range(v.shape[1]):
                    names.append(f"{name}[{j}]")
                    cols.append(v[:, j])
            else:
                names.append(name)
                cols.append(v)
        return cls(np.column_stack(cols), tuple(names))

    @property
    def shape(self):
        return self.values.shape

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class FitResult:
    coefficients: np.ndarray
    residuals: np.ndarray
    leverage: np.ndarray
    vcov_hc2: Optional[np.ndarray]
    fitted: np.ndarray
    names: tuple
    weights: Optional[np.ndarray] = None

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def se(self, name: str) -> float:
        if self.vcov_hc2 is None:
            raise LeverageError("HC2 covariance was not computed for this fit")
        j = self.names.index(name)
        return float(np.sqrt(max(self.vcov_hc2[j, j], 0.0)))


def ols_fit(
    design: DesignMatrix,
    y,
    weights=None,
    robust: bool = True,
    leverage_override=None,
) -> FitResult:
    """(Weighted) least squares with HC2 sandwich covariance.

    Parameters
    ----------
    design : DesignMatrix
        n x k design; must have full column rank.
    y : array-like, shape (n,)
    weights : array-like, shape (n,), optional
        Nonnegative observation weights. Omitted means ``W = I``.
    robust : bool
        Compute the HC2 covariance. When False ``vcov_hc2`` is None and
        units with leverage one are not an error.
    leverage_override : array-like, optional
        Replace the leverage values used inside HC2. Test hook only.

    Returns
    -------
    FitResult
        Residuals are on the original (unweighted) scale. Leverage is the
        weighted hat diagonal ``w_i x_i' (X'WX)^{-1} x_i``.
    """
    X = design.values
    y = np.asarray(y, dtype=float).ravel()
    n, k = X.shape
    if y.shape[0] != n:
        raise ValueError(f"y has length {y.shape[0]}, design has {n} rows")
    if n < k:
        raise SingularDesignError(f"design has {k} columns but only {n} rows", design.names)
    if weights is None:
        w = None
        sw = np.ones(n)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape[0] != n:
            raise ValueError(f"weights have length {w.shape[0]}, design has {n} rows")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if not np.any(w > 0):
            raise ValueError("weights are all zero")
        sw = np.sqrt(w)

    Xw = X * sw[:, None]
    Q, R = np.linalg.qr(Xw, mode="reduced")
    rdiag = np.abs(np.diag(R))
    bad = np.flatnonzero(rdiag < RANK_TOL * rdiag.max()) if rdiag.max() > 0 else np.arange(k)
    if bad.size:
        cols = [design.names[j] for j in bad]
        raise SingularDesignError(
            f"design is rank deficient; column(s) {cols} are collinear with earlier columns",
            cols,
        )
    beta = np.linalg.solve(R, Q.T @ (y * sw))
    fitted = X @ beta
    resid = y - fitted
    lev = np.einsum("ij,ij->i", Q, Q)

    vcov = None
    if robust:
        h = lev if leverage_override is None else np.asarray(leverage_override, dtype=float)
        wts = np.ones(n) if w is None else w
        active = wts > 0
        one = active & (1.0 - h < LEVERAGE_TOL)
        if np.any(one):
            units = np.flatnonzero(one).tolist()
            raise LeverageError(f"HC2 undefined: unit(s) {units} have leverage 1", units)
        omega = np.where(active, wts * resid**2 / np.where(active, 1.0 - h, 1.0), 0.0)
        Rinv = np.linalg.solve(R, np.eye(k))
        meat = Q.T @ (Q * omega[:, None])
        vcov = Rinv @ meat @ Rinv.T
        vcov = (vcov + vcov.T) / 2
    return FitResult(beta, resid, lev, vcov, fitted, design.names, w)


def covariate_design(data: Dataset, columns: Optional[Sequence[str]] = None) -> DesignMatrix:
    """Intercept plus covariates (all, or the named subset)."""
    X = data.covariates if columns is None else data.select(columns)
    names = data.covariate_names if columns is None else tuple(columns)
    return DesignMatrix(np.column_stack([np.ones(data.n), X]), ("(Intercept)", *names))


def regression_design(data: Dataset, columns: Optional[Sequence[str]] = None) -> DesignMatrix:
    """Design for ``Y ~ 1 + D + X``."""
    X = data.covariates if columns is None else data.select(columns)
    names = data.covariate_names if columns is None else tuple(columns)
    return DesignMatrix(np.column_stack([np.ones(data.n), data.treatment, X]),
                        ("(Intercept)", "D", *names))


def treatment_fit(data: Dataset, columns: Optional[Sequence[str]] = None) -> FitResult:
    """Linear probability fit of treatment on intercept plus covariates."""
    return ols_fit(covariate_design(data, columns), data.treatment, robust=False)


def fwl_residualize(data: Dataset, columns: Optional[Sequence[str]] = None) -> np.ndarray:
    """Residual of treatment after projecting out intercept and covariates.

    The OLS coefficient on treatment in ``Y ~ 1 + D + X`` equals
    ``sum(Y * r) / sum(r**2)`` for the returned residual ``r``.
    """
    return treatment_fit(data, columns).residuals
