"""ATE point estimators with analytical standard errors.

Every estimator takes a :class:`~olsweights.data.Dataset` and returns an
:class:`EstimateReport`.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import Dataset, stratify
from .errors import DataError, DegenerateStrataError, LeverageError, SingularDesignError
from .linmod import DesignMatrix, ols_fit, regression_design

TIE_RULES = ("average", "lowest-index", "random")


@dataclass
class EstimateReport:
    method: str
    estimate: float
    std_error: Optional[float]
    n_used: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.estimate):
            raise ValueError(f"{self.method}: non-finite estimate {self.estimate}")
        if self.std_error is not None:
            if not self.std_error >= 0:
                raise ValueError(f"{self.method}: invalid standard error {self.std_error}")
            self.std_error = float(self.std_error)
        self.estimate = float(self.estimate)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "estimate": self.estimate,
            "se": self.std_error,
            "n_used": self.n_used,
            "metadata": self.metadata,
        }

    def csv_row(self) -> list:
        se = "" if self.std_error is None else repr(self.std_error)
        meta = json.dumps(self.metadata, sort_keys=True, default=_json_default)
        return [self.method, repr(self.estimate), se, str(self.n_used), meta]


CSV_HEADER = ["method", "estimate", "se", "n_used", "metadata"]


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


# --------------------------------------------------------------------------
# Regression-based estimators
# --------------------------------------------------------------------------


def robust_fit(design: DesignMatrix, y, weights=None, meta: Optional[dict] = None):
    """``ols_fit`` that degrades to a fit without covariance when HC2 is undefined.

    The leverage failure is recorded under ``meta["se_unavailable"]``.
    """
    try:
        return ols_fit(design, y, weights=weights)
    except LeverageError as e:
        if meta is not None:
            meta["se_unavailable"] = str(e)
        return ols_fit(design, y, weights=weights, robust=False)


def coef_se(fit, name: str) -> Optional[float]:
    return None if fit.vcov_hc2 is None else fit.se(name)


def estimate_reg(data: Dataset) -> EstimateReport:
    """Coefficient on D in ``Y ~ 1 + D + X`` with its HC2 standard error."""
    meta = {"se": "HC2"}
    fit = robust_fit(regression_design(data), data.outcome, meta=meta)
    return EstimateReport("reg", fit.coef("D"), coef_se(fit, "D"), data.n, meta)


def interacted_design(data: Dataset) -> DesignMatrix:
    """``1, D, X - mean(X), D * (X - mean(X))``."""
    Xc = data.covariates - data.covariates.mean(axis=0)
    d = data.treatment
    names = data.covariate_names
    cols = [np.ones(data.n), d, *Xc.T, *(d[:, None] * Xc).T]
    return DesignMatrix(
        np.column_stack(cols),
        ("(Intercept)", "D", *(f"{c}_c" for c in names), *(f"D:{c}_c" for c in names)),
    )


def estimate_interact(data: Dataset) -> EstimateReport:
    """Lin's interacted regression: the D coefficient after centering X."""
    meta = {"se": "HC2"}
    fit = robust_fit(interacted_design(data), data.outcome, meta=meta)
    return EstimateReport("interact", fit.coef("D"), coef_se(fit, "D"), data.n, meta)


def _arm_fit(data: Dataset, arm: int, meta: dict):
    mask = data.treatment == float(arm)
    n_arm = int(mask.sum())
    label = "treated" if arm == 1 else "control"
    if n_arm <= data.p + 1:
        raise DataError(f"{label} arm has {n_arm} units; imputation needs more than {data.p + 1}")
    X = np.column_stack([np.ones(n_arm), data.covariates[mask]])
    try:
        return robust_fit(DesignMatrix(X, ("(Intercept)", *data.covariate_names)),
                          data.outcome[mask], meta=meta)
    except SingularDesignError as e:
        raise SingularDesignError(f"{label} arm: {e}", e.columns) from None


def estimate_impute(data: Dataset) -> EstimateReport:
    """Regression imputation (g-computation) with per-arm linear outcome models.

    The variance treats the covariate mean as fixed:
    ``xbar' V1 xbar + xbar' V0 xbar`` with ``xbar = (1, mean(X))`` and
    ``V1``, ``V0`` the HC2 coefficient covariances of the arm fits.
    """
    meta: dict = {"se": "HC2 per arm, covariate mean held fixed"}
    f1 = _arm_fit(data, 1, meta)
    f0 = _arm_fit(data, 0, meta)
    xbar = np.concatenate([[1.0], data.covariates.mean(axis=0)])
    est = float(xbar @ (f1.coefficients - f0.coefficients))
    meta["coef_treated"] = f1.coefficients.tolist()
    meta["coef_control"] = f0.coefficients.tolist()
    se = None
    if f1.vcov_hc2 is not None and f0.vcov_hc2 is not None:
        var = float(xbar @ f1.vcov_hc2 @ xbar + xbar @ f0.vcov_hc2 @ xbar)
        se = math.sqrt(max(var, 0.0))
    return EstimateReport("impute", est, se, data.n, meta)


# --------------------------------------------------------------------------
# Stratification
# --------------------------------------------------------------------------


def estimate_stratify(
    data: Dataset,
    by=None,
    drop_degenerate: bool = False,
    method: str = "stratify",
) -> EstimateReport:
    """Share-weighted average of within-stratum differences in means.

    The variance sums squared stratum shares times the Neyman variance of
    each stratum DIM (sample variances, divisor n - 1). If any arm of any
    kept stratum has a single unit the standard error is reported as None.
    """
    strata = stratify(data, by)
    bad = [s.key for s in strata if s.n_treated == 0 or s.n_control == 0]
    if bad and not drop_degenerate:
        raise DegenerateStrataError(f"strata lacking a treated or control unit: {bad}", bad)
    meta: dict = {"se": "Neyman, stratified"}
    if bad:
        warnings.warn(f"dropping {len(bad)} single-arm strata {bad}; shares renormalized", stacklevel=2)
        meta["dropped_strata"] = [list(k) for k in bad]
    kept = [s for s in strata if s.key not in bad]
    total = sum(s.n_x for s in kept)
    y, t = data.outcome, data.treated

    est = 0.0
    var = 0.0
    singleton = []
    rows = []
    for s in kept:
        y1 = y[s.indices][t[s.indices]]
        y0 = y[s.indices][~t[s.indices]]
        share = s.n_x / total
        dim = y1.mean() - y0.mean()
        est += share * dim
        if y1.size < 2 or y0.size < 2:
            singleton.append(list(s.key))
        else:
            var += share**2 * (y1.var(ddof=1) / y1.size + y0.var(ddof=1) / y0.size)
        rows.append({"key": list(s.key), "n": s.n_x, "pi": s.pi_x, "share": share, "dim": float(dim)})
    meta["strata"] = rows
    se: Optional[float] = math.sqrt(var)
    if singleton:
        warnings.warn(f"strata {singleton} have a singleton arm; standard error unavailable", stacklevel=2)
        meta["se_missing_strata"] = singleton
        se = None
    return EstimateReport(method, est, se, total, meta)


# --------------------------------------------------------------------------
# Matching
# --------------------------------------------------------------------------


def _nearest(Zq, Zc, exclude_self=False, ties="average", rng=None, chunk=2048):
    """Nearest-candidate sets for each query row.

    Returns a list of index arrays into ``Zc`` (one per query row). Ties are
    candidates at exactly the minimum distance (up to rounding).
    """
    out = []
    cn = np.einsum("ij,ij->i", Zc, Zc)
    for start in range(0, Zq.shape[0], chunk):
        q = Zq[start:start + chunk]
        D = np.einsum("ij,ij->i", q, q)[:, None] + cn[None, :] - 2.0 * q @ Zc.T
        np.maximum(D, 0.0, out=D)
        if exclude_self:
            D[np.arange(q.shape[0]), np.arange(start, start + q.shape[0])] = np.inf
        dmin = D.min(axis=1)
        tie = D <= dmin[:, None] + 1e-12 * (1.0 + dmin[:, None])
        for r in range(q.shape[0]):
            cand = np.flatnonzero(tie[r])
            if ties == "average" or cand.size == 1:
                out.append(cand)
            elif ties == "lowest-index":
                out.append(cand[:1])
            else:
                out.append(cand[[rng.integers(cand.size)]])
    return out


def estimate_match(
    data: Dataset,
    standardize: bool = True,
    ties: str = "average",
    seed: Optional[int] = None,
) -> EstimateReport:
    """One-to-one nearest-neighbor matching with replacement for the ATE.

    Each unit's missing potential outcome is imputed from its nearest
    opposite-arm unit(s) in Euclidean distance on the covariates (divided by
    their full-sample standard deviation when ``standardize``). ``ties``:

    ``"average"``
        average over all equidistant matches (Abadie-Imbens convention)
    ``"lowest-index"``
        keep the tied match with the smallest row index
    ``"random"``
        pick one tied match uniformly using ``seed``

    The standard error is the Abadie-Imbens (2006) estimator for M = 1, with
    conditional variances from the nearest same-arm unit (same tie rule).
    Averaged ties give fractional match weights; the multiplicity term then
    uses ``K_i**2 + 2 K_i - sum_j w_ji**2``, which is ``K_i**2 + K_i`` when
    every match is unique.
    """
    if ties not in TIE_RULES:
        raise ValueError(f"unknown tie rule {ties!r}; choose from {TIE_RULES}")
    rng = np.random.default_rng(seed) if ties == "random" else None
    X = data.covariates
    if X.shape[1] == 0:
        X = np.zeros((data.n, 1))
    if standardize:
        sd = X.std(axis=0, ddof=1)
        X = X / np.where(sd > 0, sd, 1.0)
    y = data.outcome
    t = data.treated
    idx = {1: np.flatnonzero(t), 0: np.flatnonzero(~t)}
    n = data.n

    imputed = np.empty(n)
    K = np.zeros(n)
    K2 = np.zeros(n)
    sigma2 = np.zeros(n)
    for arm, other in ((1, 0), (0, 1)):
        q, c = idx[arm], idx[other]
        for i, m in zip(q, _nearest(X[q], X[c], ties=ties, rng=rng)):
            imputed[i] = y[c[m]].mean()
            K[c[m]] += 1.0 / m.size
            K2[c[m]] += 1.0 / m.size**2
    notes = []
    for arm in (1, 0):
        q = idx[arm]
        if q.size < 2:
            notes.append(f"arm {arm} has a single unit; its conditional variance set to 0")
            continue
        for i, m in zip(q, _nearest(X[q], X[q], exclude_self=True, ties=ties, rng=rng)):
            J = m.size
            sigma2[i] = J / (J + 1.0) * (y[i] - y[q[m]].mean()) ** 2

    y1 = np.where(t, y, imputed)
    y0 = np.where(t, imputed, y)
    tau_i = y1 - y0
    est = float(tau_i.mean())
    # each unit enters with total weight (1 + K_i); the first sum already
    # carries its own variance plus the squared match weights K2_i, which
    # leaves K_i^2 + 2 K_i - K2_i (= K_i^2 + K_i without ties)
    var = (np.sum((tau_i - est) ** 2) + np.sum((K**2 + 2 * K - K2) * sigma2)) / n**2
    meta = {
        "se": "Abadie-Imbens, M=1, J=1",
        "ties": ties,
        "standardize": standardize,
        "max_match_count": float(K.max()),
    }
    if seed is not None:
        meta["seed"] = seed
    if notes:
        meta["notes"] = notes
    return EstimateReport("match", est, math.sqrt(var), n, meta)
