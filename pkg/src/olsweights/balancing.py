"""Maximum-entropy mean-balancing weights targeting the ATE.

For one arm, the weights minimize ``sum w_i log(w_i / q_i)`` (uniform base
weights ``q``) subject to ``sum w_i = 1`` and ``sum w_i X_i = mean(X)`` over
the full sample. The solve runs damped Newton on the convex dual

    f(lam) = log sum_i q_i exp(Z_i' lam)

where ``Z`` are the arm's covariates centered at the target and divided by
the full-sample standard deviation. The gradient of ``f`` is the
standardized balance gap. Iteration stops once that gap is below ``tol``
and, for covariates with standard deviation above one, the gap on the
original scale is too (when float precision allows it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .data import Dataset
from .errors import ConvergenceError, InfeasibleBalanceError
from .estimators import EstimateReport, coef_se, robust_fit
from .linmod import DesignMatrix, regression_design

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
MAX_HALVINGS = 40


@dataclass
class BalanceSolution:
    weights: np.ndarray
    dual: np.ndarray
    max_violation: float
    iterations: int
    arm: str
    indices: np.ndarray
    kkt_residual: float

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "weights": self.weights.tolist(),
            "indices": self.indices.tolist(),
            "dual": self.dual.tolist(),
            "max_violation": self.max_violation,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
        }


def _separating_direction(Z: np.ndarray) -> Optional[np.ndarray]:
    """A unit-box direction ``v`` with ``Z_i' v > 0`` for every row, if any.

    Such a direction exists exactly when the origin lies strictly outside
    the convex hull of the rows of ``Z``.
    """
    m, p = Z.shape
    # variables (v, s): maximize s subject to Z v >= s, -1 <= v <= 1
    c = np.zeros(p + 1)
    c[-1] = -1.0
    A = np.hstack([-Z, np.ones((m, 1))])
    res = linprog(c, A_ub=A, b_ub=np.zeros(m),
                  bounds=[(-1, 1)] * p + [(None, 1)], method="highs")
    if res.status == 0 and -res.fun > 1e-9:
        return res.x[:p]
    return None


def _dual_state(Z, logq, lam):
    eta = logq + Z @ lam
    lse = logsumexp(eta)
    w = np.exp(eta - lse)
    return lse, w


def solve_mean_balance(
    data: Dataset,
    arm: str = "treated",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    target=None,
) -> BalanceSolution:
    """Entropy-balance one arm so its weighted covariate mean hits ``target``.

    ``target`` defaults to the full-sample covariate mean. ``dual`` is
    reported on the original covariate scale, so ``w_i`` is proportional to
    ``q_i * exp(X_i' dual)``.
    """
    if arm not in ("treated", "control"):
        raise ValueError(f"arm must be 'treated' or 'control', got {arm!r}")
    mask = data.treated if arm == "treated" else ~data.treated
    idx = np.flatnonzero(mask)
    m = idx.size
    if m == 0:
        raise ValueError(f"{arm} arm is empty")
    X = data.covariates
    p = X.shape[1]
    tgt = X.mean(axis=0) if target is None else np.asarray(target, dtype=float)
    sd = X.std(axis=0) if X.shape[0] > 1 else np.ones(p)
    sd = np.where(sd > 0, sd, 1.0)
    Z = (X[idx] - tgt) / sd
    logq = np.full(m, -math.log(m))

    if p == 0:
        w = np.full(m, 1.0 / m)
        return BalanceSolution(w, np.zeros(0), 0.0, 0, arm, idx, 0.0)

    direction = _separating_direction(Z)
    if direction is not None:
        names = data.covariate_names
        desc = ", ".join(f"{n}:{v:+.3g}" for n, v in zip(names, direction / sd))
        raise InfeasibleBalanceError(
            f"{arm} arm cannot be balanced: the target mean lies outside the convex hull "
            f"of its covariates (every {arm} unit is on one side along direction [{desc}])",
            direction=direction / sd,
        )

    # stop when both the standardized gap and the raw-scale gap (for
    # columns with sd above one) are within tol
    scale = np.maximum(sd, 1.0)
    lam = np.zeros(p)
    f, w = _dual_state(Z, logq, lam)
    g = w @ Z
    it = 0
    while np.max(np.abs(g) * scale) > tol:
        if np.max(np.abs(g)) <= tol and it >= max_iter:
            # raw-scale target unreachable in floating point; standardized one is met
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"{arm} balance did not converge in {max_iter} iterations; "
                f"max standardized violation {np.max(np.abs(g)):.3e}",
                violation=float(np.max(np.abs(g))),
            )
        Zc = Z - g
        H = (Zc * w[:, None]).T @ Zc
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        slope = g @ step
        for _ in range(MAX_HALVINGS):
            f_new, w_new = _dual_state(Z, logq, lam + t * step)
            if f_new <= f + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            if np.max(np.abs(g)) <= tol:
                break
            raise ConvergenceError(
                f"{arm} balance line search failed; max standardized violation "
                f"{np.max(np.abs(g)):.3e}",
                violation=float(np.max(np.abs(g))),
            )
        lam = lam + t * step
        f, w = f_new, w_new
        g = w @ Z
        it += 1

    raw_gap = np.abs(w @ X[idx] - tgt)
    return BalanceSolution(
        weights=w,
        dual=lam / sd,
        max_violation=float(np.max(raw_gap / sd)),
        iterations=it,
        arm=arm,
        indices=idx,
        kkt_residual=float(np.max(np.abs(g))),
    )


def balancing_weights(data: Dataset, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Both arms' solutions and the combined per-unit weight vector."""
    s1 = solve_mean_balance(data, "treated", tol, max_iter)
    s0 = solve_mean_balance(data, "control", tol, max_iter)
    w = np.empty(data.n)
    w[s1.indices] = s1.weights
    w[s0.indices] = s0.weights
    return s1, s0, w


def estimate_meanbal(
    data: Dataset,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple:
    """Weighted difference in means under entropy-balancing weights.

    Returns ``(meanbal, meanbal-adj)`` reports sharing the point estimate.
    ``meanbal`` takes the HC2 standard error of D in the weighted regression
    ``Y ~ 1 + D``; ``meanbal-adj`` the one from ``Y ~ 1 + D + X``. Weights
    sum to one within each arm in both regressions.
    """
    s1, s0, w = balancing_weights(data, tol, max_iter)
    y = data.outcome
    est = float(s1.weights @ y[s1.indices] - s0.weights @ y[s0.indices])

    plain = DesignMatrix(np.column_stack([np.ones(data.n), data.treatment]), ("(Intercept)", "D"))
    meta = {
        "iterations": [s1.iterations, s0.iterations],
        "max_violation": max(s1.max_violation, s0.max_violation),
        "leverage": "weighted hat diagonal w_i x_i'(X'WX)^-1 x_i",
        "weight_normalization": "sum to 1 within arm",
    }
    m_plain = {**meta, "se": "HC2, weighted Y ~ 1 + D"}
    m_adj = {**meta, "se": "HC2, weighted Y ~ 1 + D + X"}
    f_plain = robust_fit(plain, y, weights=w, meta=m_plain)
    f_adj = robust_fit(regression_design(data), y, weights=w, meta=m_adj)
    m_plain["regression_coefficient"] = f_plain.coef("D")
    m_adj["regression_coefficient"] = f_adj.coef("D")
    r_plain = EstimateReport("meanbal", est, coef_se(f_plain, "D"), data.n, m_plain)
    r_adj = EstimateReport("meanbal-adj", est, coef_se(f_adj, "D"), data.n, m_adj)
    return r_plain, r_adj
