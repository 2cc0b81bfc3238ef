"""Implied regression weights and the diagnostics built from them.

The OLS coefficient on treatment in ``Y ~ 1 + D + X`` is a linear
combination ``sum_i w_i Y_i`` with ``w_i`` proportional to the residual of a
linear probability fit of D on X. This module exposes those unit weights,
their regrouping into strata (both the conditional-variance form and the
general form that keeps the linear-fit misfit ``a_x``), the implied covariate
profile, and the Sloczynski delta diagnostic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import Dataset, stratify
from .errors import DegenerateStrataError, ValidationError
from .linmod import ols_fit, regression_design, treatment_fit


@dataclass(frozen=True)
class ImpliedWeights:
    w: np.ndarray
    w_tilde: np.ndarray
    d_hat: np.ndarray
    negative_flags: np.ndarray
    denominator: float

    @property
    def n_negative(self) -> int:
        return int(self.negative_flags.sum())

    def to_dict(self) -> dict:
        return {
            "w": self.w.tolist(),
            "w_tilde": self.w_tilde.tolist(),
            "d_hat": self.d_hat.tolist(),
            "negative": self.negative_flags.tolist(),
            "denominator": self.denominator,
        }


def unit_weights(data: Dataset, columns: Optional[Sequence[str]] = None) -> ImpliedWeights:
    """Per-unit weights whose dot product with Y is the OLS treatment coefficient.

    ``w`` is the signed-sum form; ``w_tilde`` flips the sign for controls so
    the coefficient reads as a weighted treated mean minus a weighted control
    mean. A unit is flagged negative when it is treated with fitted treatment
    probability above one, or control with fitted probability below zero.
    """
    fit = treatment_fit(data, columns)
    resid = fit.residuals
    denom = float(resid @ resid)
    scale = float(data.n)
    if denom <= 1e-12 * scale:
        raise ValidationError("treatment has no residual variation after projecting out covariates")
    w = resid / denom
    d = data.treatment
    w_tilde = np.where(d == 1.0, w, -w)
    d_hat = fit.fitted
    flags = ((d == 1.0) & (d_hat > 1.0)) | ((d == 0.0) & (d_hat < 0.0))
    return ImpliedWeights(w, w_tilde, d_hat, flags, denom)


def ols_treatment_coefficient(data: Dataset, columns: Optional[Sequence[str]] = None) -> float:
    """Coefficient on D from the joint fit ``Y ~ 1 + D + X``."""
    return ols_fit(regression_design(data, columns), data.outcome, robust=False).coef("D")


@dataclass
class StratumRow:
    key: tuple
    n_x: int
    n_treated: int
    p_hat: float
    pi: float
    d_hat: float
    a: float
    mean_y: float
    dim: float
    weight_natural: float = 0.0
    weight_angrist: float = 0.0
    general_numerator: float = 0.0
    general_denominator: float = 0.0

    def to_dict(self) -> dict:
        return {
            "key": list(self.key), "n_x": self.n_x, "n_treated": self.n_treated,
            "p_hat": self.p_hat, "pi": self.pi, "d_hat": self.d_hat, "a": self.a,
            "mean_y": self.mean_y, "dim": self.dim,
            "weight_natural": self.weight_natural, "weight_angrist": self.weight_angrist,
            "general_numerator": self.general_numerator,
            "general_denominator": self.general_denominator,
        }


@dataclass
class StrataDecomposition:
    strata: list
    natural_estimate: float
    angrist_reconstruction: float
    general_reconstruction: float
    ols_coefficient: float
    dropped: list = field(default_factory=list)

    @property
    def max_abs_a(self) -> float:
        return max(abs(s.a) for s in self.strata)

    def to_dict(self) -> dict:
        return {
            "strata": [s.to_dict() for s in self.strata],
            "natural_estimate": self.natural_estimate,
            "angrist_reconstruction": self.angrist_reconstruction,
            "general_reconstruction": self.general_reconstruction,
            "ols_coefficient": self.ols_coefficient,
            "max_abs_a": self.max_abs_a,
            "dropped": [list(k) for k in self.dropped],
        }


def strata_weights(
    data: Dataset,
    by: Optional[Sequence[str]] = None,
    drop_degenerate: bool = False,
) -> StrataDecomposition:
    """Regroup the OLS coefficient into per-stratum weights.

    The treatment fit and the reference OLS fit both use the stratifying
    columns ``by`` (default: all covariates), so the linear treatment fit is
    constant within a stratum. ``pi`` is the in-sample treated share of a
    stratum and ``mean_y`` its in-sample outcome mean.

    Single-arm strata raise :class:`DegenerateStrataError` unless
    ``drop_degenerate`` is set, in which case they are removed and the
    stratum shares renormalized over the rest (with a warning). Dropping
    breaks the exact in-sample reconstruction.
    """
    cols = list(data.covariate_names) if by is None else list(by)
    strata = stratify(data, cols)
    bad = [s.key for s in strata if s.n_treated == 0 or s.n_control == 0]
    if bad and not drop_degenerate:
        raise DegenerateStrataError(
            f"strata lacking a treated or control unit: {bad}", bad
        )
    if bad:
        warnings.warn(f"dropping {len(bad)} single-arm strata {bad}; shares renormalized", stacklevel=2)

    fit = treatment_fit(data, cols)
    y, d = data.outcome, data.treatment
    kept = [s for s in strata if s.key not in bad]
    total = sum(s.n_x for s in kept)
    rows = []
    for s in kept:
        idx = s.indices
        d_hat = float(fit.fitted[idx[0]])
        pi = s.pi_x
        a = d_hat - pi
        y1 = y[idx][d[idx] == 1.0]
        y0 = y[idx][d[idx] == 0.0]
        rows.append(StratumRow(
            key=s.key, n_x=s.n_x, n_treated=s.n_treated, p_hat=s.n_x / total,
            pi=pi, d_hat=d_hat, a=a, mean_y=float(y[idx].mean()),
            dim=float(y1.mean() - y0.mean()),
        ))

    p = np.array([r.p_hat for r in rows])
    dims = np.array([r.dim for r in rows])
    dh = np.array([r.d_hat for r in rows])
    pi = np.array([r.pi for r in rows])
    a = np.array([r.a for r in rows])
    my = np.array([r.mean_y for r in rows])

    ang = dh * (1 - dh) * p
    gnum = p * (pi * (1 - pi) * dims - a * my)
    gden = p * (pi * (1 - pi - a) + a * (pi + a))
    for r, wn, wa, gn, gd in zip(rows, p, ang / ang.sum(), gnum, gden):
        r.weight_natural, r.weight_angrist = float(wn), float(wa)
        r.general_numerator, r.general_denominator = float(gn), float(gd)

    return StrataDecomposition(
        strata=rows,
        natural_estimate=float(p @ dims),
        angrist_reconstruction=float(ang @ dims / ang.sum()),
        general_reconstruction=float(gnum.sum() / gden.sum()),
        ols_coefficient=ols_treatment_coefficient(data, cols),
        dropped=bad,
    )


def population_reconstructions(support, p_x, p_d, tau, mu0) -> dict:
    """Angrist and general reconstructions from population strata quantities.

    ``support`` is a 1-D covariate support with probabilities ``p_x``,
    treatment probabilities ``p_d``, stratum effects ``tau`` and control mean
    outcomes ``mu0``. The linear treatment fit is the ``p_x``-weighted
    projection of ``p_d`` on ``[1, x]``.
    """
    x = np.asarray(support, dtype=float)
    p = np.asarray(p_x, dtype=float)
    pi = np.asarray(p_d, dtype=float)
    tau = np.asarray(tau, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    Z = np.column_stack([np.ones_like(x), x])
    theta = np.linalg.solve(Z.T @ (Z * p[:, None]), Z.T @ (p * pi))
    dh = Z @ theta
    a = dh - pi
    ey = mu0 + pi * tau
    ang = dh * (1 - dh) * p
    gnum = p * (pi * (1 - pi) * tau - a * ey)
    gden = p * (pi * (1 - pi - a) + a * (pi + a))
    return {
        "ate": float(p @ tau),
        "angrist": float(ang @ tau / ang.sum()),
        "angrist_true_propensity": float((pi * (1 - pi) * p) @ tau / (pi * (1 - pi) * p).sum()),
        "general": float(gnum.sum() / gden.sum()),
        "d_hat": dh.tolist(),
        "a": a.tolist(),
    }


@dataclass
class EffectiveSampleProfile:
    treated_mean: np.ndarray
    control_mean: np.ndarray
    overall_mean: np.ndarray
    names: tuple
    outside_treated_range: np.ndarray
    outside_control_range: np.ndarray
    n_negative: int

    @property
    def leaves_hull(self) -> bool:
        return bool(self.outside_treated_range.any() or self.outside_control_range.any())

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "treated_mean": self.treated_mean.tolist(),
            "control_mean": self.control_mean.tolist(),
            "overall_mean": self.overall_mean.tolist(),
            "outside_treated_range": self.outside_treated_range.tolist(),
            "outside_control_range": self.outside_control_range.tolist(),
            "n_negative_weights": self.n_negative,
            "leaves_hull": self.leaves_hull,
        }


def effective_sample_profile(data: Dataset, iw: Optional[ImpliedWeights] = None) -> EffectiveSampleProfile:
    """Covariate means under the implied weights, per arm, against the raw mean.

    With negative weights the implied means can fall outside the range of the
    arm's own covariates; those columns are flagged.
    """
    iw = iw or unit_weights(data)
    X = data.covariates
    t = data.treated
    tm = iw.w_tilde[t] @ X[t]
    cm = iw.w_tilde[~t] @ X[~t]
    eps = 1e-12 * (1 + np.abs(X).max(axis=0))

    def outside(m, Z):
        return (m < Z.min(axis=0) - eps) | (m > Z.max(axis=0) + eps)

    return EffectiveSampleProfile(
        tm, cm, X.mean(axis=0), data.covariate_names,
        outside(tm, X[t]), outside(cm, X[~t]), iw.n_negative,
    )


@dataclass
class DeltaResult:
    delta: float
    rho: float
    var_treated: float
    var_control: float
    tau_att: float
    tau_atc: float
    predicted_bias: float
    convention: str
    note: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def sloczynski_delta(
    data: Dataset,
    pscores=None,
    by: Optional[Sequence[str]] = None,
    ddof: int = 0,
) -> DeltaResult:
    """Sloczynski's delta and the bias it predicts for the OLS coefficient.

    ``pscores`` gives each unit's treatment probability; by default it is the
    in-sample treated share of the unit's stratum. Variances of the
    probabilities are taken over units within each arm with divisor
    ``count - ddof`` (``ddof=0``: population style, the default). The
    predicted bias is ``delta * (ATC - ATT)`` with stratified ATT and ATC.
    """
    strata = stratify(data, by)
    bad = [s.key for s in strata if s.n_treated == 0 or s.n_control == 0]
    if bad:
        raise DegenerateStrataError(f"strata lacking a treated or control unit: {bad}", bad)
    d = data.treatment
    y = data.outcome
    t = d == 1.0
    if pscores is None:
        ps = np.empty(data.n)
        for s in strata:
            ps[s.indices] = s.pi_x
    else:
        ps = np.asarray(pscores, dtype=float)
        if ps.shape[0] != data.n:
            raise ValidationError(f"pscores have length {ps.shape[0]}, dataset has {data.n}")

    n1, n0 = int(t.sum()), int((~t).sum())
    att = atc = 0.0
    for s in strata:
        idx = s.indices
        dim = y[idx][t[idx]].mean() - y[idx][~t[idx]].mean()
        att += s.n_treated / n1 * dim
        atc += s.n_control / n0 * dim

    rho = n1 / data.n
    v1 = float(np.var(ps[t], ddof=ddof)) if n1 > ddof else 0.0
    v0 = float(np.var(ps[~t], ddof=ddof)) if n0 > ddof else 0.0
    den = rho * v1 + (1 - rho) * v0
    conv = "population" if ddof == 0 else f"sample(ddof={ddof})"
    if den <= 1e-15:
        return DeltaResult(0.0, rho, v1, v0, float(att), float(atc), 0.0, conv,
                           "no treatment-probability variation")
    delta = (rho**2 * v1 - (1 - rho) ** 2 * v0) / den
    return DeltaResult(float(delta), rho, v1, v0, float(att), float(atc),
                       float(delta * (atc - att)), conv)
