"""Estimators for block-randomized experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .data import Dataset
from .errors import DegenerateStrataError, ValidationError
from .estimators import EstimateReport, coef_se, estimate_stratify, robust_fit
from .linmod import DesignMatrix


@dataclass(frozen=True)
class BlockDesign:
    labels: tuple
    codes: np.ndarray
    sizes: np.ndarray
    n_treated: np.ndarray

    @property
    def P(self) -> int:
        return len(self.labels)

    @property
    def shares(self) -> np.ndarray:
        return self.sizes / self.sizes.sum()

    @property
    def pi(self) -> np.ndarray:
        return self.n_treated / self.sizes

    def table(self, data: Dataset) -> list:
        y, t = data.outcome, data.treated
        rows = []
        for b, lab in enumerate(self.labels):
            m = self.codes == b
            y1, y0 = y[m & t], y[m & ~t]
            rows.append({
                "block": lab, "n": int(self.sizes[b]), "pi": float(self.pi[b]),
                "share": float(self.shares[b]),
                "dim": float(y1.mean() - y0.mean()) if y1.size and y0.size else None,
            })
        return rows


def block_design(data: Dataset) -> BlockDesign:
    """Block bookkeeping; every block must contain both arms."""
    if data.blocks is None:
        raise ValidationError("dataset has no block labels")
    labels, codes = np.unique(data.blocks.astype(str), return_inverse=True)
    P = labels.size
    sizes = np.bincount(codes, minlength=P).astype(float)
    n1 = np.bincount(codes, weights=data.treatment, minlength=P)
    bad = [str(labels[b]) for b in range(P) if n1[b] == 0 or n1[b] == sizes[b]]
    if bad:
        raise DegenerateStrataError(f"blocks lacking a treated or control unit: {bad}", bad)
    return BlockDesign(tuple(str(x) for x in labels), codes, sizes, n1)


def _indicators(bd: BlockDesign, omit: int) -> tuple:
    keep = [b for b in range(bd.P) if b != omit]
    M = (bd.codes[:, None] == np.asarray(keep)[None, :]).astype(float)
    return M, keep


def _omit_index(bd: BlockDesign, omit) -> int:
    if omit is None:
        return 0
    if str(omit) not in bd.labels:
        raise ValidationError(f"unknown block {omit!r} to omit; blocks are {list(bd.labels)}")
    return bd.labels.index(str(omit))


def estimate_block_fe(data: Dataset, omit=None) -> EstimateReport:
    """D coefficient from ``Y ~ 1 + D + block indicators`` with HC2 SE.

    The metadata records the implied block weights, proportional to
    ``pi_b (1 - pi_b) share_b``.
    """
    bd = block_design(data)
    o = _omit_index(bd, omit)
    M, keep = _indicators(bd, o)
    names = ("(Intercept)", "D", *(f"B[{bd.labels[b]}]" for b in keep))
    raw = bd.pi * (1 - bd.pi) * bd.shares
    meta = {"se": "HC2", "blocks": bd.table(data), "implied_block_weights": (raw / raw.sum()).tolist()}
    fit = robust_fit(DesignMatrix(np.column_stack([np.ones(data.n), data.treatment, M]), names),
                     data.outcome, meta=meta)
    return EstimateReport("block_fe", fit.coef("D"), coef_se(fit, "D"), data.n, meta)


def estimate_block_ame(data: Dataset, omit=None) -> EstimateReport:
    """Average marginal effect from the fully interacted block regression.

    Fits ``Y ~ 1 + D + B + D:B`` (one block omitted) and averages the
    block-specific effect ``tau + alpha_b`` over units. The variance is
    ``g' V g`` with ``V`` the HC2 covariance and ``g`` selecting ``tau`` and
    each ``alpha_b`` at its sample share, which expands to the usual
    sum of variances and pairwise covariances.
    """
    bd = block_design(data)
    o = _omit_index(bd, omit)
    M, keep = _indicators(bd, o)
    d = data.treatment
    names = (
        "(Intercept)", "D",
        *(f"B[{bd.labels[b]}]" for b in keep),
        *(f"D:B[{bd.labels[b]}]" for b in keep),
    )
    X = np.column_stack([np.ones(data.n), d, M, d[:, None] * M])
    meta = {"se": "HC2 delta method", "omitted_block": bd.labels[o], "blocks": bd.table(data)}
    fit = robust_fit(DesignMatrix(X, names), data.outcome, meta=meta)
    k = len(keep)
    g = np.zeros(X.shape[1])
    g[1] = 1.0
    g[2 + k:] = bd.shares[keep]
    est = float(g @ fit.coefficients)
    se = None
    if fit.vcov_hc2 is not None:
        se = math.sqrt(max(float(g @ fit.vcov_hc2 @ g), 0.0))
    return EstimateReport("block_ame", est, se, data.n, meta)


def ipw_weights(data: Dataset, design_probabilities: Optional[Mapping] = None) -> np.ndarray:
    """Stabilized inverse-probability weights per unit.

    Block treatment probabilities are the in-sample treated fractions unless
    ``design_probabilities`` maps block labels to known assignment
    probabilities.
    """
    bd = block_design(data)
    if design_probabilities is None:
        pi = bd.pi
    else:
        pi = np.array([float(design_probabilities[lab]) for lab in bd.labels])
    if np.any((pi <= 0) | (pi >= 1)):
        raise ValidationError("block treatment probabilities must lie strictly inside (0, 1)")
    p1 = float(data.treatment.mean())
    pu = pi[bd.codes]
    d = data.treatment
    return np.where(d == 1.0, p1 / pu, (1 - p1) / (1 - pu))


def estimate_block_ipw(data: Dataset, design_probabilities: Optional[Mapping] = None) -> EstimateReport:
    """D coefficient from the stabilized-IPW weighted block fixed-effects fit.

    The weighted difference in means without block indicators gives the
    same point estimate; it is recorded in the metadata.
    """
    bd = block_design(data)
    w = ipw_weights(data, design_probabilities)
    M, keep = _indicators(bd, 0)
    names = ("(Intercept)", "D", *(f"B[{bd.labels[b]}]" for b in keep))
    meta = {
        "se": "HC2, weighted",
        "probabilities": "design" if design_probabilities is not None else "in-sample",
        "blocks": bd.table(data),
    }
    fit = robust_fit(DesignMatrix(np.column_stack([np.ones(data.n), data.treatment, M]), names),
                     data.outcome, weights=w, meta=meta)
    plain = robust_fit(DesignMatrix(np.column_stack([np.ones(data.n), data.treatment]), ("(Intercept)", "D")),
                       data.outcome, weights=w)
    meta["weighted_dim_without_blocks"] = {"estimate": plain.coef("D"), "se": coef_se(plain, "D")}
    return EstimateReport("block_ipw", fit.coef("D"), coef_se(fit, "D"), data.n, meta)


def estimate_block_dim(data: Dataset) -> EstimateReport:
    """Share-weighted blockwise difference in means with Neyman SE."""
    block_design(data)
    return estimate_stratify(data, by="blocks", method="block_dim")
