"""Name-to-estimator registry shared by the CLI and the Monte Carlo harness."""

from __future__ import annotations

from typing import Callable, Dict, List, Optional

from .balancing import DEFAULT_MAX_ITER, DEFAULT_TOL, estimate_meanbal
from .blocks import estimate_block_ame, estimate_block_dim, estimate_block_fe, estimate_block_ipw
from .data import Dataset
from .estimators import (
    EstimateReport,
    estimate_impute,
    estimate_interact,
    estimate_match,
    estimate_reg,
    estimate_stratify,
)

DEFAULT_OPTIONS = {
    "tol": DEFAULT_TOL,
    "max_iter": DEFAULT_MAX_ITER,
    "ties": "average",
    "standardize": True,
    "seed": None,
    "drop_degenerate": False,
}

_REGISTRY: Dict[str, Callable] = {
    "reg": lambda d, o: [estimate_reg(d)],
    "interact": lambda d, o: [estimate_interact(d)],
    "impute": lambda d, o: [estimate_impute(d)],
    "stratify": lambda d, o: [estimate_stratify(d, drop_degenerate=o["drop_degenerate"])],
    "match": lambda d, o: [estimate_match(d, o["standardize"], o["ties"], o["seed"])],
    "meanbal": lambda d, o: list(estimate_meanbal(d, o["tol"], o["max_iter"])),
    "block_fe": lambda d, o: [estimate_block_fe(d)],
    "block_ame": lambda d, o: [estimate_block_ame(d)],
    "block_ipw": lambda d, o: [estimate_block_ipw(d)],
    "block_dim": lambda d, o: [estimate_block_dim(d)],
}
# meanbal-adj shares the balancing solve with meanbal
_ALIASES = {"meanbal-adj": "meanbal"}

METHODS = tuple(list(_REGISTRY) + list(_ALIASES))


def canonical(name: str) -> str:
    name = name.strip().lower()
    if name in ("meanbal_adj", "meanbal-adj"):
        return "meanbal-adj"
    name = name.replace("-", "_")
    if name not in METHODS:
        raise KeyError(f"unknown method {name!r}; available: {', '.join(METHODS)}")
    return name


def run_methods(
    data: Dataset,
    methods: List[str],
    options: Optional[dict] = None,
) -> Dict[str, object]:
    """Run each named method; map name to EstimateReport or the raised exception."""
    opts = {**DEFAULT_OPTIONS, **(options or {})}
    names = [canonical(m) for m in methods]
    out: Dict[str, object] = {}
    cache: Dict[str, object] = {}
    for name in names:
        base = _ALIASES.get(name, name)
        if base not in cache:
            try:
                cache[base] = {r.method: r for r in _REGISTRY[base](data, opts)}
            except Exception as e:  # noqa: BLE001 - reported per method
                cache[base] = e
        res = cache[base]
        out[name] = res if isinstance(res, Exception) else res[name]
    return out


def report_or_raise(result) -> EstimateReport:
    if isinstance(result, Exception):
        raise result
    return result
