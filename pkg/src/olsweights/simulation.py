"""Data-generating processes and a seeded Monte Carlo harness.

Three kinds of DGP are supported:

``discrete``
    a finite covariate support with ``P(X=x)``, ``P(D=1|X=x)``, stratum
    effects ``tau_x`` and control means ``mu0_x``.
``continuous``
    ``X ~ Unif[low, high]`` with named propensity, baseline and effect
    functions (module-level so specs pickle across worker processes).
``block``
    fixed block sizes, complete randomization of ``round(pi_b * n_b)``
    treated units per block, constant block effects.

Noise is Gaussian with variance ``var(systematic) * (1 - r2) / r2`` where the
variance uses divisor n, computed afresh for each sample.

Every iteration ``k`` draws from ``numpy.random.default_rng(base_seed + k)``
(PCG64), so results do not depend on scheduling or worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .data import Dataset
from .errors import OlsWeightsError, ValidationError
from .methods import canonical, run_methods
from .weights import population_reconstructions, strata_weights, unit_weights

FAILURE_LIMIT = 0.10
SPOT_CHECK_EVERY = 100
SPOT_CHECK_RTOL = 1e-10
# slope of the linear control-outcome baseline used by the builtin DGPs
BASELINE_SLOPE = 5.0


class MonteCarloAbort(OlsWeightsError):
    """Too many iterations failed for some method."""

    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)


# --------------------------------------------------------------------------
# Named functions for continuous DGPs
# --------------------------------------------------------------------------


def logistic_shifted(x):
    return 1.0 / (1.0 + np.exp(-2.0 - x))


def linear_04(x):
    return 0.1 * x + 0.4


def baseline_linear(x):
    return BASELINE_SLOPE * x


def effect_3x(x):
    return 3.0 * x


def effect_square(x):
    return x**2


CONTINUOUS_FUNCTIONS: Dict[str, Callable] = {
    "logistic_shifted": logistic_shifted,
    "linear_04": linear_04,
    "baseline_linear": baseline_linear,
    "effect_3x": effect_3x,
    "effect_square": effect_square,
}


# --------------------------------------------------------------------------
# DGP specification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DgpSpec:
    """A data-generating process.

    Only the fields belonging to ``kind`` are used. ``noise_r2`` is the
    target R-squared of the systematic part against the noisy outcome;
    None means noiseless. ``ate`` is the population average effect.
    """

    name: str
    kind: str
    ate: float
    noise_r2: Optional[float] = 1.0 / 3.0
    # discrete
    support: tuple = ()
    p_x: tuple = ()
    p_d: tuple = ()
    tau: tuple = ()
    mu0: tuple = ()
    # continuous
    low: float = -3.0
    high: float = 3.0
    propensity: str = ""
    baseline: str = ""
    effect: str = ""
    # block
    block_sizes: tuple = ()
    block_pi: tuple = ()
    block_tau: tuple = ()
    block_baseline: float = 0.0
    # run defaults
    default_n: int = 1000
    default_iterations: int = 500
    default_methods: tuple = ()

    def __post_init__(self):
        if self.kind not in ("discrete", "continuous", "block"):
            raise ValidationError(f"unknown DGP kind {self.kind!r}")
        if self.noise_r2 is not None and not 0.0 < self.noise_r2 <= 1.0:
            raise ValidationError(f"noise_r2 must lie in (0, 1], got {self.noise_r2}")
        if self.kind == "discrete":
            k = len(self.support)
            if k == 0 or any(len(v) != k for v in (self.p_x, self.p_d, self.tau, self.mu0)):
                raise ValidationError("discrete DGP needs support, p_x, p_d, tau, mu0 of equal length")
            px, pd = np.asarray(self.p_x, float), np.asarray(self.p_d, float)
            if np.any(px < 0) or abs(px.sum() - 1.0) > 1e-9:
                raise ValidationError(f"P(X=x) must be nonnegative and sum to 1 (sums to {px.sum()})")
            if np.any((pd < 0) | (pd > 1)):
                raise ValidationError("P(D|X) values must lie in [0, 1]")
        elif self.kind == "continuous":
            for f in (self.propensity, self.baseline, self.effect):
                if f not in CONTINUOUS_FUNCTIONS:
                    raise ValidationError(f"unknown continuous DGP function {f!r}")
            if not self.low < self.high:
                raise ValidationError("continuous DGP needs low < high")
            grid = np.linspace(self.low, self.high, 2001)
            pr = CONTINUOUS_FUNCTIONS[self.propensity](grid)
            if np.any((pr < 0) | (pr > 1)):
                raise ValidationError(f"{self.propensity} leaves [0, 1] on [{self.low}, {self.high}]")
        else:
            k = len(self.block_sizes)
            if k == 0 or len(self.block_pi) != k or len(self.block_tau) != k:
                raise ValidationError("block DGP needs sizes, pi and tau of equal length")
            if any(not 0.0 < p < 1.0 for p in self.block_pi):
                raise ValidationError("block treatment shares must lie strictly in (0, 1)")

    def to_dict(self) -> dict:
        keep = {
            "discrete": ("support", "p_x", "p_d", "tau", "mu0"),
            "continuous": ("low", "high", "propensity", "baseline", "effect"),
            "block": ("block_sizes", "block_pi", "block_tau", "block_baseline"),
        }[self.kind]
        out = {"name": self.name, "kind": self.kind, "ate": self.ate, "noise_r2": self.noise_r2}
        for k in keep:
            v = getattr(self, k)
            out[k] = list(v) if isinstance(v, tuple) else v
        return out


DISCRETE_METHODS = ("stratify", "reg", "impute", "interact", "meanbal", "meanbal-adj", "match")
CONTINUOUS_METHODS = ("reg", "impute", "interact", "meanbal", "meanbal-adj", "match")
BLOCK_METHODS = ("block_fe", "block_ame", "block_ipw", "block_dim")


def discrete_dgp(name, support, p_d, tau, p_x=None, mu0=None, noise_r2=1.0 / 3.0, **kw) -> DgpSpec:
    """Build a discrete DGP; uniform ``p_x`` and a linear baseline by default."""
    support = tuple(float(v) for v in support)
    k = len(support)
    p_x = tuple(float(v) for v in (p_x if p_x is not None else [1.0 / k] * k))
    mu0 = tuple(float(v) for v in (mu0 if mu0 is not None else [BASELINE_SLOPE * x for x in support]))
    tau = tuple(float(v) for v in tau)
    ate = math.fsum(p * t for p, t in zip(p_x, tau))
    ate = 0.0 if abs(ate) < 1e-12 else ate
    kw.setdefault("default_methods", DISCRETE_METHODS)
    return DgpSpec(name=name, kind="discrete", ate=ate, noise_r2=noise_r2, support=support,
                   p_x=p_x, p_d=tuple(float(v) for v in p_d), tau=tau, mu0=mu0, **kw)


def _continuous_ate(spec_effect: str, low: float, high: float) -> float:
    # mean of the effect function under Unif[low, high], by Gauss-Legendre
    nodes, wts = np.polynomial.legendre.leggauss(64)
    x = 0.5 * (high - low) * nodes + 0.5 * (high + low)
    return float(0.5 * wts @ CONTINUOUS_FUNCTIONS[spec_effect](x))


def continuous_dgp(name, propensity, effect, baseline="baseline_linear", low=-3.0, high=3.0, **kw) -> DgpSpec:
    ate = _continuous_ate(effect, low, high)
    ate = 0.0 if abs(ate) < 1e-12 else ate
    kw.setdefault("default_methods", CONTINUOUS_METHODS)
    kw.setdefault("default_iterations", 200)
    return DgpSpec(name=name, kind="continuous", ate=ate, low=low, high=high,
                   propensity=propensity, baseline=baseline, effect=effect, **kw)


_SUPPORT = tuple(range(-3, 4))


def builtin_dgp(name: str) -> DgpSpec:
    """One of ``dgp1, dgp2, dgp3, cont_logistic, cont_linear, cont_nonlinear, block_fig3``."""
    if name == "dgp1":
        return discrete_dgp("dgp1", _SUPPORT, (.1, .1, .1, .5, .5, .5, .5), [3 * x for x in _SUPPORT])
    if name == "dgp2":
        return discrete_dgp("dgp2", _SUPPORT, (.1, .2, .3, .4, .5, .6, .7), [3 * x for x in _SUPPORT])
    if name == "dgp3":
        return discrete_dgp("dgp3", _SUPPORT, (.1, .2, .3, .4, .5, .6, .7), (5, 5, 0, -5, 0, 5, 5),
                            mu0=[BASELINE_SLOPE * x + x * x for x in _SUPPORT])
    if name == "cont_logistic":
        return continuous_dgp("cont_logistic", "logistic_shifted", "effect_3x")
    if name == "cont_linear":
        return continuous_dgp("cont_linear", "linear_04", "effect_3x")
    if name == "cont_nonlinear":
        return continuous_dgp("cont_nonlinear", "linear_04", "effect_square")
    if name == "block_fig3":
        pi = (.25, .25, .5, .25, .25, .5)
        tau = tuple(4.0 * p for p in pi)
        return DgpSpec(name="block_fig3", kind="block", ate=float(np.mean(tau)), noise_r2=None,
                       block_sizes=(200,) * 6, block_pi=pi, block_tau=tau, block_baseline=2.0,
                       default_n=1200, default_methods=BLOCK_METHODS)
    raise ValidationError(f"unknown DGP {name!r}; builtins are {', '.join(BUILTIN_DGPS)}")


BUILTIN_DGPS = ("dgp1", "dgp2", "dgp3", "cont_logistic", "cont_linear", "cont_nonlinear", "block_fig3")


def load_dgp_table(path, name: Optional[str] = None) -> DgpSpec:
    """Read a discrete DGP from a CSV with columns ``x, p_d, tau`` and
    optional ``p_x`` (default uniform) and ``mu0`` (default ``5 x``).

    A ``noise_r2`` column, if present, is read from the first row; an empty
    value or ``none`` means noiseless.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path}: DGP table is empty")
    cols = set(rows[0])
    missing = {"x", "p_d", "tau"} - cols
    if missing:
        raise ValidationError(f"{path}: DGP table lacks column(s) {sorted(missing)}")

    def col(c):
        out = []
        for i, r in enumerate(rows, start=1):
            try:
                out.append(float(r[c]))
            except (TypeError, ValueError):
                raise ValidationError(f"{path}: row {i} column {c!r} is not a number: {r[c]!r}") from None
        return out

    noise = 1.0 / 3.0
    if "noise_r2" in cols:
        v = (rows[0]["noise_r2"] or "").strip().lower()
        noise = None if v in ("", "none") else float(v)
    return discrete_dgp(
        name or path.stem, col("x"), col("p_d"), col("tau"),
        p_x=col("p_x") if "p_x" in cols else None,
        mu0=col("mu0") if "mu0" in cols else None,
        noise_r2=noise,
    )


def resolve_dgp(name_or_path: str) -> DgpSpec:
    if name_or_path in BUILTIN_DGPS:
        return builtin_dgp(name_or_path)
    if os.path.exists(name_or_path):
        return load_dgp_table(name_or_path)
    raise ValidationError(
        f"{name_or_path!r} is neither a builtin DGP ({', '.join(BUILTIN_DGPS)}) nor a readable table file"
    )


# --------------------------------------------------------------------------
# Sampling
# --------------------------------------------------------------------------


@dataclass
class Truth:
    tau: np.ndarray
    systematic: np.ndarray
    noise_sd: float

    @property
    def sample_ate(self) -> float:
        return float(self.tau.mean())


def _add_noise(rng, s: np.ndarray, r2: Optional[float]):
    if r2 is None:
        return s.copy(), 0.0
    sd = math.sqrt(s.var() * (1.0 - r2) / r2)
    return s + sd * rng.standard_normal(s.shape[0]), sd


def draw_sample(spec: DgpSpec, n: Optional[int] = None, seed: int = 0):
    """Draw one dataset; returns ``(Dataset, Truth)``.

    For block DGPs ``n`` must be None or the total of the block sizes.
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValidationError(f"seed must be a nonnegative integer, got {seed!r}")
    rng = np.random.default_rng(int(seed))
    if spec.kind == "block":
        sizes = np.asarray(spec.block_sizes, dtype=int)
        total = int(sizes.sum())
        if n is not None and n != total:
            raise ValidationError(f"{spec.name} has fixed size {total}; got n={n}")
        labels, d, tau = [], [], []
        for b, (m, p, t) in enumerate(zip(sizes, spec.block_pi, spec.block_tau)):
            k = int(round(p * m))
            z = np.zeros(m)
            z[rng.permutation(m)[:k]] = 1.0
            labels += [str(b + 1)] * int(m)
            d.append(z)
            tau.append(np.full(m, float(t)))
        d = np.concatenate(d)
        tau = np.concatenate(tau)
        s = spec.block_baseline + d * tau
        y, sd = _add_noise(rng, s, spec.noise_r2)
        data = Dataset(y, d, np.zeros((total, 0)), (), blocks=np.asarray(labels, dtype=object))
        return data, Truth(tau, s, sd)

    if n is None:
        n = spec.default_n
    if n < 2:
        raise ValidationError(f"n must be at least 2, got {n}")
    if spec.kind == "discrete":
        sup = np.asarray(spec.support)
        j = rng.choice(sup.size, size=n, p=np.asarray(spec.p_x))
        x = sup[j]
        pd = np.asarray(spec.p_d)[j]
        tau = np.asarray(spec.tau)[j]
        mu0 = np.asarray(spec.mu0)[j]
    else:
        x = rng.uniform(spec.low, spec.high, size=n)
        pd = CONTINUOUS_FUNCTIONS[spec.propensity](x)
        tau = CONTINUOUS_FUNCTIONS[spec.effect](x)
        mu0 = CONTINUOUS_FUNCTIONS[spec.baseline](x)
    d = (rng.random(n) < pd).astype(float)
    s = mu0 + d * tau
    y, sd = _add_noise(rng, s, spec.noise_r2)
    data = Dataset(y, d, x.reshape(-1, 1), ("X",))
    return data, Truth(np.asarray(tau, dtype=float), s, sd)


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------


@dataclass
class MethodSummary:
    method: str
    bias: Optional[float]
    rmse: Optional[float]
    avg_analytical_se: Optional[float]
    empirical_se: Optional[float]
    n_failures: int
    n_se_missing: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class MonteCarloResult:
    dgp: str
    n: int
    iterations: int
    base_seed: int
    methods: tuple
    true_ate: float
    summaries: Dict[str, MethodSummary]
    estimates: Optional[np.ndarray] = None   # iterations x methods, NaN where failed
    std_errors: Optional[np.ndarray] = None
    failures: list = field(default_factory=list)
    reference: dict = field(default_factory=dict)
    spot_checks: list = field(default_factory=list)

    def summary_rows(self) -> list:
        return [self.summaries[m] for m in self.methods]

    def to_dict(self, include_iterations: bool = True) -> dict:
        out = {
            "dgp": self.dgp,
            "n": self.n,
            "iterations": self.iterations,
            "base_seed": self.base_seed,
            "true_ate": self.true_ate,
            "methods": list(self.methods),
            "summary": [s.to_dict() for s in self.summary_rows()],
            "reference_lines": self.reference,
            "failures": self.failures,
            "spot_checks": self.spot_checks,
        }
        if include_iterations and self.estimates is not None:
            out["per_iteration"] = {
                m: {
                    "estimate": [_nan_to_none(v) for v in self.estimates[:, j]],
                    "se": [_nan_to_none(v) for v in self.std_errors[:, j]],
                }
                for j, m in enumerate(self.methods)
            }
        return out


def _nan_to_none(v):
    v = float(v)
    return None if math.isnan(v) else v


def _one_iteration(args):
    spec, n, seed, k, methods, options, want_reference = args
    opts = dict(options or {})
    if opts.get("ties") == "random" and opts.get("seed") is None:
        opts["seed"] = seed
    try:
        data, truth = draw_sample(spec, n, seed)
    except ValidationError as e:
        # e.g. a small draw with no treated unit: every method fails this iteration
        fails = [{"iteration": k, "seed": seed, "method": m, "error": type(e).__name__,
                  "message": f"sample rejected: {e}"} for m in methods]
        nan = [math.nan] * len(methods)
        return k, nan, list(nan), fails, None, None, math.nan
    res = run_methods(data, list(methods), opts)
    est, se, fails = [], [], []
    for m in methods:
        r = res[m]
        if isinstance(r, Exception):
            est.append(math.nan)
            se.append(math.nan)
            fails.append({"iteration": k, "seed": seed, "method": m,
                          "error": type(r).__name__, "message": str(r)})
        else:
            est.append(r.estimate)
            se.append(math.nan if r.std_error is None else r.std_error)
    ref = None
    if want_reference:
        try:
            sd = strata_weights(data)
            ref = (sd.angrist_reconstruction, sd.general_reconstruction)
        except (OlsWeightsError, np.linalg.LinAlgError):
            ref = None
    check = None
    if k % SPOT_CHECK_EVERY == 0 and "reg" in methods and not isinstance(res["reg"], Exception):
        iw = unit_weights(data)
        recon = float(iw.w @ data.outcome)
        b = res["reg"].estimate
        check = {"iteration": k, "reg": b, "weighted_sum": recon,
                 "ok": abs(recon - b) <= SPOT_CHECK_RTOL * max(1.0, abs(b))}
    return k, est, se, fails, ref, check, truth.sample_ate


def _aggregate(values: np.ndarray, ses: np.ndarray, ate: float, name: str) -> MethodSummary:
    ok = ~np.isnan(values)
    v = values[ok]
    s = ses[ok]
    s = s[~np.isnan(s)]
    fails = int((~ok).sum())
    if v.size == 0:
        return MethodSummary(name, None, None, None, None, fails, 0)
    return MethodSummary(
        method=name,
        bias=float(v.mean() - ate),
        rmse=float(math.sqrt(np.mean((v - ate) ** 2))),
        avg_analytical_se=float(s.mean()) if s.size else None,
        empirical_se=float(v.std(ddof=1)) if v.size > 1 else None,
        n_failures=fails,
        n_se_missing=int(v.size - s.size),
    )


def run_monte_carlo(
    spec: DgpSpec,
    n: Optional[int] = None,
    iterations: Optional[int] = None,
    base_seed: int = 0,
    methods: Optional[Sequence[str]] = None,
    threads: int = 1,
    options: Optional[dict] = None,
    retain: bool = True,
) -> MonteCarloResult:
    """Run ``iterations`` independent replicates and summarize each method.

    Iteration ``k`` uses seed ``base_seed + k``. Failed estimator calls are
    recorded per iteration; if more than 10% of iterations fail for any
    method, :class:`MonteCarloAbort` is raised with the failure list.
    ``threads > 1`` spreads iterations over worker processes; the result is
    identical to a serial run.
    """
    if spec.kind == "block":
        n = int(sum(spec.block_sizes))
    n = spec.default_n if n is None else int(n)
    iterations = spec.default_iterations if iterations is None else int(iterations)
    if iterations < 1:
        raise ValidationError(f"iterations must be at least 1, got {iterations}")
    if base_seed < 0:
        raise ValidationError(f"base seed must be nonnegative, got {base_seed}")
    methods = tuple(canonical(m) for m in (methods or spec.default_methods))
    if spec.kind != "discrete" and "stratify" in methods:
        raise ValidationError("stratify needs a discrete covariate; not available for this DGP")
    want_ref = spec.kind == "discrete"

    jobs = [(spec, n, base_seed + k, k, methods, options, want_ref) for k in range(iterations)]
    if threads and threads > 1 and iterations > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            chunk = max(1, iterations // (4 * threads))
            outputs = list(ex.map(_one_iteration, jobs, chunksize=chunk))
    else:
        outputs = [_one_iteration(j) for j in jobs]
    outputs.sort(key=lambda o: o[0])

    est = np.array([o[1] for o in outputs], dtype=float).reshape(iterations, len(methods))
    ses = np.array([o[2] for o in outputs], dtype=float).reshape(iterations, len(methods))
    failures = [f for o in outputs for f in o[3]]
    checks = [o[5] for o in outputs if o[5] is not None]

    bad = {m: int(np.isnan(est[:, j]).sum()) for j, m in enumerate(methods)}
    over = {m: c for m, c in bad.items() if c > FAILURE_LIMIT * iterations}
    if over:
        head = "; ".join(f"{f['method']} at iteration {f['iteration']}: {f['message']}" for f in failures[:5])
        raise MonteCarloAbort(
            f"more than {FAILURE_LIMIT:.0%} of iterations failed for {over}; first failures: {head}",
            failures,
        )

    summaries = {m: _aggregate(est[:, j], ses[:, j], spec.ate, m) for j, m in enumerate(methods)}
    reference = {"true_ate": spec.ate,
                 "mean_sample_ate": float(np.nanmean([o[6] for o in outputs]))}
    if want_ref:
        refs = np.array([o[4] for o in outputs if o[4] is not None], dtype=float)
        pop = population_reconstructions(spec.support, spec.p_x, spec.p_d, spec.tau, spec.mu0)
        reference.update({
            "angrist_replicate_mean": float(refs[:, 0].mean()) if refs.size else None,
            "general_replicate_mean": float(refs[:, 1].mean()) if refs.size else None,
            "angrist_population": pop["angrist"],
            "general_population": pop["general"],
            "angrist_true_propensity": pop["angrist_true_propensity"],
            "n_replicates_with_reference": int(refs.shape[0]) if refs.size else 0,
        })
    return MonteCarloResult(
        dgp=spec.name, n=n, iterations=iterations, base_seed=base_seed, methods=methods,
        true_ate=spec.ate, summaries=summaries,
        estimates=est if retain else None, std_errors=ses if retain else None,
        failures=failures, reference=reference, spot_checks=checks,
    )


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------

SUMMARY_HEADER = ["method", "bias", "rmse", "avg_analytical_se", "empirical_se", "n_failures"]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def summary_csv(result: MonteCarloResult) -> str:
    return _csv_text(SUMMARY_HEADER, [
        [s.method, s.bias, s.rmse, s.avg_analytical_se, s.empirical_se, s.n_failures]
        for s in result.summary_rows()
    ])


def estimates_csv(result: MonteCarloResult) -> str:
    """Tidy per-iteration estimates: ``iteration, seed, method, estimate, se``."""
    if result.estimates is None:
        raise ValueError("per-iteration estimates were not retained")
    rows = []
    for k in range(result.iterations):
        for j, m in enumerate(result.methods):
            rows.append([k, result.base_seed + k, m, float(result.estimates[k, j]),
                         float(result.std_errors[k, j])])
    return _csv_text(["iteration", "seed", "method", "estimate", "se"], rows)


def reference_csv(result: MonteCarloResult) -> str:
    keys = [k for k in result.reference if k != "n_replicates_with_reference"]
    return _csv_text(["line", "value"], [[k, result.reference[k]] for k in keys])


def format_table(result: MonteCarloResult) -> str:
    def f(v):
        return "NA" if v is None else f"{v:.3f}"
    lines = [f"{'method':<12}{'bias':>9}{'rmse':>9}{'avg SE':>9}{'emp SE':>9}{'fails':>7}"]
    for s in result.summary_rows():
        lines.append(f"{s.method:<12}{f(s.bias):>9}{f(s.rmse):>9}{f(s.avg_analytical_se):>9}"
                     f"{f(s.empirical_se):>9}{s.n_failures:>7}")
    return "\n".join(lines)


def write_outputs(result: MonteCarloResult, outdir, config: Optional[dict] = None) -> dict:
    """Write summary.csv, summary.json, plotdata/*.csv and config.resolved.json.

    All files are pure functions of the result and config, so reruns with
    the same configuration produce byte-identical files.
    """
    out = Path(outdir)
    (out / "plotdata").mkdir(parents=True, exist_ok=True)
    files = {
        "summary.csv": summary_csv(result),
        "summary.json": json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n",
        "plotdata/reference_lines.csv": reference_csv(result),
    }
    if result.estimates is not None:
        files["plotdata/estimates.csv"] = estimates_csv(result)
    if config is not None:
        files["config.resolved.json"] = json.dumps(config, indent=2, sort_keys=True) + "\n"
    for rel, text in files.items():
        (out / rel).write_text(text)
    return {rel: out / rel for rel in files}
