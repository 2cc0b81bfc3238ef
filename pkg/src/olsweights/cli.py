"""Command-line entry point: ``olsweights estimate | diagnose | simulate``.

Exit status is 0 on success, 2 when some requested methods failed while
others succeeded, and 1 on invalid input or any other error. Failures print
a one-line message to stderr plus a JSON error record; when ``--out`` is
known the record is also written to ``error.json`` there.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .balancing import DEFAULT_MAX_ITER, DEFAULT_TOL
from .data import load_csv, parse_schema
from .errors import OlsWeightsError, StratificationError
from .estimators import CSV_HEADER, TIE_RULES, _json_default
from .methods import METHODS, canonical, run_methods
from .simulation import format_table, resolve_dgp, run_monte_carlo, write_outputs
from .weights import effective_sample_profile, sloczynski_delta, strata_weights, unit_weights

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 1, 2
DEFAULT_ESTIMATE_METHODS = ("reg", "interact", "impute", "meanbal")

# option name -> default; None means "not set" so config files can fill it
OPTION_DEFAULTS = {
    "input": None,
    "schema": None,
    "methods": None,
    "dgp": None,
    "n": None,
    "iters": None,
    "seed": 0,
    "out": None,
    "threads": None,
    "drop_degenerate": False,
    "tol": DEFAULT_TOL,
    "max_iter": DEFAULT_MAX_ITER,
    "tie_rule": "average",
    "retain_iterations": True,
}


class CliError(Exception):
    def __init__(self, message, kind="InvalidInput"):
        super().__init__(message)
        self.kind = kind


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="olsweights", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        # defaults are SUPPRESS so that only flags actually given override the config file
        S = argparse.SUPPRESS
        sp.add_argument("--config", default=S, help="JSON file with option values; flags win")
        sp.add_argument("--out", default=S, help="output directory")
        sp.add_argument("--methods", default=S, help=f"comma list from: {', '.join(METHODS)}")
        sp.add_argument("--tol", type=float, default=S, help="balance tolerance (standardized)")
        sp.add_argument("--max-iter", dest="max_iter", type=int, default=S)
        sp.add_argument("--tie-rule", dest="tie_rule", choices=TIE_RULES, default=S)
        sp.add_argument("--drop-degenerate", dest="drop_degenerate", action="store_true", default=S,
                        help="drop single-arm strata instead of failing")
        sp.add_argument("--seed", type=int, default=S,
                        help="seed for random tie breaking / Monte Carlo base seed")

    for name, helptext in (("estimate", "run estimators on a CSV"),
                           ("diagnose", "implied-weight diagnostics for a CSV")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--input", default=argparse.SUPPRESS, help="CSV file")
        sp.add_argument("--schema", default=argparse.SUPPRESS, help="e.g. Y=y,D=d,X=x1,X=x2,B=block")
        common(sp)

    sp = sub.add_parser("simulate", help="Monte Carlo run on a builtin or tabulated DGP")
    sp.add_argument("dgp_pos", nargs="?", metavar="DGP", default=argparse.SUPPRESS,
                    help="builtin name or DGP table CSV")
    sp.add_argument("--dgp", default=argparse.SUPPRESS)
    sp.add_argument("--n", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--iters", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                    help="worker processes (default: available cores)")
    sp.add_argument("--no-iterations", dest="retain_iterations", action="store_false",
                    default=argparse.SUPPRESS, help="omit per-iteration estimates from outputs")
    common(sp)
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, the JSON config file, then command-line flags."""
    given = vars(args).copy()
    command = given.pop("command")
    cfg = dict(OPTION_DEFAULTS)
    path = given.pop("config", None)
    if path is not None:
        try:
            with open(path) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"cannot read config file {path}: {e}") from None
        if not isinstance(file_cfg, dict):
            raise CliError(f"config file {path} must hold a JSON object")
        for k, v in file_cfg.items():
            key = k.replace("-", "_")
            if key == "command":
                continue
            if key not in cfg:
                raise CliError(f"unknown config key {k!r} in {path}")
            cfg[key] = v
    if "dgp_pos" in given:
        given["dgp"] = given.pop("dgp_pos")
    cfg.update(given)
    cfg["command"] = command
    if isinstance(cfg["methods"], str):
        cfg["methods"] = [m for m in (s.strip() for s in cfg["methods"].split(",")) if m]
    if cfg["methods"] is not None:
        try:
            cfg["methods"] = [canonical(m) for m in cfg["methods"]]
        except KeyError as e:
            raise CliError(str(e.args[0])) from None
    if isinstance(cfg["schema"], str):
        cfg["schema"] = parse_schema(cfg["schema"])
    if cfg["tie_rule"] not in TIE_RULES:
        raise CliError(f"unknown tie rule {cfg['tie_rule']!r}; choose from {TIE_RULES}")
    if command == "simulate" and cfg["threads"] is None:
        cfg["threads"] = os.cpu_count() or 1
    cfg["version"] = __version__
    return cfg


def _options(cfg: dict) -> dict:
    return {
        "tol": float(cfg["tol"]),
        "max_iter": int(cfg["max_iter"]),
        "ties": cfg["tie_rule"],
        "seed": cfg["seed"],
        "drop_degenerate": bool(cfg["drop_degenerate"]),
    }


def _load(cfg: dict):
    if not cfg["input"]:
        raise CliError("--input is required")
    if not cfg["schema"]:
        raise CliError("--schema is required (e.g. Y=y,D=d,X=x)")
    return load_csv(cfg["input"], cfg["schema"])


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _write(out: Optional[Path], name: str, text: str):
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def _config_for_output(cfg: dict) -> dict:
    c = dict(cfg)
    # thread count does not affect results; leave it out so output bytes do not depend on it
    c.pop("threads", None)
    return c


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_estimate(cfg: dict, stdout=sys.stdout) -> int:
    data = _load(cfg)
    methods = cfg["methods"] or list(DEFAULT_ESTIMATE_METHODS)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        results = run_methods(data, methods, _options(cfg))
    reports, errors = [], []
    for m in methods:
        r = results[m]
        if isinstance(r, Exception):
            errors.append({"method": m, "error": type(r).__name__, "message": str(r)})
        else:
            reports.append(r)

    out = Path(cfg["out"]) if cfg["out"] else None
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.csv_row())
    _write(out, "estimates.csv", buf.getvalue())
    _write(out, "estimates.json", _dump_json({
        "estimates": [r.to_dict() for r in reports],
        "errors": errors,
        "warnings": [str(c.message) for c in caught],
        "n": data.n,
    }))
    _write(out, "config.resolved.json", _dump_json(_config_for_output(cfg)))

    print(f"{'method':<12}{'estimate':>12}{'se':>12}", file=stdout)
    for r in reports:
        se = "NA" if r.std_error is None else f"{r.std_error:.6g}"
        print(f"{r.method:<12}{r.estimate:>12.6g}{se:>12}", file=stdout)
    for c in caught:
        print(f"warning: {c.message}", file=sys.stderr)
    for e in errors:
        print(f"error: {e['method']}: {e['error']}: {e['message']}", file=sys.stderr)
    if errors:
        _write(out, "error.json", _dump_json({"status": "partial", "exit_code": EXIT_PARTIAL,
                                             "errors": errors}))
        return EXIT_PARTIAL if reports else EXIT_INVALID
    return EXIT_OK


def diagnose(data, drop_degenerate: bool = False) -> dict:
    """Diagnostic bundle for one dataset (unit weights, strata, profile, delta)."""
    iw = unit_weights(data)
    bundle: dict = {
        "n": data.n,
        "unit_weights": iw.to_dict(),
        "negative_weights": {
            "count": iw.n_negative,
            "rows": [int(i) + 1 for i in np.flatnonzero(iw.negative_flags)],
        },
        "effective_sample_profile": effective_sample_profile(data, iw).to_dict(),
        "notices": [],
    }
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            sd = strata_weights(data, drop_degenerate=drop_degenerate)
        bundle["strata"] = sd.to_dict()
        bundle["notices"] += [str(c.message) for c in caught]
    except StratificationError as e:
        bundle["strata"] = None
        bundle["notices"].append(f"strata sections skipped: {e}")
    except OlsWeightsError as e:
        bundle["strata"] = None
        bundle["notices"].append(f"strata sections skipped: {type(e).__name__}: {e}")
    try:
        bundle["delta"] = sloczynski_delta(data).to_dict()
    except OlsWeightsError as e:
        bundle["delta"] = None
        bundle["notices"].append(f"delta skipped: {type(e).__name__}: {e}")
    return bundle


def cmd_diagnose(cfg: dict, stdout=sys.stdout) -> int:
    data = _load(cfg)
    bundle = diagnose(data, bool(cfg["drop_degenerate"]))
    out = Path(cfg["out"]) if cfg["out"] else None
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "d", "d_hat", "w", "w_tilde", "negative"])
    uw = bundle["unit_weights"]
    for i in range(data.n):
        w.writerow([i + 1, int(data.treatment[i]), repr(uw["d_hat"][i]), repr(uw["w"][i]),
                    repr(uw["w_tilde"][i]), int(uw["negative"][i])])
    _write(out, "unit_weights.csv", buf.getvalue())
    _write(out, "diagnostics.json", _dump_json(bundle))
    _write(out, "config.resolved.json", _dump_json(_config_for_output(cfg)))

    neg = bundle["negative_weights"]
    print(f"n = {data.n}; negative implied weights: {neg['count']}"
          + (f" (rows {neg['rows'][:20]})" if neg["count"] else ""), file=stdout)
    if bundle["strata"] is not None:
        s = bundle["strata"]
        print(f"OLS coefficient          {s['ols_coefficient']:.6g}", file=stdout)
        print(f"Angrist reconstruction   {s['angrist_reconstruction']:.6g}", file=stdout)
        print(f"general reconstruction   {s['general_reconstruction']:.6g}", file=stdout)
        print(f"stratified ATE           {s['natural_estimate']:.6g}", file=stdout)
    if bundle["delta"] is not None:
        d = bundle["delta"]
        print(f"delta {d['delta']:.4g}; predicted OLS bias {d['predicted_bias']:.4g}", file=stdout)
    for note in bundle["notices"]:
        print(f"notice: {note}", file=stdout)
    return EXIT_OK


def cmd_simulate(cfg: dict, stdout=sys.stdout) -> int:
    if not cfg["dgp"]:
        raise CliError("simulate needs a DGP name or table file")
    spec = resolve_dgp(cfg["dgp"])
    if cfg["n"] is None:
        cfg["n"] = int(sum(spec.block_sizes)) if spec.kind == "block" else spec.default_n
    if cfg["iters"] is None:
        cfg["iters"] = spec.default_iterations
    if cfg["methods"] is None:
        cfg["methods"] = list(spec.default_methods)
    cfg["dgp_spec"] = spec.to_dict()
    result = run_monte_carlo(
        spec, n=cfg["n"], iterations=cfg["iters"], base_seed=int(cfg["seed"]),
        methods=cfg["methods"], threads=int(cfg["threads"] or 1), options=_options(cfg),
        retain=bool(cfg["retain_iterations"]),
    )
    if cfg["out"]:
        write_outputs(result, cfg["out"], _config_for_output(cfg))
    print(f"{spec.name}: n={result.n}, iterations={result.iterations}, base seed={result.base_seed}, "
          f"true ATE={result.true_ate:.4g}", file=stdout)
    print(format_table(result), file=stdout)
    if result.failures:
        print(f"{len(result.failures)} estimator failure(s) recorded", file=stdout)
        return EXIT_PARTIAL
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "diagnose": cmd_diagnose, "simulate": cmd_simulate}


def _fail(exc: BaseException, out: Optional[str], code: int = EXIT_INVALID) -> int:
    kind = exc.kind if isinstance(exc, CliError) else type(exc).__name__
    record = {"status": "error", "exit_code": code, "error": kind, "message": str(exc)}
    for attr in ("row", "column", "strata", "columns", "units"):
        v = getattr(exc, attr, None)
        if v not in (None, [], ()):
            record[attr] = v
    print(f"error: {kind}: {exc}", file=sys.stderr)
    print(json.dumps(record, sort_keys=True, default=_json_default), file=sys.stderr)
    if out:
        try:
            _write(Path(out), "error.json", _dump_json(record))
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse already printed its usage message
        if e.code in (0, None):
            return EXIT_OK
        print(json.dumps({"status": "error", "exit_code": EXIT_INVALID, "error": "UsageError",
                          "message": "invalid command-line arguments"}), file=sys.stderr)
        return EXIT_INVALID
    out = getattr(args, "out", None)
    try:
        cfg = resolve_config(args)
        out = cfg.get("out")
        return COMMANDS[cfg["command"]](cfg)
    except (CliError, OlsWeightsError, ValueError, OSError) as e:
        return _fail(e, out)
    except Exception as e:  # noqa: BLE001 - the contract is no bare traceback
        return _fail(e, out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
