"""Command-line front end: ``lrswaption price|boundary|calibrate --config run.json``.

Exit status is 0 on success, 2 when the configuration or inputs are invalid
and 3 when a solver or calibration cannot produce a result.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .american import american_price, solve_boundary
from .bermudan import bermudan_price, european_price
from .config import (MAX_SEED, RunConfig, file_digest, load_config, lattice_spec, lsm_config,
                     resolve_model, solver_config, trade_spec)
from .errors import (CalibrationError, ConfigurationError, DomainError, InfeasibleCurveError,
                     SolverFailure, TruncationError, UnattainableQuoteError)
from .lsm import exercise_schedule, lsm_price
from .model import invert_swap_rate, swap_rate, zcb_price
from .payoff import build_payoff_table

log = logging.getLogger("lrswaption")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3
BOUNDARY_COLUMNS = ("t", "g", "h", "boundary", "swaprate_boundary")


def fmt(v: float) -> str:
    return f"{v:.12g}"


def _plain(obj):
    """Convert numpy scalars and arrays so that ``json`` can serialize them."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_json(path: Path, record: dict) -> None:
    write_atomic(path, json.dumps(_plain(record), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    write_atomic(path, buf.getvalue())


def curve_record(curve) -> dict:
    return {"knots": list(curve.knots), "values": list(curve.values)}


def model_record(params) -> dict:
    return {"kappa": params.kappa, "theta": params.theta, "x0": params.x0,
            "alpha": curve_record(params.alpha), "sigma": curve_record(params.sigma)}


def provenance(cfg: RunConfig, seed: int) -> dict:
    m = cfg.model
    inputs = {name: file_digest(cfg.resolve(getattr(m, name))) for name in ("curve_file", "quote_file")
              if getattr(m, name) is not None}
    return {"config_sha256": cfg.digest, "input_sha256": inputs, "seed": seed, "version": __version__}


def _steady(diag: dict) -> dict:
    # wall-clock timings would break byte-identical reruns
    return {k: v for k, v in diag.items() if k != "seconds"}


def exercise_dates(cfg: RunConfig, spec) -> np.ndarray:
    ex = cfg.pricing.exercise
    if isinstance(ex, list):
        return np.array(sorted(ex), dtype=float)
    if ex == "weekly":
        return exercise_schedule(spec, cfg.pricing.exercise_per_year)
    if ex == "european":
        return np.array([spec.t0, spec.tn])
    return spec.dates


# -- price ---------------------------------------------------------------------

def _price_one(style, table, cfg, t, x, seed):
    spec = table.spec
    if style == "european":
        return european_price(table, t, x, method=cfg.solver.method), {"method": cfg.solver.method}
    if style == "bermudan":
        dates = exercise_dates(cfg, spec)
        res = bermudan_price(table, dates, t, x, lattice_spec(cfg))
        return res.price, dict(res.diagnostics, exercise_dates=dates)
    if style == "american":
        bnd = solve_boundary(table, solver_config(cfg))
        diag = dict(_steady(bnd.diagnostics), pre_t0_nodes=cfg.solver.pre_t0_nodes,
                    quad_tol=cfg.solver.quad_tol, boundary_t0=float(bnd.values[0]))
        return american_price(bnd, t, x), diag
    if style == "lsm":
        if t != 0:
            raise ConfigurationError("Monte Carlo prices are computed at t = 0 only", path="pricing.t")
        lc = lsm_config(cfg, seed)
        dates = exercise_dates(cfg, spec) if isinstance(cfg.pricing.exercise, list) else None
        res = lsm_price(table, lc, dates)
        return res.price, {"stderr": res.stderr, "n_paths": res.n_paths, "substeps": lc.substeps,
                           "degree": lc.degree, "n_exercise_dates": len(res.exercise_dates)}
    raise ConfigurationError(f"unknown style {style!r}", path="pricing.style")


def cmd_price(cfg: RunConfig, seed: int, style: str | None = None, t: float | None = None,
              x: float | None = None, rate: float | None = None, side: str | None = None) -> dict:
    p = cfg.pricing
    style = style or p.style
    t = p.t if t is None else t
    if x is None and rate is None:
        x, rate = p.x, p.swaprate
    resolved = resolve_model(cfg)
    params = resolved.params
    spec = trade_spec(cfg, side)
    table = build_payoff_table(params, spec)
    if rate is not None:
        x = invert_swap_rate(params, spec, t, rate)
        log.info("swap rate %s at t=%s inverted to x=%.12g", rate, t, x)
    x = params.x0 if x is None else float(x)
    if not x > 0:
        raise DomainError("factor value must be positive")
    record = {"style": style, "side": spec.side, "t": t, "x": x,
              "swaprate": swap_rate(params, spec, t, x) if t < spec.tn else None,
              "inputs": cfg.as_dict(), "model": model_record(params),
              "provenance": provenance(cfg, seed)}
    if style == "all":
        prices, diags = {}, {}
        for s in ("european", "bermudan", "american"):
            log.info("pricing %s", s)
            prices[s], diags[s] = _price_one(s, table, cfg, t, x, seed)
        tol = p.ordering_tol
        ok = prices["european"] <= prices["bermudan"] + tol and prices["bermudan"] <= prices["american"] + tol
        record.update(prices=prices, diagnostics=diags,
                      ordering={"rule": "european <= bermudan <= american", "allowance": tol,
                                "status": "PASS" if ok else "FAIL"})
    else:
        price, diag = _price_one(style, table, cfg, t, x, seed)
        record.update(price=price, diagnostics=diag)
    return record


# -- boundary ------------------------------------------------------------------

def boundary_rows(bnd):
    rates = bnd.rate
    return [(t, g, h, b, r) for t, g, h, b, r in zip(bnd.grid, bnd.g, bnd.h, bnd.values, rates)]


def cmd_boundary(cfg: RunConfig, seed: int, side: str | None = None):
    params = resolve_model(cfg).params
    spec = trade_spec(cfg, side)
    bnd = solve_boundary(build_payoff_table(params, spec), solver_config(cfg))
    meta = {"side": spec.side, "columns": list(BOUNDARY_COLUMNS), "diagnostics": _steady(bnd.diagnostics),
            "inputs": cfg.as_dict(), "model": model_record(params), "provenance": provenance(cfg, seed)}
    return bnd, boundary_rows(bnd), meta


# -- calibrate -----------------------------------------------------------------

def cmd_calibrate(cfg: RunConfig, seed: int) -> dict:
    m = cfg.model
    if m.curve_file is None and m.quote_file is None:
        raise ConfigurationError("calibration needs curve_file or quote_file", path="model.curve_file")
    resolved = resolve_model(cfg)
    params = resolved.params
    curve_res = []
    for q in resolved.curve:
        model = float(zcb_price(params, 0.0, q.maturity, params.x0))
        curve_res.append({"maturity": q.maturity, "discount_factor": q.discount_factor,
                          "model": model, "residual": model - q.discount_factor})
    quote_res = []
    for q in resolved.quotes:
        model = european_price(build_payoff_table(params, q.swap()), 0.0, params.x0, cfg.solver.method)
        quote_res.append({"id": q.quote_id, "expiry": q.expiry, "tenor": q.tenor, "strike": q.strike,
                          "side": q.side, "price": q.price, "model": model, "residual": model - q.price})
    worst = max([abs(r["residual"]) for r in curve_res + quote_res], default=0.0)
    return {"model": model_record(params), "residuals": {"curve": curve_res, "swaptions": quote_res},
            "max_abs_residual": worst, "inputs": cfg.as_dict(), "provenance": provenance(cfg, seed)}


# -- entry point ---------------------------------------------------------------

def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrswaption", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, help="output directory (default: output.directory)")
    common.add_argument("--seed", type=_seed, help="random seed, overrides solver.seed")
    common.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("price", parents=[common], help="price a swaption and write price.json")
    p.add_argument("--style", choices=("european", "bermudan", "american", "lsm", "all"))
    p.add_argument("--side", choices=("payer", "receiver"))
    p.add_argument("--t", type=float, help="valuation time")
    where = p.add_mutually_exclusive_group()
    where.add_argument("--x", type=float, help="factor value")
    where.add_argument("--swaprate", type=float, help="swap rate, inverted to the factor value")

    b = sub.add_parser("boundary", parents=[common], help="write boundary_<side>.csv")
    b.add_argument("--side", choices=("payer", "receiver", "both"))

    sub.add_parser("calibrate", parents=[common], help="fit alpha and sigma, write calibrated_model.json")
    return parser


def run(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.solver.seed if args.seed is None else args.seed
    if args.seed is not None:
        cfg = replace(cfg, solver=replace(cfg.solver, seed=seed))
    out = args.out if args.out is not None else Path(cfg.output.directory)
    formats = cfg.output.formats
    if args.command == "price":
        record = cmd_price(cfg, seed, args.style, args.t, args.x, args.swaprate, args.side)
        if "json" in formats:
            write_json(out / "price.json", record)
        if "csv" in formats:
            if "prices" in record:
                rows = [(s, record["prices"][s]) for s in ("european", "bermudan", "american")]
            else:
                rows = [(record["style"], record["price"])]
            write_csv(out / "price.csv", ("style", "price"), rows)
        shown = record.get("prices", {"price": record.get("price")})
        print(json.dumps(_plain({"x": record["x"], **shown, **({"ordering": record["ordering"]["status"]}
                                                              if "ordering" in record else {})})))
    elif args.command == "boundary":
        sides = ("payer", "receiver") if args.side == "both" else (args.side or cfg.trade.side,)
        for side in sides:
            bnd, rows, meta = cmd_boundary(cfg, seed, side)
            write_csv(out / f"boundary_{side}.csv", BOUNDARY_COLUMNS, rows)
            if "json" in formats:
                write_json(out / f"boundary_{side}.json", meta)
            print(f"{side}: {len(rows)} rows, b(T0) = {fmt(bnd.values[0])}, b(Tn) = {fmt(bnd.values[-1])}")
    else:
        record = cmd_calibrate(cfg, seed)
        write_json(out / "calibrated_model.json", record)
        print(f"max |residual| = {record['max_abs_residual']:.3g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return run(args)
    except (UnattainableQuoteError, SolverFailure, TruncationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigurationError, DomainError, InfeasibleCurveError, CalibrationError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
