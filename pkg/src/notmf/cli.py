"""Command-line entry point: ``notmf {synth,fit,forecast,rolling,eval}``.

Every long option can also be set through an environment variable named
``NOTMF_`` + the option name in upper case with dashes as underscores
(``--cg-iters`` -> ``NOTMF_CG_ITERS``). Command-line flags win.

Exit codes: 0 success, 2 parse/input errors, 3 dimension or config
errors, 4 numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .data import MaskedMatrix
from .errors import ConfigError, NotmfError, ParseError
from .evaluation import grid_search, make_synthetic, report
from .forecast import forecast_latent, rolling_forecast
from .io import load_csv, standardize, write_matrix
from .model import VARIANTS, FactorModel, ModelConfig, fit

ENV_PREFIX = "NOTMF_"
logger = logging.getLogger("notmf")


def _env_name(action) -> str | None:
    longs = [o for o in action.option_strings if o.startswith("--")]
    if not longs:
        return None
    return ENV_PREFIX + longs[0][2:].upper().replace("-", "_")


def _apply_env_defaults(parser: argparse.ArgumentParser) -> None:
    for action in parser._actions:
        name = _env_name(action)
        if name is None or name not in os.environ or action.dest == "help":
            continue
        raw = os.environ[name]
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.strip().lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                value = action.type(raw)
            except (TypeError, ValueError):
                raise ParseError(f"environment variable {name}={raw!r} is not valid") from None
        else:
            value = raw
        if action.choices is not None and value not in action.choices:
            raise ParseError(f"environment variable {name}={raw!r} not in {list(action.choices)}")
        action.default = value
        action.required = False


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--rank", type=int, default=10)
    g.add_argument("--order", type=int, default=1)
    g.add_argument("--season", type=int, default=168)
    g.add_argument("--lambda", dest="lam", type=float, default=1.0)
    g.add_argument("--rho", type=float, default=5.0)
    g.add_argument("--iters", type=int, default=50, help="outer alternating iterations")
    g.add_argument("--cg-iters", type=int, default=5)
    g.add_argument("--cg-tol", type=float, default=1e-8)
    g.add_argument("--variant", choices=VARIANTS, default="notmf")
    g.add_argument("--seed", type=int, default=0)


def _add_data_flags(p, input_required=True):
    p.add_argument("--input", "-i", required=input_required, help="observations CSV")
    p.add_argument("--out", "-o", default="notmf-out", help="output directory")
    p.add_argument("--zero-as-missing", action="store_true")
    p.add_argument("--standardize", action="store_true",
                   help="z-score each series on its observed training entries")
    p.add_argument("--train-cols", type=int)
    p.add_argument("--val-cols", type=int)
    p.add_argument("--test-cols", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="notmf", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark")
    p.add_argument("--out", "-o", default="notmf-out")
    p.add_argument("--n-series", type=int, default=60)
    p.add_argument("--n-times", type=int, default=420)
    p.add_argument("--true-rank", type=int, default=4)
    p.add_argument("--true-season", type=int, default=28)
    p.add_argument("--true-order", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--missing-rate", type=float, default=0.6)
    p.add_argument("--seed", type=int, default=1)

    p = sub.add_parser("fit", help="train a model and save the archive")
    _add_data_flags(p)
    _add_model_flags(p)

    p = sub.add_parser("forecast", help="forecast from a saved model or a fresh fit")
    _add_data_flags(p, input_required=False)
    _add_model_flags(p)
    p.add_argument("--model", help="model archive written by 'fit'")
    p.add_argument("--horizon", type=int, default=1)

    p = sub.add_parser("rolling", help="rolling forecasts over the test columns")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--windows", type=int)
    p.add_argument("--truth", help="optional complete CSV to score against as well")

    p = sub.add_parser("eval", help="grid search (lambda, rho) on the validation columns")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--lambda-grid", type=_floats, default=[0.1, 1.0, 10.0])
    p.add_argument("--rho-grid", type=_floats, default=[1.0, 5.0, 10.0])

    for action in sub.choices.values():
        _apply_env_defaults(action)
    _apply_env_defaults(parser)
    return parser


def _config(args) -> ModelConfig:
    return ModelConfig(rank=args.rank, order=args.order, season=args.season, lam=args.lam,
                       rho=args.rho, outer_iters=args.iters, cg_iters=args.cg_iters,
                       cg_tol=args.cg_tol, variant=args.variant, seed=args.seed)


def resolve_split(T: int, args, default_test: int) -> tuple[int, int, int]:
    """(train, val, test) column counts; unspecified parts fill from the defaults."""
    val = args.val_cols or 0
    test = default_test if args.test_cols is None else args.test_cols
    train = args.train_cols if args.train_cols is not None else T - val - test
    if args.train_cols is not None and args.test_cols is None:
        test = T - train - val
    if min(train, val, test) < 0 or train < 1 or train + val + test > T:
        raise ConfigError(f"split train={train}, val={val}, test={test} does not fit T={T}")
    return train, val, test


def _load(args):
    return load_csv(args.input, "zero" if args.zero_as_missing else "nan")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _metrics_payload(rep, cfg, started, **extra):
    out = {"mape": rep.mape, "rmse": rep.rmse, "n_evaluated": rep.n_evaluated,
           "config": cfg.to_dict(), "wall_clock_seconds": round(time.perf_counter() - started, 3)}
    out.update(extra)
    return out


def _maybe_standardize(args, Y, n_cols):
    if not args.standardize:
        return Y, np.zeros(Y.n_rows), np.ones(Y.n_rows)
    return standardize(Y, n_cols)


def cmd_synth(args, out: Path):
    Y, truth = make_synthetic(args.n_series, args.n_times, args.true_rank, args.true_season,
                              args.true_order, args.noise, args.missing_rate, args.seed)
    rows = [f"s{i}" for i in range(Y.n_rows)]
    cols = [str(t) for t in range(Y.n_cols)]
    write_matrix(out / "truth.csv", truth.Y_full, rows, cols)
    write_matrix(out / "observed.csv", Y.values, rows, cols, Y.mask)
    logger.info("wrote %s and %s", out / "truth.csv", out / "observed.csv")


def cmd_fit(args, out: Path):
    lm = _load(args)
    train, _, _ = resolve_split(lm.data.n_cols, args, 0)
    cfg = _config(args)
    Y, offset, scale = _maybe_standardize(args, lm.data, train)
    model = fit(Y.columns(train), cfg)
    model.save(out / "model.npz")
    with open(out / "objective_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "objective"])
        for i, f in enumerate(model.objective_trace, 1):
            w.writerow([i, repr(f)])
    if args.standardize:
        np.savez(out / "scaling.npz", offset=offset, scale=scale)
    logger.info("trained on %d columns; final objective %s", train,
                model.objective_trace[-1] if model.objective_trace else "n/a")


def cmd_forecast(args, out: Path):
    started = time.perf_counter()
    lm = _load(args) if args.input else None
    if args.model:
        model = FactorModel.load(args.model)
        scaling = Path(args.model).with_name("scaling.npz")
        if scaling.exists():
            with np.load(scaling) as z:
                offset, scale = z["offset"], z["scale"]
        else:
            offset = np.zeros(model.W.shape[1])
            scale = np.ones(model.W.shape[1])
    else:
        if lm is None:
            raise ConfigError("forecast needs --model or --input with fit flags")
        train, _, _ = resolve_split(lm.data.n_cols, args, 0)
        Y, offset, scale = _maybe_standardize(args, lm.data, train)
        model = fit(Y.columns(train), _config(args))
    cfg = model.config
    T, delta = model.X.shape[1], args.horizon
    if delta < 1:
        raise ConfigError(f"horizon must be >= 1, got {delta}")
    Xf = forecast_latent(model.X, model.coeffs, cfg.season, delta, cfg.first_order)
    values = (model.W.T @ Xf) * scale[:, None] + offset[:, None]
    N = values.shape[0]
    if lm is not None and lm.data.n_rows != N:
        raise ConfigError(f"input has {lm.data.n_rows} series, model has {N}")
    rows = lm.row_labels if lm is not None else [f"s{i}" for i in range(N)]
    cols = [(lm.col_labels[t] if lm is not None and t < lm.data.n_cols else f"T+{t - T + 1}")
            for t in range(T, T + delta)]
    write_matrix(out / "forecast.csv", values, rows, cols, corner=lm.corner if lm else "series")
    if lm is not None and lm.data.n_cols >= T + delta:
        sl = slice(T, T + delta)
        mask = lm.data.mask[:, sl]
        if mask.any():
            rep = report(lm.data.values[:, sl], values, mask)
            _write_json(out / "metrics.json", _metrics_payload(rep, cfg, started,
                                                               command="forecast", start_index=T))


def cmd_rolling(args, out: Path):
    started = time.perf_counter()
    lm = _load(args)
    T = lm.data.n_cols
    train, val, test = resolve_split(T, args, max(1, T // 10))
    T_train = train + val
    delta = args.horizon
    windows = args.windows if args.windows is not None else test // max(delta, 1)
    cfg = _config(args)
    Y, offset, scale = _maybe_standardize(args, lm.data, T_train)
    res = rolling_forecast(Y, cfg, T_train, delta, windows)
    values = res.values * scale[:, None] + offset[:, None]
    cols = lm.col_labels[res.start_index:res.stop_index]
    write_matrix(out / "forecast.csv", values, lm.row_labels, cols, corner=lm.corner)
    sl = slice(res.start_index, res.stop_index)
    payload = {}
    if lm.data.mask[:, sl].any():
        rep = report(lm.data.values[:, sl], values, lm.data.mask[:, sl])
        payload = _metrics_payload(rep, cfg, started, command="rolling", start_index=T_train,
                                   horizon=delta, windows=windows)
    if args.truth:
        truth = load_csv(args.truth).data
        if truth.shape != lm.data.shape:
            raise ConfigError(f"truth shape {truth.shape} differs from input {lm.data.shape}")
        trep = report(truth.values[:, sl], values, truth.mask[:, sl])
        payload = payload or _metrics_payload(trep, cfg, started, command="rolling",
                                              start_index=T_train, horizon=delta, windows=windows)
        payload["truth"] = {"mape": trep.mape, "rmse": trep.rmse, "n_evaluated": trep.n_evaluated}
    if payload:
        _write_json(out / "metrics.json", payload)


def cmd_eval(args, out: Path):
    lm = _load(args)
    T = lm.data.n_cols
    val = args.val_cols if args.val_cols is not None else max(args.horizon, T // 10)
    train = args.train_cols if args.train_cols is not None else T - val - (args.test_cols or 0)
    cfg = _config(args)
    Y, _, _ = _maybe_standardize(args, lm.data, train)
    # scoring happens on the standardized scale when --standardize is set
    result = grid_search(Y, (train, val), cfg, args.lambda_grid, args.rho_grid, args.horizon)
    (out / "scores.csv").write_text(result.to_csv())
    _write_json(out / "best.json", {"lambda": result.best_lam, "rho": result.best_rho,
                                    "train_cols": train, "val_cols": val})


COMMANDS = {"synth": cmd_synth, "fit": cmd_fit, "forecast": cmd_forecast,
            "rolling": cmd_rolling, "eval": cmd_eval}


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except NotmfError as exc:
        print(f"notmf: error: {exc}", file=sys.stderr)
        return exc.exit_code
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, out)
    except NotmfError as exc:
        print(f"notmf: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"notmf: error: {exc}", file=sys.stderr)
        return ParseError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
