"""Batch command-line front end.

Subcommands: ``simulate`` (Monte-Carlo sweep over the method grid),
``ingest`` (validate/transform a FRED-MD style CSV), ``forecast`` (one
point forecast from the latest window), ``evaluate`` (rolling
out-of-sample evaluation on a real panel), and ``scan-r2`` (per
predictor in-sample R-squared table).

Settings come from flags or an INI-style config file with one section
per command; flags override the file. Every run writes a JSON-lines
manifest holding the fully resolved configuration, seed, and package
version, which is sufficient to reproduce the run. Progress and
warnings go to stderr; data goes to files only.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from .evaluate import EvalReport, RollingConfig, monte_carlo_report, rolling_rmsfe
from .exceptions import InvalidConfig, SdpcaError
from .forecast import LassoConfig, forecast_method
from .panel import (
    TargetSeries,
    apply_transforms,
    ingest_fredmd,
    write_drop_report,
    write_fredmd,
)
from .simulate import RNG_ALGORITHM, SimConfig, export_draw, generate
from .supervise import LagSelection, build_scaled_panel

try:
    _VERSION = version("sdpca")
except PackageNotFoundError:  # running from a source tree
    _VERSION = "0.0.0+src"


def _eprint(*args) -> None:
    print(*args, file=sys.stderr)


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_lag_select(text: str) -> LagSelection:
    crit, _, qmax = text.partition(":")
    return LagSelection(criterion=crit.strip(), q_max=int(qmax) if qmax else 3)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; one section per command")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", default="sdpca_out", help="output directory")
    p.add_argument("--jobs", type=int, default=0,
                   help="worker processes; 0 = all available cores")
    p.add_argument("--methods", default="sdpca,pca,spca,sw",
                   help="comma list from sdpca,pca,spca,sw,ar1,ar2")
    p.add_argument("--k", default="4", help="comma list of factor counts")
    p.add_argument("--q", default="2", help="comma list of lag orders")
    p.add_argument("--h", default="1", help="comma list of horizons")
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--lasso", action="store_true",
                   help="penalized final regression for the factor methods")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="fixed penalty; default selects by validation error")
    p.add_argument("--lag-select", type=_parse_lag_select, default=None,
                   metavar="CRIT[:QMAX]",
                   help="per-predictor lag selection, e.g. aic:5 (overrides --q)")
    p.add_argument("--fixed-window", action="store_true",
                   help="fixed-width rolling window instead of expanding")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="sdpca",
        description="Supervised dynamic PCA forecasting toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="Monte-Carlo sweep on the simulated DGP")
    _add_common(p_sim)
    p_sim.add_argument("--T", type=int, default=200)
    p_sim.add_argument("--N", type=int, default=300)
    p_sim.add_argument("--n", type=int, default=40, help="nonzero loading rows")
    p_sim.add_argument("--r", type=int, default=2, help="true factor count")
    p_sim.add_argument("--q-true", type=int, default=2, help="true target lag depth")
    p_sim.add_argument("--beta0", type=_float_list, default=[1.0, -0.8])
    p_sim.add_argument("--beta1", type=_float_list, default=[-1.0, 2.0])
    p_sim.add_argument("--reps", type=int, default=100)
    p_sim.add_argument("--insample-only", action="store_true")

    p_ing = sub.add_parser("ingest", help="validate and transform a FRED-MD CSV")
    _add_common(p_ing)
    p_ing.add_argument("--input", required=True)

    p_fc = sub.add_parser("forecast", help="one point forecast from the full sample")
    _add_common(p_fc)
    p_fc.add_argument("--input", required=True)
    p_fc.add_argument("--target", required=True, help="panel column to forecast")

    p_ev = sub.add_parser("evaluate", help="rolling out-of-sample evaluation")
    _add_common(p_ev)
    p_ev.add_argument("--input", required=True)
    p_ev.add_argument("--target", required=True)

    p_r2 = sub.add_parser("scan-r2", help="per-predictor in-sample R-squared table")
    _add_common(p_r2)
    p_r2.add_argument("--input", required=True)
    p_r2.add_argument("--target", required=True)
    return parser, {
        "simulate": p_sim,
        "ingest": p_ing,
        "forecast": p_fc,
        "evaluate": p_ev,
        "scan-r2": p_r2,
    }


def _apply_config_file(
    parser: argparse.ArgumentParser, subparsers: dict, argv: list[str]
) -> argparse.Namespace:
    """Parse twice so file values become defaults and flags override them."""
    first = parser.parse_args(argv)
    if not getattr(first, "config", None):
        return first
    ini = configparser.ConfigParser()
    read = ini.read(first.config)
    if not read:
        raise InvalidConfig(f"config file {first.config!r} not found")
    section = first.command
    if ini.has_section(section):
        sub = subparsers[section]
        actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
        defaults = {}
        for key, raw in ini.items(section):
            dest = key.replace("-", "_")
            action = actions.get(dest)
            if action is None:
                raise InvalidConfig(f"unknown config key {key!r} in [{section}]")
            if isinstance(action, argparse._StoreTrueAction):  # noqa: SLF001
                defaults[dest] = ini.getboolean(section, key)
            elif action.type is not None:
                defaults[dest] = action.type(raw)
            else:
                defaults[dest] = raw
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _resolve_jobs(requested: int) -> int:
    if requested and requested > 0:
        return requested
    return os.cpu_count() or 1


def _rolling_config(args, oos: bool = True, insample: bool = True) -> RollingConfig:
    lasso_cfg = None
    if args.lasso:
        lasso_cfg = (
            LassoConfig(selection="fixed", lam=args.lam)
            if args.lam is not None
            else LassoConfig()
        )
    return RollingConfig(
        train_frac=args.train_frac,
        methods=tuple(args.methods.split(",")),
        k_values=tuple(_int_list(args.k)),
        q_values=tuple(_int_list(args.q)),
        lag_selection=args.lag_select,
        lasso=args.lasso,
        lasso_config=lasso_cfg,
        expanding=not args.fixed_window,
        insample=insample,
        oos=oos,
    )


def _write_manifest(out_dir: Path, command: str, resolved: dict) -> None:
    record = {
        "command": command,
        "version": _VERSION,
        "rng": RNG_ALGORITHM,
        "config": resolved,
    }
    with open(out_dir / "manifest.jsonl", "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def _resolved_dict(args) -> dict:
    out = {}
    for key, val in sorted(vars(args).items()):
        if key in ("command", "config"):
            continue
        if isinstance(val, LagSelection):
            val = f"{val.criterion}:{val.q_max}"
        out[key] = val
    return out


def _load_target(args) -> tuple:
    panel, report = ingest_fredmd(args.input)
    transformed = apply_transforms(panel)
    if args.target not in transformed.names:
        raise InvalidConfig(f"target {args.target!r} is not a panel column")
    y_values = transformed.column(args.target)
    return transformed, y_values, report


def _cmd_simulate(args, out_dir: Path) -> int:
    betas = (tuple(args.beta0), tuple(args.beta1))[: args.q_true]
    if len(betas) != args.q_true:
        raise InvalidConfig("--q-true beyond 2 needs explicit beta vectors")
    sim_cfg = SimConfig(
        T=args.T, N=args.N, n=args.n, r=args.r, q=args.q_true,
        betas=betas, seed=args.seed,
    )
    cfg = _rolling_config(args, oos=not args.insample_only)
    horizons = _int_list(args.h)
    jobs = _resolve_jobs(args.jobs)
    all_rows, meta = [], {}
    for h in horizons:
        _eprint(f"[simulate] h={h}: {args.reps} replications on {len(cfg.cells())} cells")
        report = monte_carlo_report(sim_cfg, cfg, n_reps=args.reps, horizon=h, jobs=jobs)
        all_rows.extend(report.rows)
        meta = report.meta
    merged = EvalReport(rows=all_rows, meta=meta)
    export_draw(generate(sim_cfg, rep=0), out_dir / "panel_rep0.csv",
                out_dir / "target_rep0.csv")
    merged.to_csv(out_dir / "report.csv")
    merged.to_json_summary(out_dir / "summary.json")
    return 1 if merged.has_hard_errors() else 0


def _cmd_ingest(args, out_dir: Path) -> int:
    panel, report = ingest_fredmd(args.input)
    transformed = apply_transforms(panel)
    write_fredmd(transformed, out_dir / "transformed.csv")
    write_drop_report(report, out_dir / "drops.jsonl")
    _eprint(
        f"[ingest] kept {panel.n_series} columns x {panel.n_periods} rows; "
        f"dropped {len(report)}; transformed rows {transformed.n_periods}"
    )
    return 0


def _cmd_forecast(args, out_dir: Path) -> int:
    transformed, y_values, _ = _load_target(args)
    h = _int_list(args.h)[0]
    method = args.methods.split(",")[0]
    k = _int_list(args.k)[0]
    q = _int_list(args.q)[0]
    y = TargetSeries(y_values, horizon=h, name=args.target)
    lasso_cfg = None
    if args.lasso:
        lasso_cfg = (
            LassoConfig(selection="fixed", lam=args.lam)
            if args.lam is not None
            else LassoConfig()
        )
    model, point = forecast_method(
        method, transformed, y, k=k, q=q,
        lag_spec=args.lag_select, lasso=lasso_cfg,
    )
    payload = {
        "target": args.target,
        "horizon": h,
        "forecast": point,
        "model": json.loads(model.to_json()),
    }
    with open(out_dir / "forecast.json", "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
    _eprint(f"[forecast] {args.target} h={h} via {method}: {point:.6g}")
    return 0


def _cmd_evaluate(args, out_dir: Path) -> int:
    transformed, y_values, _ = _load_target(args)
    cfg = _rolling_config(args)
    all_rows = []
    for h in _int_list(args.h):
        _eprint(f"[evaluate] h={h} on {len(cfg.cells())} cells")
        report = rolling_rmsfe(
            transformed, TargetSeries(y_values, horizon=h, name=args.target), cfg
        )
        all_rows.extend(report.rows)
    merged = EvalReport(rows=all_rows, meta={"target": args.target,
                                             "train_frac": args.train_frac})
    merged.to_csv(out_dir / "report.csv")
    merged.to_json_summary(out_dir / "summary.json")
    return 1 if merged.has_hard_errors() else 0


def _cmd_scan_r2(args, out_dir: Path) -> int:
    transformed, y_values, _ = _load_target(args)
    h = _int_list(args.h)[0]
    spec = args.lag_select if args.lag_select is not None else _int_list(args.q)[0]
    y = TargetSeries(y_values, horizon=h, name=args.target)
    scaling = build_scaled_panel(y, transformed, spec, light=True)
    with open(out_dir / "r2.csv", "w") as fh:
        fh.write("name,group,q,r2\n")
        for fit in scaling.fits:
            group = transformed.groups[fit.index] if transformed.groups else ""
            fh.write(f"{transformed.names[fit.index]},{group},{fit.q},{fit.r2!r}\n")
    _eprint(f"[scan-r2] wrote {len(scaling.fits)} rows")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "ingest": _cmd_ingest,
    "forecast": _cmd_forecast,
    "evaluate": _cmd_evaluate,
    "scan-r2": _cmd_scan_r2,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser, subparsers = build_parser()
    try:
        args = _apply_config_file(parser, subparsers, argv)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        status = _COMMANDS[args.command](args, out_dir)
        _write_manifest(out_dir, args.command, _resolved_dict(args))
        return status
    except SdpcaError as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        _eprint(json.dumps(err, sort_keys=True))
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
