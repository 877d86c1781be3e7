"""Command-line front end.

Subcommands: ``gen-data`` (synthetic datasets), ``calibrate`` (fit model
constants), ``predict`` (single-condition SOC/CA50), ``simulate``
(closed-loop transient scenarios), ``sensitivity`` (input-error study)
and ``compare-soc`` (full-integral vs closed-form sweep).  All outputs are
CSV; every subcommand is bit-reproducible for identical inputs and seed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import calibration, harness
from .engine import DEFAULT_GEOMETRY, load_geometry
from .model import (
    DEFAULT_PARAMS,
    ModelParams,
    load_params,
    predict_phasing,
    save_params,
    soc_full_integral,
)
from .calibration import CalibrationOptions, DatasetArrays
from .harness import BOXES, DEFAULT_GRID_SIZE
from .model import OperatingCondition
from .engine import IvcState
from .scenarios import CASE_SETTINGS, case_scenario, scenario_from_json


def _add_common(parser: argparse.ArgumentParser, *, out_required: bool = True) -> None:
    parser.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    parser.add_argument("--out", type=Path, required=out_required,
                        help="output file path")
    parser.add_argument("--params", type=Path, default=None,
                        help="model parameter file (key=value); default: stock constants")
    parser.add_argument("--geometry", type=Path, default=None,
                        help="engine geometry JSON; default: stock 12.4L geometry")


def _params_geom(args) -> tuple[ModelParams, "object"]:
    params = load_params(args.params) if args.params else DEFAULT_PARAMS
    geom = load_geometry(args.geometry) if args.geometry else DEFAULT_GEOMETRY
    return params, geom


def _cmd_gen_data(args) -> int:
    params, geom = _params_geom(args)
    samples = harness.gen_dataset(
        n=args.n, box=args.box, truth=args.truth, noise_std=args.noise,
        seed=args.seed, params=params, geom=geom, oracle_step=args.step)
    calibration.write_dataset(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def _cmd_calibrate(args) -> int:
    params, geom = _params_geom(args)
    samples = calibration.load_dataset(args.data, geom)
    init = load_params(args.init) if args.init else params
    opts = CalibrationOptions(
        learning_rate=args.lr, max_epochs=args.max_epochs,
        tolerance=args.tolerance, window=args.window,
        soc_weight=args.soc_weight)
    report = calibration.calibrate(samples, init, opts, geom)
    save_params(report.final_params, args.out)
    if args.report:
        with Path(args.report).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "rmse"])
            for i, value in enumerate(report.rmse_trace):
                writer.writerow([i, repr(value)])
    print(f"samples:        {len(samples)}")
    print(f"epochs:         {report.epochs} (stop: {report.stop_reason})")
    print(f"final RMSE:     {report.rmse:.6f} CAD")
    print(f"error std:      {report.std_dev:.6f} CAD")
    print(f"max |error|:    {report.max_abs_error:.6f} CAD")
    print(f"params written: {args.out}")
    return 0


def _cmd_predict(args) -> int:
    params, geom = _params_geom(args)
    cond = OperatingCondition(
        n=args.n, egr=args.egr, phi=args.phi,
        ivc=IvcState(p_ivc=args.p_ivc, t_ivc=args.t_ivc, v_ivc=geom.v_ivc),
        x_r=args.x_r, soi=args.soi)
    soc, ca50 = predict_phasing(cond, params, geom)
    print(f"SOC (closed form):   {soc!r} deg aTDC")
    print(f"CA50 (closed form):  {ca50!r} deg aTDC")
    soc_full = soc_full_integral(cond, params, geom, step=args.step)
    print(f"SOC (full integral, step {args.step:g}): {soc_full!r} deg aTDC")
    print(f"CA50 (full integral): {soc_full + (ca50 - soc)!r} deg aTDC")
    return 0


def _cmd_simulate(args) -> int:
    if args.config:
        config = scenario_from_json(args.config)
        if args.controller:
            from dataclasses import replace
            config = replace(config, controller=args.controller)
    else:
        config = case_scenario(
            args.case, args.controller or "adaptive",
            mismatch=not args.no_mismatch,
            quantize=not args.no_quantize,
            lag=not args.no_lag,
            combustion="closed-form" if args.closed_form else "integral",
            seed=args.seed)
    result = harness.run_scenario(config, csv_path=args.out)
    print(f"scenario {config.name} [{config.controller}]: "
          f"{len(result.records)} cycles -> {args.out}")
    for segment in ("pre", "post"):
        m = result.metrics[segment]
        lo, hi = m.steady_state_error_band
        print(f"  {segment:4s} settle={m.settling_cycles} "
              f"(from segment start: {m.settling_cycles_from_start}) "
              f"steady=[{lo:+.3f}, {hi:+.3f}] "
              f"overshoot={m.overshoot:.3f} peak|err|={m.transient_peak_error:.3f}")
    if args.metrics_out:
        with Path(args.metrics_out).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["segment", "settling_cycles", "settling_cycles_from_start",
                             "steady_min", "steady_max", "overshoot",
                             "transient_peak_error"])
            for segment in ("pre", "post"):
                m = result.metrics[segment]
                writer.writerow([
                    segment,
                    "" if m.settling_cycles is None else m.settling_cycles,
                    "" if m.settling_cycles_from_start is None else m.settling_cycles_from_start,
                    repr(m.steady_state_error_band[0]),
                    repr(m.steady_state_error_band[1]),
                    repr(m.overshoot), repr(m.transient_peak_error)])
    return 0


def _cmd_sensitivity(args) -> int:
    params, geom = _params_geom(args)
    conditions = harness.sample_conditions(args.n, args.box, args.seed, geom)
    rows = harness.sensitivity(conditions, params, geom, oracle_step=args.step)
    harness.write_sensitivity(rows, args.out)
    print(f"{'source':>8s} {'delta':>8s} {'std':>8s} {'max':>8s} "
          f"{'chg_std':>8s} {'chg_max':>8s}")
    for r in rows:
        print(f"{r.source:>8s} {r.delta:+8.3g} {r.std_dev:8.4f} "
              f"{r.max_abs_error:8.4f} {r.change_std:8.4f} {r.change_max:8.4f}")
    print(f"wrote {args.out}")
    return 0


def _cmd_compare_soc(args) -> int:
    params, geom = _params_geom(args)
    conditions = harness.sample_conditions(args.n, args.box, args.seed, geom)
    comparison = harness.compare_soc(conditions, params, geom, oracle_step=args.step)
    harness.write_comparison(comparison, args.out)
    print(f"points: {comparison.n_points} (misfires skipped: {comparison.misfires})")
    print(f"SOC  error std: {comparison.soc_std:.4f} CAD, max |err|: "
          f"{comparison.soc_max_abs:.4f} CAD")
    print(f"CA50 error std: {comparison.ca50_std:.4f} CAD, max |err|: "
          f"{comparison.ca50_max_abs:.4f} CAD")
    print(f"|error| > 1 CAD at {comparison.exceed_1cad} points")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasekit",
        description="Combustion-phasing modeling, calibration and control toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic calibration dataset")
    _add_common(p)
    p.add_argument("--n", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--box", choices=sorted(BOXES), default="table4",
                   help="operating-condition sampling box")
    p.add_argument("--truth", choices=("simplified", "full"), default="simplified",
                   help="observation source: closed-form model or full integral")
    p.add_argument("--noise", type=float, default=0.0,
                   help="Gaussian observation noise std [deg]")
    p.add_argument("--step", type=float, default=0.01,
                   help="integration step for --truth full [deg]")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("calibrate", help="fit model constants to a dataset")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True, help="dataset CSV")
    p.add_argument("--init", type=Path, default=None,
                   help="initial parameter file (default: stock constants)")
    p.add_argument("--report", type=Path, default=None,
                   help="write per-epoch RMSE trace CSV here")
    p.add_argument("--lr", type=float, default=CalibrationOptions.learning_rate)
    p.add_argument("--max-epochs", type=int, default=CalibrationOptions.max_epochs)
    p.add_argument("--tolerance", type=float, default=CalibrationOptions.tolerance)
    p.add_argument("--window", type=int, default=CalibrationOptions.window)
    p.add_argument("--soc-weight", type=float, default=CalibrationOptions.soc_weight)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("predict", help="SOC/CA50 for one operating condition")
    _add_common(p, out_required=False)
    p.add_argument("--n", type=float, required=True, help="engine speed [RPM]")
    p.add_argument("--egr", type=float, default=0.0, help="EGR mass fraction")
    p.add_argument("--phi", type=float, required=True, help="equivalence ratio")
    p.add_argument("--p-ivc", type=float, required=True, help="IVC pressure [bar]")
    p.add_argument("--t-ivc", type=float, required=True, help="IVC temperature [K]")
    p.add_argument("--x-r", type=float, default=0.0384, help="residual fraction")
    p.add_argument("--soi", type=float, default=0.0, help="injection angle [deg aTDC]")
    p.add_argument("--step", type=float, default=0.1,
                   help="full-integral step [deg]")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("simulate", help="run a closed-loop transient scenario")
    _add_common(p)
    p.add_argument("--case", choices=sorted(CASE_SETTINGS), default=None,
                   help="stock scenario preset")
    p.add_argument("--config", type=Path, default=None,
                   help="scenario JSON (overrides --case)")
    p.add_argument("--controller", choices=("adaptive", "feedforward"), default=None)
    p.add_argument("--no-mismatch", action="store_true",
                   help="plant uses the controller's exact constants")
    p.add_argument("--no-quantize", action="store_true",
                   help="disable the 0.1 deg actuation quantum")
    p.add_argument("--no-lag", action="store_true",
                   help="in-cylinder state follows the manifold instantly")
    p.add_argument("--closed-form", action="store_true",
                   help="plant truth = closed-form model (exactly invertible)")
    p.add_argument("--metrics-out", type=Path, default=None,
                   help="write segment metrics CSV here")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sensitivity", help="CA50 error response to input errors")
    _add_common(p)
    p.add_argument("--n", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--box", choices=sorted(BOXES), default="transient",
                   help="operating-condition sampling box")
    p.add_argument("--step", type=float, default=0.01,
                   help="integration step of the ground-truth integral [deg]")
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("compare-soc", help="full-integral vs closed-form sweep")
    _add_common(p)
    p.add_argument("--n", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--box", choices=sorted(BOXES), default="table4")
    p.add_argument("--step", type=float, default=0.001,
                   help="integration step of the reference integral [deg]")
    p.set_defaults(func=_cmd_compare_soc)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and not args.config and not args.case:
        parser.error("simulate needs --case or --config")
    try:
        return args.func(args)
    except Exception as exc:  # surface a diagnostic, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
