"""Command-line entry point: ``ffrsim {sweep,validate,calibrate,reproduce}``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from .analysis import average_ceu_probability, joint_nearest_pdf
from .errors import ParameterError, QuadratureError
from .ffr import ceu_prob_conditional, db_to_linear
from .pathloss import PathLossParams
from .quadrature import integrate_semi_infinite
from .simulator import SimConfig, estimate_many

log = logging.getLogger("ffrsim")


def _parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (inclusive stop) or a comma-separated list."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(n))
    return tuple(float(x) for x in text.split(",") if x.strip())


def _parse_overlay(text: str) -> tuple[str, tuple[float, ...]]:
    name, _, values = text.partition("=")
    if not values:
        raise argparse.ArgumentTypeError("overlay must look like AXIS=v1,v2,...")
    return name.strip(), _parse_grid(values)


def _base_config(args) -> SimConfig:
    cfg = ex.read_config(args.config) if args.config else SimConfig()
    if args.drops is not None:
        cfg = replace(cfg, n_drops=args.drops)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    return cfg


def _write_outputs(result: ex.SweepResult, args, figure: str) -> None:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ex.emit(result, args.format, out)
    log.info("wrote %s", out)
    if args.emit_plot:
        plot = out.with_name(out.stem + "_plot.csv")
        ex.emit_plot_data(result, figure, plot)
        log.info("wrote %s", plot)


def cmd_sweep(args) -> int:
    overlay_axis, overlay_values = args.overlay if args.overlay else (None, ())
    spec = ex.SweepSpec(_base_config(args), args.axis, args.grid, overlay_axis, overlay_values)
    result = ex.run_sweep(spec, workers=args.workers)
    _write_outputs(result, args, "sweep")
    return 0


def cmd_reproduce(args) -> int:
    record = ex.load_calibration(args.calibration)
    spec = ex.figure_spec(args.figure, record, _base_config(args), coarse=args.coarse)
    result = ex.run_sweep(spec, workers=args.workers)
    _write_outputs(result, args, args.figure)
    return 0


def cmd_calibrate(args) -> int:
    base = _base_config(args)
    targets = [t for t in ex.FIGURE_TARGETS if not args.figure or t.figure in args.figure]
    record = ex.calibrate_unstated(targets, base, workers=args.workers)
    if args.out:
        record.save(args.out)
        log.info("wrote %s", args.out)
    print(ex.calibration_report(record))
    return 0 if all(f.within_tolerance for f in record.figures.values()) else 1


def cmd_validate(args) -> int:
    """Theory-versus-simulation checks; exit status 1 if any fails."""
    rng = np.random.default_rng(args.seed if args.seed is not None else 7)
    checks: list[tuple[str, bool, str]] = []

    n = 1_000_000
    worst = 0.0
    for _ in range(20):
        L1, L2 = rng.uniform(0.05, 1.0, size=2)
        T = db_to_linear(rng.uniform(-10, 10))
        g = rng.exponential(size=(n, 2))
        freq = np.mean(g[:, 0] * L1 < T * g[:, 1] * L2)
        p = ceu_prob_conditional(L1, L2, T)
        worst = max(worst, abs(freq - p) / math.sqrt(p * (1 - p) / n))
    checks.append(("conditional CEU probability vs exponential-gain Monte Carlo", worst <= 3.0,
                   f"worst deviation {worst:.2f} s.e."))

    lam = 1e-2
    scale = 1.0 / math.sqrt(math.pi * lam)
    total, _ = integrate_semi_infinite(
        lambda r1: np.array([integrate_semi_infinite(lambda r2: joint_nearest_pdf(x, r2, lam), x, scale=scale)[0]
                             for x in np.atleast_1d(r1)]), 0.0, scale=scale)
    checks.append(("joint distance density normalisation", abs(total - 1) <= 1e-6, f"integral {total:.10f}"))

    drops = args.drops or 100_000
    base = SimConfig(n_drops=drops, master_seed=args.seed if args.seed is not None else SimConfig().master_seed)
    combos = [(-10.0, 0.5), (0.0, 0.5), (0.0, 1.5), (10.0, 1.5), (0.0, 2.0), (20.0, 2.0)]
    alpha = ex.load_calibration().params("fig3").get("alpha", base.pathloss.alpha)
    cfgs = [replace(ex.apply_axis(base, "threshold_T_dB", t), pathloss=PathLossParams(alpha, b)) for t, b in combos]
    ests = estimate_many(cfgs, classification_only=True)
    for (t, b), cfg, est in zip(combos, cfgs, ests):
        try:
            pe = average_ceu_probability(cfg.lambda_bs, cfg.ffr.threshold_T, cfg.pathloss)
        except QuadratureError as exc:
            checks.append((f"CEU density T={t:g} dB beta={b:g}", False, str(exc)))
            continue
        diff = abs(est.ceu_density - pe)
        checks.append((f"CEU density T={t:g} dB beta={b:g}", diff <= 0.01,
                       f"simulated {est.ceu_density:.4f} vs analytical {pe:.4f}"))

    for name, ok, detail in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return 0 if all(ok for _, ok, _ in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ffrsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default: str | None = None):
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--drops", type=int, help="drops per grid point (default 100000)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
        if out_default is not None:
            p.add_argument("--out", default=out_default)
            p.add_argument("--format", choices=("csv", "json"), default="csv")
            p.add_argument("--emit-plot", action="store_true", help="also write long-format plot data")

    p = sub.add_parser("sweep", help="sweep one parameter, optionally overlaid with a second")
    common(p, "sweep.csv")
    p.add_argument("--axis", choices=ex.AXES, required=True)
    p.add_argument("--grid", type=_parse_grid, required=True, help="start:stop:step or v1,v2,...")
    p.add_argument("--overlay", type=_parse_overlay, help="AXIS=v1,v2,...")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="re-run a figure with the calibrated constants")
    p.add_argument("figure", choices=("fig3", "fig4", "fig5"))
    common(p, "")
    p.add_argument("--coarse", action="store_true", help="few grid points per curve")
    p.add_argument("--calibration", help="calibration record (default: the packaged one)")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("calibrate", help="fit the constants the figures leave unreported")
    common(p)
    p.add_argument("--figure", action="append", choices=("fig3", "fig4", "fig5"))
    p.add_argument("--out", help="where to write the calibration record (JSON)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="theory-versus-simulation checks")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "out", None) == "":
        args.out = f"{args.figure}.{args.format}"
    start = time.perf_counter()
    try:
        status = args.func(args)
    except (ParameterError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    log.info("done in %.1f s", time.perf_counter() - start)
    return status


if __name__ == "__main__":
    sys.exit(main())
