"""Command-line front end.

Subcommands:

* ``simulate``  — one detailed run; events CSV plus a totals listing.
* ``audit``     — structural battery over a random corpus; fails (exit 1)
  if any pathwise relation is violated beyond tolerance.
* ``sweep``     — long kernel runs across a grid of lead-time bounds,
  measured long-run fractions against the closed-form predictions.
* ``diffusion`` — Monte Carlo boundary rates of the doubly-reflected
  diffusion against its closed forms.
* ``predict``   — the closed-form prediction table alone (no simulation).

Exit status: 0 on success, 1 when a run or check fails, 2 on bad usage or
configuration.  All outputs are deterministic given the config and seeds.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .audit import AuditReport, audit_stream, tie_rich_stream
from .config import ConfigError, Settings, load_settings
from .diffusion import (StationaryLaw, PathGrid, boundary_rates_mc,
                        idle_rate, renege_rate)
from .kernels import run_counters
from .predict import (fraction_late_work_standard,
                      fraction_lost_work_reneging, prediction_table,
                      renege_probability, work_ratio)
from .primitives import (LeadTimeSpec, PrimitivesError, generate_stream,
                         rationalize, traffic_params)
from .simulator import (PolicyKind, PolicySpec, SimulationError, simulate)
from .stats import StatsError, long_run_fractions


def _fmt(x) -> str:
    return f"{float(x):.10g}"


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (int, float, np.floating))
                        else str(v) for v in row])


def _print_table(header, rows, stream=None) -> None:
    stream = stream or sys.stdout
    cells = [[str(h) for h in header]]
    for row in rows:
        cells.append([_fmt(v) if isinstance(v, (int, float, np.floating))
                      else str(v) for v in row])
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    for i, row in enumerate(cells):
        line = "  ".join(c.rjust(w) for c, w in zip(row, widths))
        print(line, file=stream)
        if i == 0:
            print("  ".join("-" * w for w in widths), file=stream)


# -- simulate --------------------------------------------------------------------


def _cmd_simulate(settings: Settings, args) -> int:
    run = settings.run
    stream = generate_stream(run.seed, settings.interarrival,
                             settings.service, settings.lead,
                             count=run.count, horizon=run.horizon)
    if run.rational or args.rational:
        stream = rationalize(stream)
    kind = run.policy
    policy = PolicySpec(kind, seed=run.seed) \
        if kind == PolicyKind.RANDOM_RENEGING else PolicySpec(kind)
    if kind == PolicyKind.HYBRID_RENEGING:
        companion = simulate(stream, PolicyKind.EDF_RENEGING,
                             record_measures=False)
        policy = PolicySpec(kind, companion=companion)
    sample_times = None
    if run.samples > 0:
        end = float(stream.arrivals[len(stream) - 1]) if len(stream) else 0.0
        sample_times = list(np.linspace(0.0, end, run.samples))
    traj = simulate(stream, policy, record_measures=run.samples > 0,
                    sample_times=sample_times)
    out = settings.output_dir / f"simulate_{kind.value}_seed{run.seed}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out)
    for key, value in sorted(traj.totals().items()):
        print(f"{key} = {_fmt(value)}")
    print(f"wrote {out}")
    return 0


# -- audit -----------------------------------------------------------------------


def _audit_one(payload) -> dict:
    (seed, customers, exact, interarrival, service, lead, random_seed) = payload
    if exact:
        stream = tie_rich_stream(seed, customers)
    else:
        stream = generate_stream(seed, interarrival, service, lead,
                                 count=customers)
    return audit_stream(stream, random_seed=random_seed)


def _cmd_audit(settings: Settings, args) -> int:
    aud = settings.audit
    payloads = []
    for i in range(aud.streams):
        exact = aud.exact_every > 0 and (i + 1) % aud.exact_every == 0
        payloads.append((aud.seed + i, aud.customers, exact,
                         settings.interarrival, settings.service,
                         settings.lead, aud.seed))
    report = AuditReport(n_streams=aud.streams, tolerance=aud.tolerance)
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_audit_one, payloads))
    else:
        results = [_audit_one(p) for p in payloads]
    for i, checks in enumerate(results):
        report.merge(checks, label=f"stream[{i}]")
    for line in report.lines():
        print(line)
    if not report.ok:
        for label, key, value in report.failures:
            print(f"FAIL {label}: {key} = {value:.3e}", file=sys.stderr)
        return 1
    return 0


# -- sweep -----------------------------------------------------------------------


def _sweep_one(payload) -> dict:
    (seed, interarrival, service, lead_lo, lead_hi, count, warmup,
     batches) = payload
    lead = LeadTimeSpec.parse(f"uniform lo={lead_lo} hi={lead_hi}")
    stream = generate_stream(seed, interarrival, service, lead, count=count)
    ren = long_run_fractions(run_counters(stream, reneging=True,
                                          warmup_frac=warmup,
                                          n_batches=batches))
    std = long_run_fractions(run_counters(stream, reneging=False,
                                          warmup_frac=warmup,
                                          n_batches=batches))
    traffic = traffic_params(interarrival, service)
    dbar = (lead_lo + lead_hi) / 2.0
    lost = ren["removed_work"]
    late = std["late_work"]
    return {
        "lead_hi": lead_hi,
        "dbar": dbar,
        "lost_work_mc": lost.mean,
        "lost_work_hw": lost.half_width,
        "lost_work_theory": fraction_lost_work_reneging(traffic, dbar),
        "late_work_mc": late.mean,
        "late_work_hw": late.half_width,
        "late_work_theory": fraction_late_work_standard(traffic, dbar),
        "ratio_mc": late.mean / lost.mean if lost.mean else float("nan"),
        "ratio_theory": work_ratio(traffic, dbar),
        "renege_prob_mc": ren["removed_customers"].mean,
        "renege_prob_theory": renege_probability(traffic, dbar, service),
    }


def _cmd_sweep(settings: Settings, args) -> int:
    sw = settings.sweep
    warmup = args.warmup if args.warmup is not None else sw.warmup
    payloads = [(sw.seed + i, settings.interarrival, settings.service,
                 sw.lead_lo, hi, sw.count, warmup, sw.batches)
                for i, hi in enumerate(sw.lead_hi)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_one, payloads))
    else:
        rows = [_sweep_one(p) for p in payloads]
    header = list(rows[0].keys())
    table = [[r[k] for k in header] for r in rows]
    _print_table(header, table)
    out = settings.output_dir / "sweep_results.csv"
    _write_csv(out, header, table)
    print(f"wrote {out}")
    return 0


# -- diffusion -------------------------------------------------------------------


def _diffusion_one(payload) -> dict:
    gamma, sigma2, h0, t_end, dt, paths, seed, bins = payload
    grid = PathGrid(t_end=t_end, dt=dt)
    mc = boundary_rates_mc(gamma, sigma2, h0, grid, n_paths=paths,
                           seed=seed, nbins=bins)
    law = StationaryLaw(gamma, sigma2, h0)
    upper = renege_rate(gamma, sigma2, h0)
    lower = idle_rate(gamma, sigma2, h0)
    return {
        "gamma": gamma,
        "upper_rate_mc": mc.upper_mean,
        "upper_rate_theory": upper,
        "upper_rel_err": abs(mc.upper_mean - upper) / upper,
        "lower_rate_mc": mc.lower_mean,
        "lower_rate_theory": lower,
        "lower_rel_err": abs(mc.lower_mean - lower) / lower,
        "ks_occupation": mc.ks_against(law),
    }


def _cmd_diffusion(settings: Settings, args) -> int:
    d = settings.diffusion
    payloads = [(g, d.sigma2, d.h0, d.t_end, d.dt, d.paths, d.seed + i,
                 d.bins) for i, g in enumerate(d.gamma)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_diffusion_one, payloads))
    else:
        rows = [_diffusion_one(p) for p in payloads]
    header = list(rows[0].keys())
    table = [[r[k] for k in header] for r in rows]
    _print_table(header, table)
    out = settings.output_dir / "diffusion_rates.csv"
    _write_csv(out, header, table)
    print(f"wrote {out}")
    return 0


# -- predict ---------------------------------------------------------------------


def _cmd_predict(settings: Settings, args) -> int:
    traffic = traffic_params(settings.interarrival, settings.service)
    sw = settings.sweep
    dbars = [(sw.lead_lo + hi) / 2.0 for hi in sw.lead_hi]
    rows = prediction_table(traffic, dbars, settings.service)
    header = list(rows[0].keys())
    table = [[r[k] for k in header] for r in rows]
    _print_table(header, table)
    out = settings.output_dir / "predictions.csv"
    _write_csv(out, header, table)
    print(f"wrote {out}")
    return 0


# -- wiring ----------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edfq",
        description="Deadline-ordered queues with reneging: simulation, "
                    "pathwise audits, and diffusion-limit predictions.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, workers=False, warmup=False, rational=False):
        p.add_argument("--config", default=None, metavar="FILE",
                       help="INI configuration file (defaults built in)")
        p.add_argument("--seed-override", type=int, default=None,
                       metavar="N", help="replace every configured seed")
        p.add_argument("--out", default=None, metavar="DIR",
                       help="output directory (overrides [output] dir)")
        if workers:
            p.add_argument("--workers", type=int, default=1, metavar="N",
                           help="parallel worker processes")
        if warmup:
            p.add_argument("--warmup", type=float, default=None, metavar="F",
                           help="warm-up fraction override")
        if rational:
            p.add_argument("--rational", action="store_true",
                           help="rerun the sampled stream in exact "
                                "rational arithmetic")

    p = sub.add_parser("simulate", help="one detailed trajectory")
    common(p, rational=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("audit", help="pathwise relation battery")
    common(p, workers=True)
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("sweep", help="long-run fractions vs predictions")
    common(p, workers=True, warmup=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("diffusion", help="reflected-diffusion boundary rates")
    common(p, workers=True)
    p.set_defaults(func=_cmd_diffusion)

    p = sub.add_parser("predict", help="closed-form prediction table")
    common(p)
    p.set_defaults(func=_cmd_predict)
    return parser


def _apply_overrides(settings: Settings, args) -> Settings:
    from dataclasses import replace
    if args.out is not None:
        settings = replace(settings, output_dir=Path(args.out))
    if args.seed_override is not None:
        s = args.seed_override
        settings = replace(
            settings,
            run=replace(settings.run, seed=s),
            sweep=replace(settings.sweep, seed=s),
            diffusion=replace(settings.diffusion, seed=s),
            audit=replace(settings.audit, seed=s),
        )
    return settings


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        settings = _apply_overrides(load_settings(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(settings, args)
    except (PrimitivesError, SimulationError, StatsError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
