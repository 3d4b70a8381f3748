"""Command line entry point: ``run``, ``check`` and ``mms`` subcommands."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import config as C
from .checks import format_table, run_checks
from .diagnostics import Recorder
from .flow import GraphState, run_flow
from .mms import constant_field, convergence_study, cosine_1d, radial_cosine, steady_case
from .output import DiagnosticsWriter, write_csv_table, write_echo, write_snapshot


def _prepare(cfg):
    grid = C.make_grid(cfg)
    return grid, C.make_stepper(cfg), C.initial_field(cfg, grid)


def cmd_run(cfg, out_dir=None) -> int:
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = C.config_hash(cfg)
    write_echo(out / "config.txt", C.echo_config(cfg), h)
    grid, stepper, u0 = _prepare(cfg)
    rec = Recorder(tuple(cfg.diagnostics_levels))
    snaps = [0]
    last_snap = [0]

    with DiagnosticsWriter(out / "diagnostics.csv", h) as writer:
        def hook(state):
            n = len(rec.rows)
            row = rec(state)
            if len(rec.rows) > n:
                writer.write(row)
            return row

        def snap(state, n):
            if cfg.output_snapshot_interval and n % cfg.output_snapshot_interval == 0:
                write_snapshot(out, snaps[0], state, h)
                snaps[0] += 1
                last_snap[0] = n

        state0 = GraphState.from_field(grid, u0)
        write_snapshot(out, snaps[0], state0, h)
        snaps[0] += 1
        res = run_flow(state0, grid, stepper, hooks=(hook,), cadence=cfg.diagnostics_cadence,
                       step_hooks=(snap,) if cfg.output_snapshot_interval else ())
    if res.reason != "aborted" and (last_snap[0] != res.steps or res.steps == 0):
        write_snapshot(out, snaps[0], res.state, h)

    rows = rec.rows
    cap = cfg.diagnostics_h2v2_cap_factor * rows[0].h2v2_max
    hmax = max(r.h2v2_max for r in rows)
    if rows[0].h2v2_max > 0 and hmax > cap:
        print(f"warning: max H^2 v^2 = {hmax:.6g} exceeds cap {cap:.6g}", file=sys.stderr)
    print(f"{res.reason}: t={res.state.t!r} steps={res.steps} osc={res.osc!r} "
          f"vtilde_max={res.vtilde_max!r}")
    if res.reason == "aborted":
        print(f"error: {res.error}", file=sys.stderr)
        return 3
    return 0


def cmd_check(cfg) -> int:
    grid, stepper, u0 = _prepare(cfg)
    results = run_checks(cfg, grid, stepper, u0, cfg.diagnostics_levels,
                         cadence=cfg.diagnostics_cadence,
                         h2v2_cap_factor=cfg.diagnostics_h2v2_cap_factor)
    print(format_table(results))
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def _mms_case(cfg):
    A = cfg.mms_amplitude
    if cfg.mms_case == "const":
        return steady_case(constant_field(A))
    if cfg.profile_kind == "interval":
        return steady_case(cosine_1d(A, cfg.profile_r0, cfg.profile_r1))
    if cfg.profile_kind == "circle":
        return steady_case(radial_cosine(A, (cfg.profile_center_y, cfg.profile_center_r), cfg.profile_a))
    raise C.ConfigError("mms.case: case cos needs profile.kind interval or circle")


def cmd_mms(cfg, levels: int, out_dir=None) -> int:
    if levels < 3:
        raise C.ConfigError(f"levels: levels ≥ 3 required, got {levels}")
    case = _mms_case(cfg)
    prof = C.make_profile(cfg)
    base = cfg.grid_n if cfg.dim == 1 else (cfg.grid_ns, cfg.grid_nphi)
    study = convergence_study(case, prof, base, levels=levels, t_final=cfg.mms_t_final,
                              cfg=C.make_stepper(cfg))
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = C.config_hash(cfg)

    def order_text(p):
        if p is None:
            return ""
        return "exact" if math.isinf(p) else repr(float(p))

    rows = [(r["level"], r["resolution"], float(r["h"]), float(r["error_linf"]), order_text(r["order"]))
            for r in study.rows()]
    write_csv_table(out / "mms.csv", ("level", "resolution", "h", "error_linf", "order"), rows, h)
    for r in rows:
        print(f"level {r[0]}  {r[1]:>9}  error={r[3]:.6e}  order={r[4] or '-'}")
    if study.exact:
        print("all errors zero: order exact")
        return 0
    bad = [(i, i + 1, p) for i, p in enumerate(study.orders)
           if not (cfg.mms_order_min <= p <= cfg.mms_order_max)]
    for i, j, p in bad:
        print(f"order {p!r} between levels {i} and {j} outside "
              f"[{cfg.mms_order_min!r}, {cfg.mms_order_max!r}]", file=sys.stderr)
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="torusflow", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="integrate the flow and write diagnostics and snapshots")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    c = sub.add_parser("check", help="run the invariant battery and print a PASS/FAIL table")
    c.add_argument("--config", required=True)
    m = sub.add_parser("mms", help="manufactured-solution convergence study")
    m.add_argument("--config", required=True)
    m.add_argument("--levels", type=int, default=3)
    m.add_argument("--out", default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = C.load_config(args.config)
        if args.command == "run":
            return cmd_run(cfg, args.out)
        if args.command == "check":
            return cmd_check(cfg)
        return cmd_mms(cfg, args.levels, args.out)
    except C.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
