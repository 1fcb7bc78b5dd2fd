"""Command line entry point: run a scene or one of the verification studies."""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import harness
from .pressure import FIRST_ORDER, FULL_SECOND_ORDER, SPD_PROJECTED
from .sim import parse_config, run


def _cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    t0 = time.perf_counter()
    state = run(cfg, steps=args.steps, out_dir=args.output)
    out = args.output or cfg.directory
    print(f"ran {state.index} steps to t={state.t:.6g} "
          f"in {time.perf_counter() - t0:.2f}s; output in {out}/")
    return 0


def _check(label: str, ok: bool) -> bool:
    print(f"  [{'PASS' if ok else 'FAIL'}] {label}")
    return ok


def _cmd_verify_interp(args) -> int:
    if args.output:
        os.makedirs(args.output, exist_ok=True)
    res = harness.interp_convergence(heatmap_dir=args.output)
    print("resolution   cell L-inf    face L-inf")
    for n, ec, ef in zip(res.resolutions, res.cell_errors, res.face_errors):
        print(f"  {n:4d}^2    {ec:.4e}    {ef:.4e}")
    print(f"orders (cell): {['%.3f' % o for o in res.cell_orders]}")
    print(f"orders (face): {['%.3f' % o for o in res.face_orders]}")
    print(f"linear-field max error: cell {res.cell_linear_max:.2e}, "
          f"face {res.face_linear_max:.2e}")
    ok = _check("second-order convergence on both samplings",
                all(1.9 <= o <= 2.1 for o in res.cell_orders + res.face_orders))
    ok &= _check("linear fields reproduced exactly",
                 max(res.cell_linear_max, res.face_linear_max) <= 1e-10)
    if args.output:
        print(f"error heatmaps written to {args.output}/")
    return 0 if ok else 1


def _cmd_verify_pool(args) -> int:
    order = (FULL_SECOND_ORDER, SPD_PROJECTED, FIRST_ORDER)
    flat = harness.flat_pool_test()
    limit = 1e-4 * flat.u_star_max
    print("hydrostatic pool, max residual wet-face speed:")
    for m in order:
        print(f"  {m:20s} {flat.residual[m]:.4e}   "
              f"(interior max|div u| {flat.interior_div[m]:.2e})")
    ok = _check(f"second-order modes below {limit:.2e}",
                max(flat.residual[FULL_SECOND_ORDER],
                    flat.residual[SPD_PROJECTED]) <= limit)
    ok &= _check("first-order residual at least 10x larger",
                 flat.residual[FIRST_ORDER]
                 >= 10 * max(flat.residual[FULL_SECOND_ORDER],
                             flat.residual[SPD_PROJECTED]))
    tilt = harness.tilted_pool_test()
    print("perturbed-surface pool, RMS residual near-surface speed:")
    for m in order:
        print(f"  {m:20s} {tilt.residual[m]:.4e}")
    ok &= _check("full second order < projected < first order",
                 tilt.residual[FULL_SECOND_ORDER] < tilt.residual[SPD_PROJECTED]
                 < tilt.residual[FIRST_ORDER])
    return 0 if ok else 1


def _cmd_verify_diffusion(args) -> int:
    res = harness.diffusion_compare()
    print(f"circle area: initial {res.area_initial:.6f}, "
          f"after {res.steps} steps static {res.area_static:.6f}, "
          f"moving {res.area_moving:.6f}")
    print(f"area loss: static {res.loss_static:.4e}, moving {res.loss_moving:.4e}")
    ok = _check("moving-window loss at most half the static loss",
                res.loss_moving <= 0.5 * res.loss_static)
    ok &= _check("window-frame transport exact",
                 res.uniform_error <= 1e-10)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hfsim",
        description="free-surface liquid simulator with moving grid windows")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scene config")
    sim.add_argument("config", help="path to a scene .ini file")
    sim.add_argument("--steps", type=int, default=None,
                     help="override the configured step count")
    sim.add_argument("--output", default=None,
                     help="override the configured output directory")
    sim.set_defaults(fn=_cmd_simulate)

    ver = sub.add_parser("verify", help="run a verification study")
    which = ver.add_subparsers(dest="study", required=True)
    vi = which.add_parser("interp", help="interpolation convergence study")
    vi.add_argument("--output", default=None,
                    help="directory for PGM error heatmaps")
    vi.set_defaults(fn=_cmd_verify_interp)
    vp = which.add_parser("pool", help="hydrostatic pool residual currents")
    vp.set_defaults(fn=_cmd_verify_pool)
    vd = which.add_parser("diffusion", help="static vs moving-window diffusion")
    vd.set_defaults(fn=_cmd_verify_diffusion)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
