"""Command-line entry point: ``chsim simulate|preset|predict|besov``.

Exit codes: 0 pass or completed run, 1 failed check or hypothesis violation,
2 usage or configuration error, 3 infrastructure (I/O) failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .besov import BesovParams, besov_norm, block_norms, build_partition
from .blowup import HypothesisViolation, blowup_inputs, predict
from .config import ConfigError, load_config
from .presets import PresetKind, run_preset
from .runner import OUTPUT_ROOT_ENV, initial_state, read_snapshot, run_simulation
from .spectral_core import Grid1D

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INFRA = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True, default=float)
    sys.stdout.write("\n")


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = run_simulation(cfg, args.output)
    _emit({"directory": str(out.directory), **out.manifest["status"]})
    if out.error:
        print(f"run aborted: {out.error}", file=sys.stderr)
    return out.exit_code


def _cmd_preset(args) -> int:
    report = run_preset(args.name, args.overrides, args.output_root)
    _emit(report)
    return EXIT_OK if report["pass"] else EXIT_FAIL


def _cmd_predict(args) -> int:
    cfg = load_config(args.config)
    s0 = initial_state(cfg)
    if not np.any(s0.m) and not np.any(s0.n):
        raise HypothesisViolation("N0 = 0 at every x0: the initial data vanish identically")
    inputs, cert = blowup_inputs(s0, args.family)
    result = predict(inputs, cert.derivation).to_dict()
    extra = [predict(blowup_inputs(s0, args.family, x0)[0], cert.derivation).to_dict()
             for x0 in (*cfg.prediction.x0, *args.x0)]
    if extra:
        result["additional"] = extra
    _emit(result)
    return EXIT_OK


def _grid_from_x(x: np.ndarray) -> Grid1D:
    if x.size < 2:
        raise UsageError("snapshot needs at least two rows")
    dx = x[1] - x[0]
    L = -float(x[0])
    if not np.allclose(np.diff(x), dx, rtol=1e-9, atol=0) or not np.isclose(x.size * dx, 2 * L, rtol=1e-9):
        raise UsageError("snapshot x column is not a uniform periodic grid on [-L, L)")
    return Grid1D(x.size, L)


def _cmd_besov(args) -> int:
    try:
        params = BesovParams(args.s, args.p, args.r)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    x, u = read_snapshot(args.snapshot)
    grid = _grid_from_x(x)
    part = build_partition(grid)
    _emit({"snapshot": args.snapshot, "s": params.s, "p": params.p, "r": params.r,
           "norm": besov_norm(u, params, part),
           "blocks": block_norms(u, params, part).tolist(), "j_max": part.j_max})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chsim",
        description="Pseudospectral two-component Camassa-Holm simulator and checks.",
        epilog=f"Default output root: ${OUTPUT_ROOT_ENV} (else ./chsim_runs).")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a TOML configuration")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="output directory (overrides the config)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("preset", help="run a canonical experiment and its pass rule")
    p.add_argument("name", choices=[k.value for k in PresetKind], metavar="name",
                   help=", ".join(k.value for k in PresetKind))
    p.add_argument("overrides", nargs="*", help="section.key=value (TOML literal values)")
    p.add_argument("--output-root", help="root directory for preset outputs")
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("predict", help="blow-up threshold prediction for a configuration")
    p.add_argument("config")
    p.add_argument("--family", required=True, choices=["A_sign", "A_L1", "B_sign"])
    p.add_argument("--x0", type=float, action="append", default=[],
                   help="additional evaluation point (repeatable)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("besov", help="Besov norm of an x,value snapshot")
    p.add_argument("snapshot")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--p", default="2")
    p.add_argument("--r", default="2")
    p.set_defaults(func=_cmd_besov)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HypothesisViolation as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"infrastructure error: {exc}", file=sys.stderr)
        return EXIT_INFRA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
