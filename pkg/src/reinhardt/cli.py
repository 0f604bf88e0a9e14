"""Command-line interface: ``reinhardt <command> [options]``.

Commands
--------
simulate             integrate the extended flow and write CSV/JSON/SVG
extremal --circle    the circular extremal and its density
octagon --k K        shoot for the smoothed (6K+2)-gon
fuller               sample a Fuller chain (log spiral or RK4 run) to CSV/SVG
check                run the invariant audits and print a pass/fail table
export-hypotrochoid  write the six hypotrochoid curves to CSV/SVG

Every command accepts ``--config FILE``.  The file holds ``key = value``
lines whose keys are the long option names with dashes or underscores.
Explicit flags win over the file, which wins over built-in defaults.

Exit codes: 0 on success, 2 for usage errors, 1 for numerical failures
(a JSON diagnostic is written to stderr).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__

log = logging.getLogger("reinhardt")

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_USAGE = 2
OCTAGON_REFERENCE = 0.902414


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

def read_config(path: str | os.PathLike) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def write_config(args: argparse.Namespace, parser: argparse.ArgumentParser, path) -> None:
    """Write the effective options of a command back out as a config file."""
    lines = []
    for action in parser._actions:
        if action.dest in ("help", "config", "command", "save_config") or not action.option_strings:
            continue
        v = getattr(args, action.dest)
        if v is None:
            continue
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, (tuple, list)):
            v = ",".join(repr(float(x)) for x in v)
        lines.append(f"{action.dest} = {v}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _coerce(action: argparse.Action, value: str):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{action.dest}: expected a boolean, got {value!r}")
    conv = action.type or str
    try:
        v = conv(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{action.dest}: bad value {value!r}") from exc
    if action.choices is not None and v not in action.choices:
        raise UsageError(f"{action.dest}: {v!r} is not one of {list(action.choices)}")
    return v


def apply_config(parser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    by_dest = {a.dest: a for a in parser._actions if a.option_strings}
    defaults = {}
    for key, raw in values.items():
        if key not in by_dest or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        defaults[key] = _coerce(by_dest[key], raw)
    parser.set_defaults(**defaults)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _positive(kind):
    def conv(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    conv.__name__ = kind.__name__
    return conv


def _triple(s: str) -> tuple[float, float, float]:
    parts = [float(p) for p in s.replace(" ", "").split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return tuple(parts)


def _pair(s: str) -> tuple[float, float]:
    parts = [float(p) for p in s.replace(" ", "").split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers")
    return tuple(parts)


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text, encoding="utf-8")
        log.info("wrote %s", path)


def _print_json(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _format_of(args) -> str:
    if args.format:
        return args.format
    if args.out and args.out != "-":
        suffix = Path(args.out).suffix.lower().lstrip(".")
        if suffix in ("csv", "json", "svg"):
            return suffix
    return "json"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .controls import ControlPoint, ControlSetSpec
    from .dynamics import ClosedLoopPolicy, ConstantPolicy, ExtendedState, IntegratorConfig, integrate
    from .extremals import halfplane_svg, trajectory_halfplane
    from .halfplane import phi
    from .sampling import project_perp, random_traceless
    from .sl2 import GroupMatrix, Traceless

    rng = np.random.default_rng(args.seed)
    X0 = phi(args.x0)
    L1 = Traceless(*args.l1) if args.l1 else random_traceless(rng)
    LR = project_perp(Traceless(*args.lr) if args.lr else random_traceless(rng), X0)
    s0 = ExtendedState(GroupMatrix.identity(), X0, L1, LR, args.lambda_cost)
    if args.control == "constant":
        policy = ConstantPolicy.from_point(ControlPoint(*args.u))
    elif args.control == "simplex":
        policy = ClosedLoopPolicy(ControlSetSpec.simplex())
    else:
        policy = ClosedLoopPolicy(ControlSetSpec.disk(args.r2))
    cfg = IntegratorConfig(step=args.step, method=args.method, record_every=args.record_every)
    traj = integrate(s0, policy, args.t_end, cfg)
    fmt = _format_of(args)
    if fmt == "csv":
        _emit(traj.to_csv(), args.out)
    elif fmt == "svg":
        _emit(halfplane_svg([trajectory_halfplane(traj)]), args.out)
    else:
        _emit(traj.to_json(), args.out)
    return EXIT_OK


def cmd_extremal(args) -> int:
    from .extremals import CIRCLE_DENSITY, boundary_svg, circle_extremal, reconstruct_boundary

    if not args.circle:
        raise UsageError("extremal: only --circle is available; use `octagon` for polygons")
    c = circle_extremal(args.samples)
    doc = {
        "density": c.density,
        "density_error": abs(c.density - CIRCLE_DENSITY),
        "exact": CIRCLE_DENSITY,
        "cost": c.cost,
        "transversality": c.residuals.max,
        "hamiltonian_max": c.hamiltonian_max,
    }
    if args.out:
        fmt = _format_of(args)
        if fmt == "csv":
            _emit(c.trajectory.to_csv(), args.out)
        elif fmt == "svg":
            _emit(boundary_svg(reconstruct_boundary(c.trajectory).polygon), args.out)
        else:
            _emit(c.trajectory.to_json(), args.out)
    _print_json(doc)
    return EXIT_OK


def cmd_octagon(args) -> int:
    from .dynamics import IntegratorConfig
    from .extremals import OCTAGON_DENSITY, boundary_svg, octagon_shoot, reconstruct_boundary

    res = octagon_shoot(args.k, cfg=IntegratorConfig(step=args.step))
    doc = {
        "k": args.k,
        "sides": 6 * args.k + 2,
        "y0": res.y0,
        "tau": res.tau,
        "density": res.density,
        "density_error_vs_0.902414": abs(res.density - OCTAGON_REFERENCE),
        "density_error_vs_closed_form": abs(res.density - OCTAGON_DENSITY),
        "transversality": res.residuals.max,
        "hamiltonian_max": res.hamiltonian_max,
        "max_distance_to_i": res.max_distance_to_i,
    }
    if args.out:
        fmt = _format_of(args)
        if fmt == "csv":
            _emit(res.trajectory.to_csv(), args.out)
        elif fmt == "svg":
            _emit(boundary_svg(reconstruct_boundary(res.trajectory).polygon), args.out)
        else:
            _emit(res.trajectory.to_json(), args.out)
    _print_json(doc)
    return EXIT_OK


def cmd_fuller(args) -> int:
    from .fuller import FullerState, fuller_rows, integrate_fuller, log_spiral, spiral_svg, FULLER_CSV_COLUMNS

    if args.mode == "spiral":
        if not 0.0 < args.t0 < args.t1:
            raise UsageError("fuller: need 0 < t0 < t1")
        ts = np.geomspace(args.t0, args.t1, args.samples)
        z = log_spiral(ts).T
    else:
        rng = np.random.default_rng(args.seed)
        z0 = rng.normal(size=3) + 1j * rng.normal(size=3)
        every = max(1, int(round(args.t1 / args.step / max(args.samples - 1, 1))))
        ts, z = integrate_fuller(FullerState(z0, -1j), args.t1, args.step, every)
    fmt = _format_of(args)
    if fmt == "svg":
        _emit(spiral_svg(args.t0, args.t1), args.out)
        return EXIT_OK
    rows = fuller_rows(ts, z)
    if fmt == "csv":
        lines = [",".join(FULLER_CSV_COLUMNS)]
        lines += [",".join(repr(float(v)) for v in r) for r in rows]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        doc = {"columns": list(FULLER_CSV_COLUMNS), "rows": rows.tolist()}
        _emit(json.dumps(doc, sort_keys=True), args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    from .audit import format_table, run_audits

    results = run_audits(args.seed, include_slow=not args.quick)
    print(format_table(results))
    if args.out:
        _emit(json.dumps([r.as_dict() for r in results], sort_keys=True, indent=2), args.out)
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_export_hypotrochoid(args) -> int:
    from .extremals import Hypotrochoid, boundary_svg, hypotrochoid_multicurve

    if args.roulette:
        h = Hypotrochoid.from_roulette(*args.roulette)
    else:
        h = Hypotrochoid(args.R, args.r, args.rho)
    period = 2.0 * math.pi * (1.0 if h.rho == 0 else max(1.0, 1.0 / abs(h.rho)))
    ts = np.linspace(0.0, args.periods * period, args.samples)
    rows = []
    for t in ts:
        s = hypotrochoid_multicurve(h.R, h.r, h.rho, float(t))
        rows.append([float(t)] + s.points.ravel().tolist())
    arr = np.array(rows)
    fmt = _format_of(args)
    if fmt == "svg":
        _emit(boundary_svg(arr[:, 1:3]), args.out)
    elif fmt == "csv":
        cols = ["t"] + [f"sigma{j}_{c}" for j in range(6) for c in "xy"]
        lines = [",".join(cols)] + [",".join(repr(float(v)) for v in r) for r in arr]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        doc = {"R": h.R, "r": h.r, "rho": h.rho, "mirrored": h.mirrored,
               "period_shift_residual": h.period_shift_residual(ts), "rows": arr.tolist()}
        _emit(json.dumps(doc, sort_keys=True), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, formats: bool = True) -> None:
    p.add_argument("--config", help="key = value file of option defaults")
    p.add_argument("--save-config", metavar="FILE", help="write the effective options to FILE and continue")
    p.add_argument("--out", "-o", help="output path ('-' or absent for stdout)")
    if formats:
        p.add_argument("--format", choices=("csv", "json", "svg"), help="output format (default from --out suffix, else json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reinhardt", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("simulate", help="integrate the state-costate flow")
    _common(p)
    p.add_argument("--control", choices=("constant", "simplex", "disk"), default="disk",
                   help="constant control, closed loop on the simplex, or closed loop on a disk")
    p.add_argument("--u", type=_triple, default=(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
                   help="u0,u1,u2 for --control constant (must sum to 1)")
    p.add_argument("--r2", type=_positive(float), default=1.0, help="squared disk radius (>= 1/3); 1 = circumscribed")
    p.add_argument("--x0", type=_pair, default=(0.0, 1.0), help="starting half-plane point x,y")
    p.add_argument("--l1", type=_triple, help="L1(0) as a,b,c (random from --seed if absent)")
    p.add_argument("--lr", type=_triple, help="LR(0) as a,b,c, projected orthogonal to X(0)")
    p.add_argument("--lambda-cost", type=float, default=-1.0, help="cost multiplier (-1 normal, 0 abnormal)")
    p.add_argument("--t-end", type=_positive(float), default=1.0)
    p.add_argument("--step", type=_positive(float), default=1e-4)
    p.add_argument("--method", choices=("rk4", "rk45"), default="rk4")
    p.add_argument("--record-every", type=_positive(int), default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extremal", help="closed-form extremals")
    _common(p)
    p.add_argument("--circle", action="store_true", help="the circular extremal")
    p.add_argument("--samples", type=_positive(int), default=1000)
    p.set_defaults(func=cmd_extremal)

    p = sub.add_parser("octagon", help="smoothed (6k+2)-gon by shooting")
    _common(p)
    p.add_argument("--k", type=_positive(int), default=1)
    p.add_argument("--step", type=_positive(float), default=1e-4)
    p.set_defaults(func=cmd_octagon)

    p = sub.add_parser("fuller", help="length-3 Fuller chain samples")
    _common(p)
    p.add_argument("--mode", choices=("spiral", "random"), default="spiral")
    p.add_argument("--t0", type=float, default=1e-2, help="first spiral time (spiral mode)")
    p.add_argument("--t1", type=_positive(float), default=1.0, help="last time")
    p.add_argument("--samples", type=_positive(int), default=200)
    p.add_argument("--step", type=_positive(float), default=1e-3, help="RK4 step (random mode)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fuller)

    p = sub.add_parser("check", help="run the invariant audits")
    _common(p, formats=False)
    p.add_argument("--quick", action="store_true", help="skip the octagon shooting audit")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("export-hypotrochoid", help="six hypotrochoid multi-curves")
    _common(p)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--r", type=float, default=0.3)
    p.add_argument("--rho", type=_positive(float), default=1.0 / 7.0)
    p.add_argument("--roulette", type=_triple, help="R1,r1,d1 of the rolling-circle construction")
    p.add_argument("--samples", type=_positive(int), default=1000)
    p.add_argument("--periods", type=_positive(float), default=1.0)
    p.set_defaults(func=cmd_export_hypotrochoid)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _setup_logging() -> None:
    level = os.environ.get("REINHARDT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def parse(argv: Sequence[str]) -> argparse.Namespace:
    """Parse argv, folding in a config file if one is named."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sp = _subparser(parser, args.command)
        apply_config(sp, read_config(args.config))
        args = parser.parse_args(argv)
    if getattr(args, "save_config", None):
        write_config(args, _subparser(parser, args.command), args.save_config)
    return args


def run(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
    except SystemExit as exc:  # argparse exits 2 on bad flags, 0 on --help
        return int(exc.code or 0)
    except UsageError as exc:
        sys.stderr.write(f"reinhardt: error: {exc}\n")
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"reinhardt: error: {exc}\n")
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        best = getattr(exc, "best", None)
        if best is not None:
            diag["best_residual"] = best
        sys.stderr.write(json.dumps(diag, sort_keys=True) + "\n")
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
