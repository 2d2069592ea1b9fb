"""Command-line front end.

Exit codes: 0 success, 1 a check failed or the physics inputs are invalid,
2 usage errors (bad flags, malformed or unknown config keys).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import parallel
from .action import el_residual, fokker_action, momentum_fields
from .canonical import stationarity_residuals
from .checks import gradient_check, legendre_check, random_smooth_pair
from .config import RunConfig, dumps, parse_config, with_seed
from .errors import ConfigError, MultitimeError
from .quantum import SCAN_PARAMETERS, build_action_operator, build_lattice, lowest_eigenvalues, stationarity_scan
from .solver import coulomb_reference, solve_el
from .trajectory import PhaseField, Trajectory, make_grid, read_trajectory_csv, trajectory_to_csv

log = logging.getLogger("multitime")

GRADIENT_LIMIT = 1e-5
LEGENDRE_LIMIT = 1e-8


def _grids(cfg: RunConfig):
    return make_grid(cfg.params.T1, cfg.n1), make_grid(cfg.params.T2, cfg.n2)


def _paths(cfg: RunConfig, args):
    if args.traj1 or args.traj2:
        if not (args.traj1 and args.traj2):
            raise ConfigError(["--traj1 and --traj2 must be given together"], usage=True)
        return read_trajectory_csv(args.traj1), read_trajectory_csv(args.traj2)
    g1, g2 = _grids(cfg)
    e = cfg.endpoints
    return Trajectory.straight(g1, e.q1_0, e.q1_T), Trajectory.straight(g2, e.q2_0, e.q2_T)


def _emit(args, text: str, name: str) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _echo(cfg: RunConfig) -> dict:
    p = cfg.params
    return {
        "m1": p.m1, "m2": p.m2, "coupling": p.coupling, "T1": p.T1, "T2": p.T2,
        "n1": cfg.n1, "n2": cfg.n2, "sigma": p.sigma, "dim": p.dim, "seed": cfg.seed,
        "defaults_applied": list(cfg.defaults_applied),
    }


def cmd_action_eval(cfg: RunConfig, args) -> int:
    t1, t2 = _paths(cfg, args)
    b = fokker_action(t1, t2, cfg.params)
    rep = el_residual(t1, t2, cfg.params)
    doc = {"config": _echo(cfg), "action": b.to_dict(), "el_residual": {"sup_norm": rep.sup_norm, "l2_norm": rep.l2_norm}}
    _emit(args, dumps(doc), "action.json")
    return 0


def cmd_solve(cfg: RunConfig, args) -> int:
    sol = solve_el(cfg.endpoints, _grids(cfg), cfg.params, cfg.solver)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "traj1.csv").write_text(trajectory_to_csv(sol.traj1), encoding="utf-8")
    (out / "traj2.csv").write_text(trajectory_to_csv(sol.traj2), encoding="utf-8")
    doc = {"config": _echo(cfg), **sol.to_dict()}
    if args.reference:
        ref = coulomb_reference(cfg.endpoints, _grids(cfg), cfg.params)
        (out / "reference1.csv").write_text(trajectory_to_csv(ref.traj1), encoding="utf-8")
        (out / "reference2.csv").write_text(trajectory_to_csv(ref.traj2), encoding="utf-8")
        diff = max(
            float(np.max(np.abs(sol.traj1.values - ref.traj1.values))),
            float(np.max(np.abs(sol.traj2.values - ref.traj2.values))),
        )
        scale = max(float(np.max(np.abs(ref.traj1.values))), float(np.max(np.abs(ref.traj2.values))))
        doc["reference"] = {**ref.meta, "relative_sup_difference": diff / scale}
    (out / "report.json").write_text(dumps(doc), encoding="utf-8")
    return 0


def cmd_check_legendre(cfg: RunConfig, args) -> int:
    t1, t2 = _paths(cfg, args)
    res = legendre_check(t1, t2, cfg.params)
    res["limit"] = LEGENDRE_LIMIT
    res["passed"] = res["relative_error_exact"] <= LEGENDRE_LIMIT
    _emit(args, dumps({"config": _echo(cfg), "legendre": res}), "legendre.json")
    return 0 if res["passed"] else 1


def cmd_check_gradient(cfg: RunConfig, args) -> int:
    if args.traj1 or args.traj2:
        t1, t2 = _paths(cfg, args)
    else:
        rng = np.random.default_rng(cfg.seed)
        t1, t2 = random_smooth_pair(cfg.endpoints, _grids(cfg), rng, amplitude=args.amplitude)
    rows = gradient_check(t1, t2, cfg.params, h=args.step)
    lines = ["quantity,particle,abs_error,scale,rel_error,passed"]
    ok = True
    for r in rows:
        passed = r.rel_error <= GRADIENT_LIMIT
        ok &= passed
        lines.append(
            f"{r.quantity},{r.particle},{r.abs_error:.17g},{r.scale:.17g},{r.rel_error:.17g},{str(passed).lower()}"
        )
    _emit(args, "\n".join(lines) + "\n", "gradient.csv")
    return 0 if ok else 1


def cmd_check_stationarity(cfg: RunConfig, args) -> int:
    if args.traj1 or args.traj2:
        t1, t2 = _paths(cfg, args)
    else:
        sol = solve_el(cfg.endpoints, _grids(cfg), cfg.params, cfg.solver)
        t1, t2 = sol.traj1, sol.traj2
    p1, p2 = momentum_fields(t1, t2, cfg.params)
    rep = stationarity_residuals(PhaseField(t1, p1), PhaseField(t2, p2), cfg.params)
    limit = 10.0 * cfg.solver.tol
    doc = {
        "config": _echo(cfg),
        "el_residual_sup": el_residual(t1, t2, cfg.params).sup_norm,
        "stationarity": rep.to_dict(),
        "limit": limit,
        "passed": bool(rep.q_sup_norm <= limit and rep.p_sup_norm <= limit),
    }
    _emit(args, dumps(doc), "stationarity.json")
    return 0 if doc["passed"] else 1


def cmd_quantum_spectrum(cfg: RunConfig, args) -> int:
    spec = cfg.lattice_spec()
    op = build_action_operator(build_lattice(spec), cfg.params)
    res = lowest_eigenvalues(op, args.k, args.tol, which=args.which)
    if args.out:
        _emit(args, res.to_csv(), "spectrum.csv")
        _emit(args, dumps({"config": _echo(cfg), "operator": op.meta, "spectrum": res.to_dict()}), "spectrum.json")
    else:
        sys.stdout.write(res.to_csv())
    return 0


def cmd_quantum_scan(cfg: RunConfig, args) -> int:
    if args.steps < 3:
        raise ConfigError([f"--steps must be >= 3, got {args.steps}"], usage=True)
    values = np.linspace(args.start, args.stop, args.steps)
    res = stationarity_scan(cfg.lattice_spec(), cfg.params, args.param, values, k=args.k, tol=args.tol)
    if args.out:
        _emit(args, res.to_csv(), "scan.csv")
        _emit(args, dumps({"config": _echo(cfg), "scan": res.to_dict()}), "scan.json")
    else:
        sys.stdout.write(res.to_csv())
    for err in res.errors:
        log.warning("scan point failed: %s", err)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry (dotted keys for sections); repeatable")
    common.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for parallel evaluations")
    common.add_argument("--out", default=None, help="output directory (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    paths = argparse.ArgumentParser(add_help=False)
    paths.add_argument("--traj1", help="trajectory CSV for particle 1 (default: straight path)")
    paths.add_argument("--traj2", help="trajectory CSV for particle 2")

    parser = argparse.ArgumentParser(prog="multitime", description="Two-charge multi-time action toolkit")
    top = parser.add_subparsers(dest="group", required=True)

    action = top.add_parser("action").add_subparsers(dest="command", required=True)
    action.add_parser("eval", parents=[common, paths]).set_defaults(func=cmd_action_eval)

    solve = top.add_parser("solve", parents=[common])
    solve.add_argument("--reference", action="store_true", help="also solve the Newtonian Coulomb problem")
    solve.set_defaults(func=cmd_solve, need_out=True)

    check = top.add_parser("check").add_subparsers(dest="command", required=True)
    check.add_parser("legendre", parents=[common, paths]).set_defaults(func=cmd_check_legendre)
    grad = check.add_parser("gradient", parents=[common, paths])
    grad.add_argument("--amplitude", type=float, default=0.05, help="size of the random path perturbation")
    grad.add_argument("--step", type=float, default=1e-4, help="finite-difference step")
    grad.set_defaults(func=cmd_check_gradient)
    check.add_parser("stationarity", parents=[common, paths]).set_defaults(func=cmd_check_stationarity)

    quantum = top.add_parser("quantum").add_subparsers(dest="command", required=True)
    spec = quantum.add_parser("spectrum", parents=[common])
    spec.add_argument("--k", type=int, default=4)
    spec.add_argument("--tol", type=float, default=1e-12)
    spec.add_argument("--which", choices=["SM", "LA", "SA"], default="SM")
    spec.set_defaults(func=cmd_quantum_spectrum)
    scan = quantum.add_parser("scan", parents=[common])
    scan.add_argument("--param", choices=SCAN_PARAMETERS, required=True)
    scan.add_argument("--from", dest="start", type=float, required=True)
    scan.add_argument("--to", dest="stop", type=float, required=True)
    scan.add_argument("--steps", type=int, required=True)
    scan.add_argument("--k", type=int, default=3)
    scan.add_argument("--tol", type=float, default=1e-12)
    scan.set_defaults(func=cmd_quantum_scan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "need_out", False) and not args.out:
        parser.print_usage(sys.stderr)
        print("error: --out is required", file=sys.stderr)
        return 2
    try:
        parallel.set_workers(args.threads)
        cfg = with_seed(parse_config(args.config, args.set), args.seed)
        return args.func(cfg, args)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"error: {msg}", file=sys.stderr)
        return 2 if exc.usage else 1
    except (MultitimeError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
