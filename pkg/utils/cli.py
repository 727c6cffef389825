"""
sheathkit command line: one subcommand per reproduction.

Exit codes: 0 when the command completed (verdicts are in the output files),
1 for configuration errors, 2 for solver failures outside the expected regimes.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from utils.experiments.runs import (
    bump,
    find_bohm_transition,
    run_bohm_scan,
    run_experiment,
    run_stationary,
)
from utils.extractors.data_fetcher import fetch_experiment_spec, fetch_plasma_config
from utils.extractors.data_flatten import to_jsonable, get_flattened_sagdeev, get_flattened_stationary
from utils.plasma.diagnostics import select_constants
from utils.plasma.errors import InvalidConfig, NotSolvable, SheathKitError
from utils.plasma.poisson import (
    EllipticProblem,
    elliptic_estimates_check,
    potential_bounds_check,
    solve_perturbation_potential,
)
from utils.plasma.stationary import StationaryGrid

logger = logging.getLogger("sheathkit")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _print_json(data):
    print(json.dumps(to_jsonable(data), indent=2, sort_keys=True))


def _load_spec(args, experiment=None):
    spec = fetch_experiment_spec(args.config, getattr(args, "spec", None), experiment)
    if getattr(args, "out_dir", None):
        spec = replace(spec, output_dir=args.out_dir)
    return spec


def _run_dir(spec):
    return Path(spec.output_dir) / spec.experiment


def cmd_stationary(args):
    spec = _load_spec(args, "stationary_only")
    summary = {"phi_b": spec.plasma.phi_b}
    try:
        stationary = run_stationary(spec, StationaryGrid(phi_max=args.phi_max))
    except NotSolvable as e:
        summary.update({"solvable": False, "reason": e.reason, "message": str(e)})
        _print_json(summary)
        return 0
    summary.update({
        "solvable": True,
        "rho_infty": stationary.end_state.rho_infty,
        "bohm_integral": stationary.potential.bohm,
        "sup_B": stationary.sup_B,
        "decay_rate": stationary.decay_rate,
        "decay_rate_est": stationary.decay_rate_est,
        "x_max": stationary.x_max,
    })
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        get_flattened_stationary(stationary).to_csv(out, index=False)
        get_flattened_sagdeev(stationary.potential).to_csv(out.with_name(out.stem + "_sagdeev.csv"), index=False)
        summary["profile"] = str(out)
    _print_json(summary)
    return 0


def _evolve(spec):
    if spec.experiment not in ("stability", "instability"):
        raise InvalidConfig(f"evolve runs stability or instability experiments, not {spec.experiment!r}")
    report = run_experiment(spec, output_dir=_run_dir(spec))
    _print_json({**report.verdict, "run_dir": str(report.run_dir)})
    return 0


def cmd_evolve(args):
    return _evolve(_load_spec(args))


def cmd_stability(args):
    return _evolve(_load_spec(args, "stability"))


def cmd_instability(args):
    return _evolve(_load_spec(args, "instability"))


def cmd_bohm_scan(args):
    spec = _load_spec(args, "bohm_scan")
    table = run_bohm_scan(spec.plasma, spec.u_values, max_workers=args.workers)
    out = Path(args.out) if args.out else Path(spec.output_dir) / "bohm_scan.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out, index=False)
    summary = {"rows": len(table), "solvable": int(table["solvable"].sum()), "table": str(out)}
    solvable = table["solvable"].to_numpy(dtype=bool)
    flips = np.nonzero(solvable[1:] != solvable[:-1])[0]
    if args.transition and flips.size:
        k = int(flips[0])
        u = table["u_infty"].to_numpy()
        summary["transition_u"] = find_bohm_transition(spec.plasma, float(u[k]), float(u[k + 1]))
    _print_json(summary)
    return 0


def cmd_select_constants(args):
    config = fetch_plasma_config(args.config)
    choice = select_constants(args.mode, config, args.epsilon)
    _print_json(choice.to_dict())
    return 0


def cmd_check_elliptic(args):
    stationary = run_stationary(_load_spec(args, "stationary_only"))
    x = stationary.x
    n = args.amplitude * bump(x, 0.5, 0.5 + args.width)
    problem = EllipticProblem(
        x=x, phi_s=stationary.phi_s, electron_model=stationary.electron_model, source=n,
    )
    result = solve_perturbation_potential(problem)
    bounds = potential_bounds_check(result, stationary, problem, raise_on_violation=False)
    report = elliptic_estimates_check(result, problem, args.beta, stationary.phi_b)
    _print_json({
        "newton_iterations": result.iterations,
        "residual": result.residuals[-1],
        "bounds": asdict(bounds),
        "elliptic": asdict(report),
    })
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="sheathkit", description="Kinetic plasma sheath reproductions")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stationary", help="build the stationary sheath and write its profile")
    p.add_argument("--config", required=True)
    p.add_argument("--phi-max", type=float, default=1.0, help="upper end of the Sagdeev table")
    p.add_argument("--out", help="CSV path for the profile")
    p.set_defaults(func=cmd_stationary)

    for name, func, helptext in (
        ("evolve", cmd_evolve, "run the experiment named in the config"),
        ("stability", cmd_stability, "stability reproduction"),
        ("instability", cmd_instability, "instability reproduction"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        p.add_argument("--spec", help="extra [evolve]/[perturbation]/[experiment] tables")
        p.add_argument("--out-dir")
        p.set_defaults(func=func)

    p = sub.add_parser("bohm-scan", help="K, sup B and solvability over u_values")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="CSV path for the table")
    p.add_argument("--out-dir")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--transition", action="store_true", help="bisect the first solvability change")
    p.set_defaults(func=cmd_bohm_scan)

    p = sub.add_parser("select-constants", help="scan for constants satisfying the stability condition")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=("i", "ii"), required=True)
    p.add_argument("--epsilon", type=float, default=0.25)
    p.set_defaults(func=cmd_select_constants)

    p = sub.add_parser("check-elliptic", help="solve one perturbation potential and report the estimates")
    p.add_argument("--config", required=True)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--amplitude", type=float, default=1e-3)
    p.add_argument("--width", type=float, default=4.0)
    p.set_defaults(func=cmd_check_elliptic)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        return args.func(args)
    except InvalidConfig as e:
        logger.error("Configuration error: %s", e)
        return 1
    except SheathKitError as e:
        logger.error("Solver failure: %s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
