"""Command-line entry point: ``coboundary <subcommand> [--config FILE] [options]``.

Exit codes: 0 success, 1 configuration error, 2 a solvability condition
fails, 3 the iteration did not converge.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import field as fieldmod
from .cohomology import residual_commutative, solve_commutative
from .conditions import cpoc_report, enumerate_periodic_actions, fc_report, poc_report
from .errors import CoboundaryError, DomainError, FCViolation, NonSolvable
from .field import EpsSeriesField, norm_sup_real
from .nashmoser import find_gamma0, gamma_parameters, gamma_schedule, leading_order
from .scenario import (EXIT_CONDITION, EXIT_CONFIG, EXIT_NO_CONVERGENCE, EXIT_OK, ScenarioConfig,
                       run_scenario, write_json)


def _config(args) -> ScenarioConfig:
    overrides = {"tol": args.tol, "mode": args.mode, "seed": args.seed, "nmax": args.nmax}
    if args.config:
        return ScenarioConfig.load(args.config, **overrides)
    return ScenarioConfig.from_dict({}, **overrides)


def _out_dir(args, config: ScenarioConfig) -> Path:
    out = Path(args.out or config.outputs.get("dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _additive_order(eta: EpsSeriesField, config: ScenarioConfig):
    """The epsilon order examined by the additive checks: configured, else the leading one."""
    order = config.family.get("check_order")
    if order is None:
        order = leading_order(eta)
    return order


def cmd_check_poc(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    eta, _ = config.build_family()
    tol = args.tol if args.tol is not None else float(config.checks.get("poc_tol", 1e-6))
    rep = poc_report(eta, enumerate_periodic_actions(config.spec.d, config.nmax))
    code = EXIT_OK if rep.defect <= tol else EXIT_CONDITION
    write_json(out / "report.json", {"scenario": config.to_dict(), "poc": rep.to_dict(), "tol": tol,
                                     "exit_code": code})
    print(f"poc defect {rep.defect:.6g} (tol {tol:g}) witness {rep.argmax_witness}")
    return code


def cmd_check_fc(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    eta, _ = config.build_family()
    tol = args.tol if args.tol is not None else float(config.checks.get("fc_tol", 1e-8))
    order = _additive_order(eta, config)
    if order is None:
        fc = cpoc = None
        worst = 0.0
    else:
        beta = eta.order(order)
        fc = fc_report(beta)
        cpoc = cpoc_report(beta, enumerate_periodic_actions(config.spec.d, config.nmax))
        worst = max(fc.defect, cpoc.defect)
    code = EXIT_OK if worst <= tol else EXIT_CONDITION
    write_json(out / "report.json", {
        "scenario": config.to_dict(), "order": order, "tol": tol, "exit_code": code,
        "fc": fc.to_dict() if fc else None, "cpoc": cpoc.to_dict() if cpoc else None})
    print(f"order {order}: fc defect {fc.defect if fc else 0.0:.6g}, "
          f"cpoc defect {cpoc.defect if cpoc else 0.0:.6g} (tol {tol:g})")
    return code


def cmd_solve_commutative(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    eta, _ = config.build_family()
    order = _additive_order(eta, config)
    tol = args.tol if args.tol is not None else 1e-9
    record = {"scenario": config.to_dict(), "order": order, "tol": tol}
    if order is None:
        record.update(residual=0.0, exit_code=EXIT_OK)
        write_json(out / "report.json", record)
        print("family is the identity; nothing to solve")
        return EXIT_OK
    beta = eta.order(order)
    try:
        alpha = solve_commutative(beta, float(config.checks.get("resonance_tol", 1e-6)),
                                  float(config.checks.get("solver_tol", 1e-8)))
    except (FCViolation, NonSolvable) as exc:
        record.update(error=str(exc), exit_code=EXIT_CONDITION)
        if isinstance(exc, FCViolation):
            record["witness"] = exc.witness
        write_json(out / "report.json", record)
        print(f"not solvable: {exc}")
        return EXIT_CONDITION
    resid = residual_commutative(alpha, beta)
    code = EXIT_OK if resid <= tol * max(1.0, norm_sup_real(beta)) else EXIT_NO_CONVERGENCE
    record.update(residual=resid, beta_norm=norm_sup_real(beta), alpha_norm=norm_sup_real(alpha),
                  exit_code=code)
    fieldmod.save(alpha.as_series(order), out / "alpha.json")
    write_json(out / "report.json", record)
    print(f"order {order}: residual {resid:.3g}")
    return code


def cmd_solve(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    result = run_scenario(config, out)
    rep = result.report
    print(f"status {rep['status']}: final defect {rep['final_defect']}, lambda {rep['iteration']['lambda']}, "
          f"steps {len(rep['iteration']['steps'])}")
    return result.exit_code


def cmd_schedule(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    params = gamma_parameters(config.spec.d)
    params.update({k: v for k, v in config.schedule.get("gamma", {}).items() if k in params})
    if args.nmax is not None:
        params["nmax"] = args.nmax
    gamma0, found = find_gamma0(**params, return_flag=True)
    values, verdict = gamma_schedule(gamma0, **params)
    big_values, big_verdict = gamma_schedule(min(10 * gamma0, 1.0), **params) if found else ([], False)
    sched = config.make_schedule()
    table = [{"n": n, "L_n": sched.L(n), "delta_n": sched.delta(n), "rho_n": sched.rho(n)}
             for n in range(sched.max_steps)]
    code = EXIT_OK if found and verdict else EXIT_CONDITION
    write_json(out / "report.json", {
        "gamma_parameters": params, "Gamma0": gamma0, "found": found, "verdict": verdict,
        "sequence": [repr(v) for v in values],
        "perturbed": {"gamma0": 10 * gamma0, "verdict": big_verdict,
                      "diverged": bool(big_values) and not np.isfinite(big_values[-1]),
                      "sequence": [repr(v) for v in big_values]},
        "schedule": sched.to_dict(), "rho_inf": sched.rho_inf, "table": table, "exit_code": code})
    print(f"Gamma0 = {gamma0:.6g} (found={found}); verdict {verdict}; 10*Gamma0 verdict {big_verdict}")
    return code


def cmd_generate(args) -> int:
    config = _config(args)
    out = _out_dir(args, config)
    eta, phi = config.build_family()
    fieldmod.save(eta, out / "family.json")
    if phi is not None:
        fieldmod.save(phi, out / "phi_star.json")
    print(f"wrote {out / 'family.json'}")
    return EXIT_OK


COMMANDS = {
    "check-poc": (cmd_check_poc, "orbit-product condition of the family"),
    "check-fc": (cmd_check_fc, "resonant-plane and orbit-sum conditions of the leading order"),
    "solve-commutative": (cmd_solve_commutative, "solve the additive equation for the leading order"),
    "solve": (cmd_solve, "full iteration: check, rescale, iterate, write artifacts"),
    "schedule": (cmd_schedule, "gamma-sequence tools and the step schedule"),
    "generate": (cmd_generate, "write the family described by the config"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coboundary", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--out", help="output directory (default: outputs.dir of the config)")
        p.add_argument("--mode", choices=("algebra", "lie"))
        p.add_argument("--tol", type=float, help="tolerance for the command's pass/fail decision")
        p.add_argument("--seed", type=int, help="seed for random families")
        p.add_argument("--nmax", type=int, help="largest period checked (gamma steps for 'schedule')")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CoboundaryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
