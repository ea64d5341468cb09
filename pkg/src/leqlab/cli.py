"""Command-line interface.

Verbs: solve (backward system + gains to CSV), simulate (Monte Carlo summary),
verify (acceptance checks to a report), sweep (risk-parameter study).

Exit codes: 0 success, 1 configuration or validation problem, 2 solver
blow-up or an unusable ensemble, 3 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import mc, policy, riccati, verify
from .errors import (
    AllPathsOverflowed,
    BlowUpBeforeTerminal,
    ConfigParseError,
    GridMismatch,
    ValidationError,
)
from .model import build_problem, parse_config_text, run_settings

WORKERS_ENV = "LEQLAB_WORKERS"


class _Parser(argparse.ArgumentParser):
    # argument mistakes are configuration mistakes: exit 1, not argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="leqlab", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to the YAML configuration")
        p.add_argument("--output-dir", default="./out", help="directory for all outputs")

    p_solve = sub.add_parser("solve", help="integrate the backward system, write riccati.csv and gains.csv")
    common(p_solve)

    p_sim = sub.add_parser("simulate", help="Monte Carlo cost estimate, write mc_summary.csv")
    common(p_sim)
    p_sim.add_argument("--n-paths", type=int, default=None)
    p_sim.add_argument("--dt", type=float, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--workers", type=int, default=None)
    p_sim.add_argument("--dump-paths", action="store_true", help="also write per-path accumulators")

    p_ver = sub.add_parser("verify", help="run acceptance checks, write report.csv")
    common(p_ver)
    p_ver.add_argument("--checks", default=None, help="comma-separated check names (default: all)")
    p_ver.add_argument("--n-paths", type=int, default=None)
    p_ver.add_argument("--dt", type=float, default=None)
    p_ver.add_argument("--seed", type=int, default=None)
    p_ver.add_argument("--workers", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="solve across a range of risk parameters, write sweep.csv")
    common(p_sweep)
    p_sweep.add_argument("--theta-sweep", required=True, metavar="MIN:MAX:COUNT")

    return parser


def _load(config_path: str):
    path = Path(config_path)
    if not path.is_file():
        raise ConfigParseError(f"config not found: {path}")
    doc = parse_config_text(path.read_text())
    return build_problem(doc), run_settings(doc)


def _workers(flag_value) -> int:
    if flag_value is not None:
        return max(1, int(flag_value))
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigParseError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
    return max(1, os.cpu_count() or 1)


def _outdir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    spec, rs = _load(args.config)
    out = _outdir(args)
    sol = riccati.solve(spec, rs.grid_n)
    if not sol.exists_on_full_interval:
        print(
            f"blow-up before t=0: solution exists only on [T-eta, T] with eta={sol.eta:.6g}",
            file=sys.stderr,
        )
        return 2
    riccati.export_riccati_csv(sol, out / "riccati.csv")
    pol = policy.optimal_feedback(spec, sol)
    policy.export_gains_csv(pol, out / "gains.csv")
    j, ce = policy.closed_form_optimal_cost(sol, spec.x0, spec.theta)
    print(
        f"Upsilon0={j:.10g} CE={ce:.10g} eta={sol.eta:.6g} "
        f"exists_on_full_interval={sol.exists_on_full_interval}"
    )
    return 0


def cmd_simulate(args) -> int:
    spec, rs = _load(args.config)
    out = _outdir(args)
    if args.n_paths is not None or args.dt is not None or args.seed is not None:
        rs = replace(
            rs,
            n_paths=args.n_paths if args.n_paths is not None else rs.n_paths,
            dt=args.dt if args.dt is not None else rs.dt,
            seed=args.seed if args.seed is not None else rs.seed,
        )
    workers = _workers(args.workers)
    sol = riccati.solve(spec, rs.grid_n)
    if not sol.exists_on_full_interval:
        print(f"blow-up before t=0 (eta={sol.eta:.6g}); cannot simulate", file=sys.stderr)
        return 2
    pol = policy.optimal_feedback(spec, sol)
    fields = policy.policy_fbsde_fields(spec, pol, rs.grid_n)
    ens = mc.simulate(spec, pol, fields, rs.n_paths, rs.dt, rs.seed, sol=sol, workers=workers)
    est = mc.estimate_cost(ens, spec.theta)
    gir = mc.girsanov_check(ens)
    mc.export_mc_summary_csv(out / "mc_summary.csv", est, ens, gir)
    if args.dump_paths:
        mc.export_path_dump_csv(out / "paths.csv", ens)
    _, ce = policy.closed_form_optimal_cost(sol, spec.x0, spec.theta)
    print(
        f"J_hat={est.J_hat:.10g} stderr={est.stderr_J:.4g} CE_hat={est.CE_hat:.10g} "
        f"CE_closed_form={ce:.10g} n_effective={est.n_effective} overflow={est.overflow_count} "
        f"max_weight_share={est.max_weight_share:.3g}"
    )
    return 0


def cmd_verify(args) -> int:
    spec, rs = _load(args.config)
    out = _outdir(args)
    checks = None
    if args.checks is not None:
        checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    cfg = verify.AcceptanceConfig(
        spec=spec,
        checks=checks,
        n_steps=rs.grid_n,
        n_paths=args.n_paths if args.n_paths is not None else rs.n_paths,
        dt=args.dt if args.dt is not None else rs.dt,
        seed=args.seed if args.seed is not None else rs.seed,
        workers=_workers(args.workers),
    )
    try:
        report = verify.run_acceptance_suite(cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    verify.export_report_csv(report, out / "report.csv")
    print(verify.report_text(report))
    return 0 if report.overall else 3


def cmd_sweep(args) -> int:
    spec, rs = _load(args.config)
    out = _outdir(args)
    try:
        lo_s, hi_s, count_s = args.theta_sweep.split(":")
        lo, hi, count = float(lo_s), float(hi_s), int(count_s)
    except ValueError:
        print("error: --theta-sweep expects MIN:MAX:COUNT", file=sys.stderr)
        return 1
    if count < 1:
        print("error: sweep range is empty", file=sys.stderr)
        return 1
    if count == 1:
        thetas = [lo]
    else:
        step = (hi - lo) / (count - 1)
        thetas = [lo + i * step for i in range(count)]
    if any(t == 0.0 for t in thetas):
        print("error: sweep contains theta = 0", file=sys.stderr)
        return 1

    import csv as _csv

    with open(out / "sweep.csv", "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["theta", "CE", "alpha1_0", "eta", "exists"])
        for th in thetas:
            spec_th = replace(spec, theta=th)
            try:
                sol = riccati.solve(spec_th, rs.grid_n)
            except BlowUpBeforeTerminal as exc:
                w.writerow([f"{th:.17g}", "", "", f"{exc.eta:.17g}", "false"])
                continue
            if sol.exists_on_full_interval:
                _, ce = policy.closed_form_optimal_cost(sol, spec_th.x0, th)
                w.writerow(
                    [f"{th:.17g}", f"{ce:.17g}", f"{sol.alpha1[0]:.17g}",
                     f"{sol.eta:.17g}", "true"]
                )
            else:
                w.writerow([f"{th:.17g}", "", "", f"{sol.eta:.17g}", "false"])
    print(f"wrote {out / 'sweep.csv'} ({len(thetas)} rows)")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": cmd_solve,
        "simulate": cmd_simulate,
        "verify": cmd_verify,
        "sweep": cmd_sweep,
    }
    try:
        return handlers[args.verb](args)
    except (ConfigParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BlowUpBeforeTerminal as exc:
        print(f"error: {exc} (eta={exc.eta:.6g})", file=sys.stderr)
        return 2
    except (AllPathsOverflowed, GridMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
