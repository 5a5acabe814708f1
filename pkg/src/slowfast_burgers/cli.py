"""Command-line entry point.

Exit codes: 0 success, 1 configuration/assumption failure, 2 numerical
blow-up, 3 failed acceptance gate.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import artifacts, selfcheck
from .averaging import estimate_averaged_drift
from .config import parse_config
from .experiments import (MIN_PATHS_FOR_SE, run_auxiliary_gap, run_convergence_sweep,
                          run_increment_diagnostic, run_moment_diagnostics, sup_error_path)
from .integrators import BlowUpError, simulate_averaged, simulate_slow_fast
from .spectral import ConfigurationError

log = logging.getLogger("slowfast_burgers")

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_GATE = 0, 1, 2, 3
THREADS_ENV = "SFB_THREADS"
COMMANDS = ("simulate", "sweep", "drift", "diagnose", "selfcheck")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slowfast-burgers", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--example")
    ap.add_argument("--epsilon", type=_floats, help="comma-separated epsilon values")
    ap.add_argument("--p", type=_floats, help="comma-separated error exponents")
    ap.add_argument("--mc", type=int, help="Monte Carlo paths M")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int, default=int(os.environ.get(THREADS_ENV, "1")))
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--dump", action="store_true", help="also write noise and fast-state dumps")
    ap.add_argument("--force", action="store_true", help="run even if assumption checks fail")
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override any config key (TOML literal value)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _overrides(args) -> list[str]:
    items = list(args.set)
    if args.example:
        items.append(f'example="{args.example}"')
    if args.epsilon:
        items.append(f"experiments.epsilons={args.epsilon!r}")
        items.append(f"simulation.epsilon={args.epsilon[0]!r}")
    if args.p:
        items.append(f"simulation.p={args.p!r}")
    if args.mc is not None:
        items.append(f"simulation.mc_samples={args.mc}")
    if args.seed is not None:
        items.append(f"simulation.seed={args.seed}")
    return items


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "selfcheck":
        ok = selfcheck.run_all()
        print("selfcheck:", "PASS" if ok else "FAIL")
        return EXIT_OK if ok else EXIT_GATE
    try:
        rc = parse_config(args.config, _overrides(args), force=args.force)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not rc.validation.passed:
        print(rc.validation.to_text(), file=sys.stderr, end="")
    manifest = artifacts.RunManifest(args.command, rc.raw, rc.cfg.seed, rc.config_hash)
    out = args.out
    manifest.write(out)
    try:
        status = COMMAND_TABLE[args.command](rc, args, manifest)
    except BlowUpError as exc:
        print(f"numerical blow-up: {exc}", file=sys.stderr)
        manifest.status = "blowup"
        status = EXIT_BLOWUP
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        manifest.status = "config-error"
        status = EXIT_CONFIG
    else:
        manifest.status = {EXIT_OK: "ok", EXIT_GATE: "gate-failed",
                           EXIT_BLOWUP: "blowup"}.get(status, "error")
    manifest.finished = time.time()
    manifest.write(out)
    return status


def cmd_simulate(rc, args, manifest) -> int:
    cfg, sysm = rc.cfg, rc.system
    tr = simulate_slow_fast(sysm.x0, sysm.y0, sysm.coeffs, sysm.noise, cfg)
    out = args.out
    h = rc.config_hash
    manifest.outputs.append(str(artifacts.write_trajectory_csv(out / "trajectory.csv", tr.times,
                                                              tr.x, h)))
    fbar = sysm.fbar or sysm.coeffs.analytic_fbar
    if fbar is not None:
        av = simulate_averaged(sysm.x0, fbar, sysm.coeffs, sysm.noise, cfg, tr.noise)
        manifest.outputs.append(str(artifacts.write_trajectory_csv(
            out / "averaged.csv", av.times, av.x, h)))
        for p in cfg.p_exponents:
            print(f"sup_t ||X - Xbar||^{p:g} = {float(sup_error_path(tr.x, av.x, p)):.6g}")
    if args.dump:
        manifest.outputs.append(str(artifacts.write_trajectory_csv(
            out / "fast.csv", tr.times, tr.y, h)))
        grid = cfg.basis.to_physical(tr.x)
        manifest.outputs.append(str(artifacts.write_trajectory_csv(
            out / "trajectory_grid.csv", tr.times, grid, h, prefix="u@")))
        noise_path = out / "noise.csv"
        with artifacts.atomic_path(noise_path) as tmp:
            tr.noise.dump_csv(tmp, h)
        manifest.outputs.append(str(noise_path))
    print(f"wrote {out}/trajectory.csv ({cfg.n_steps + 1} rows, seed {cfg.seed})")
    return EXIT_OK


def sweep_gate(report) -> list[str]:
    """Trend gate: strictly decreasing in epsilon and a factor-2 drop end to end."""
    problems = []
    for p in sorted({c.p for c in report.cells}):
        cells = sorted((c for c in report.cells if c.p == p), key=lambda c: -c.epsilon)
        est = [c.estimate for c in cells]
        if len(est) > 1 and not all(a > b for a, b in zip(est, est[1:])):
            problems.append(f"p={p:g}: estimates not strictly decreasing in epsilon: {est}")
        if len(est) > 1 and not est[-1] < 0.5 * est[0]:
            problems.append(f"p={p:g}: smallest-epsilon error not below half the largest")
    return problems


def cmd_sweep(rc, args, manifest) -> int:
    report = run_convergence_sweep(rc.cfg, rc.system, rc.experiments["epsilons"],
                                   rc.cfg.p_exponents, rc.cfg.mc_samples, threads=args.threads)
    report.config_hash = rc.config_hash
    out = args.out
    manifest.outputs.append(str(artifacts.write_sweep_csv(out / "sweep.csv", report)))
    manifest.outputs.append(str(artifacts.write_sweep_svg(out / "sweep.svg", report)))
    for c in report.cells:
        print(f"eps={c.epsilon:<8g} p={c.p:g}  {c.estimate:.6g} +- {c.stderr:.2g}  "
              f"(M_eff={c.m_effective}, excluded={c.exclusions})")
    if report.failed:
        print("more than 1% of paths blew up", file=sys.stderr)
        return EXIT_BLOWUP
    if report.mc_samples < MIN_PATHS_FOR_SE:
        print(f"warning: M={report.mc_samples} < {MIN_PATHS_FOR_SE}; trend gate skipped",
              file=sys.stderr)
        return EXIT_OK
    problems = sweep_gate(report)
    for msg in problems:
        print(f"gate: {msg}", file=sys.stderr)
    return EXIT_GATE if problems else EXIT_OK


def cmd_drift(rc, args, manifest) -> int:
    d = rc.drift
    sysm = rc.system
    rng = np.random.default_rng(rc.cfg.seed)
    est = estimate_averaged_drift(sysm.x0, sysm.coeffs, sysm.noise, d["burn_in"], d["horizon"],
                                  d["dt"], rng, n_batches=int(d["n_batches"]), basis=rc.cfg.basis)
    fbar = sysm.coeffs.analytic_fbar
    analytic = fbar(sysm.x0) if fbar is not None else np.full_like(sysm.x0, np.nan)
    rows = [[k + 1, est.drift_value[k], est.standard_error[k], analytic[k], rc.config_hash]
            for k in range(est.drift_value.size)]
    path = artifacts.write_csv(args.out / "drift.csv",
                               ["mode", "estimate", "stderr", "analytic", "config_hash"], rows)
    manifest.outputs.append(str(path))
    if fbar is not None:
        rel = np.linalg.norm(est.drift_value - analytic) / max(np.linalg.norm(analytic), 1e-300)
        print(f"relative L2 discrepancy to analytic drift: {rel:.4g} "
              f"(standard error {est.l2_standard_error:.3g})")
    return EXIT_OK


def cmd_diagnose(rc, args, manifest) -> int:
    ex = rc.experiments
    out, h = args.out, rc.config_hash
    mom = run_moment_diagnostics(rc.cfg, rc.system, ex["q"], ex["epsilons"],
                                 threads=args.threads)
    manifest.outputs.append(str(artifacts.write_csv(
        out / "moments.csv",
        ["epsilon", "q", "sup_x_moment", "sup_x_moment_se", "sup_y_moment", "sup_h1_sq",
         "M_effective", "config_hash"],
        [[r.epsilon, r.q, r.sup_x_moment, r.sup_x_moment_se, r.sup_y_moment, r.sup_h1_sq,
          r.m_effective, h] for r in mom.rows])))
    inc_cfg = rc.cfg.replace(dt=float(ex["increment_dt"]), delta=float(ex["increment_dt"]))
    inc = run_increment_diagnostic(inc_cfg, rc.system, ex["h"], t_fixed=float(ex["t_fixed"]),
                                   threads=args.threads)
    aux_cfg, aux_sys = rc.build_system(ex["aux_example"], epsilon=float(ex["aux_epsilon"]))
    aux = run_auxiliary_gap(aux_cfg, aux_sys, ex["deltas"], threads=args.threads)
    for name, rep in (("increments", inc), ("auxiliary", aux)):
        manifest.outputs.append(str(artifacts.write_csv(
            out / f"{name}.csv", ["scale", "mean", "stderr", "slope", "config_hash"],
            [[s, m, se, rep.slope, h] for s, m, se in zip(rep.scales, rep.means, rep.stderrs)])))
        print(f"{name}: slope {rep.slope:.3f} ({'PASS' if rep.passed else 'FAIL'})")
    flags = mom.flags()
    for f in flags:
        print(f"moments: {f}")
    if rc.cfg.mc_samples < MIN_PATHS_FOR_SE:
        return EXIT_OK
    return EXIT_OK if (inc.passed and aux.passed and not flags) else EXIT_GATE


COMMAND_TABLE = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "drift": cmd_drift,
    "diagnose": cmd_diagnose,
}


if __name__ == "__main__":
    sys.exit(main())
